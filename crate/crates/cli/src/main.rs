use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathoscope::annotator::{self, AnnotationResponse, FixtureTransport, Transport};
use pathoscope::bundled::{self, BundledDataset, BundledName};
use pathoscope::circumplex::{default_weight_table, load_weight_table, project, WeightTable};
use pathoscope::emodb::{self, audit_report};
use pathoscope::error::{read_file, write_file, Error, Result};
use pathoscope::exec::ExecMode;
use pathoscope::labelmap::{
    default_mapping, load_mapping, load_match_records, match_report, MappingTable, MatchReport,
};
use pathoscope::model::SegmentRecord;
use pathoscope::pipeline::{self, AnalysisTable, ComparisonOutcome};
use pathoscope::rankstats::{PValueMethod, DEFAULT_PERMUTATION_SEED, MIN_PERMUTATIONS};
use pathoscope::timeseries::{parse_channels, ExportFormat, TimeSeriesFrame};

#[derive(Parser)]
#[command(
    name = "pathoscope",
    version,
    about = "Cross-modal affect analytics for segmented political speech",
    after_help = "\
Exit codes: 0 ok, 2 input or schema error, 3 join error, 4 transport error, 5 degenerate statistics.
Warnings go to standard error with codes W001..W007; set RUST_LOG=info for more detail.

Common workflows:
  pathoscope correlate --bundled -o correlations.csv
  pathoscope ingest --segments segments.json --e2v e2v_probs.json --llm llm_annotations.json --trust trust_scores.json -o table.json
  pathoscope timeseries --bundled --format svg -o timeseries.svg
  pathoscope emodb-audit --manifest files.txt --match-records matches.json -o audit.json"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project eight-class probability maps onto arousal and valence
    Project {
        /// e2v_probs.json: segment_id -> eight-class probability object
        probs: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Print the active weight table and exit
        #[arg(long)]
        print_weights: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Spearman correlations for the six modality comparisons (correlations.csv)
    Correlate {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, value_enum, default_value_t = Method::TApprox)]
        method: Method,
        /// Permutation count; at least 10000
        #[arg(long, default_value_t = MIN_PERMUTATIONS)]
        permutations: usize,
        /// Seed for the permutation streams
        #[arg(long, default_value_t = DEFAULT_PERMUTATION_SEED)]
        seed: u64,
        /// Emit JSON with the p-value method and unavailability reasons
        #[arg(long)]
        json: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Per-channel descriptive statistics (descriptives.csv)
    Describe {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Distribution of rhetorical-function labels (rhetoric.csv)
    Rhetoric {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Per-segment channel traces as CSV or SVG
    Timeseries {
        #[command(flatten)]
        table: TableArgs,
        /// Comma-separated channels: gemini_arousal, gemini_valence, e2v_arousal, e2v_valence, pathos
        #[arg(long, value_delimiter = ',', default_values_t = ["gemini_valence".to_string(), "e2v_arousal".to_string(), "pathos".to_string()])]
        channels: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Corpus audit built from filename metadata (audit.json)
    EmodbAudit {
        /// One filename per line; blank lines and '#' comments are skipped
        #[arg(long, required_unless_present = "bundled", conflicts_with = "bundled")]
        manifest: Option<PathBuf>,
        /// Use the bundled speaker x emotion counts instead of a manifest
        #[arg(long)]
        bundled: bool,
        #[arg(long)]
        convention: Option<PathBuf>,
        /// Annotation match records to add per-category confidence checks
        #[arg(long)]
        match_records: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Cells with at most this many utterances are reported as gaps
        #[arg(long, default_value_t = 0)]
        gap_threshold: u64,
        #[arg(long, value_enum, default_value_t = AuditFormat::Json)]
        format: AuditFormat,
        /// Parse the manifest on one thread
        #[arg(long)]
        sequential: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Match rate of free-text annotation labels against ground-truth categories
    MatchRate {
        /// JSON list of {utterance_id, ground_truth, annotation}
        records: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Request open-ended annotations for segments (writes llm_annotations.json)
    #[command(after_help = "\
The live endpoint reads its bearer token from the PATHOSCOPE_API_TOKEN environment variable.
The token is never written to output or logs.")]
    Annotate {
        #[arg(long)]
        segments: PathBuf,
        /// Opaque audio reference forwarded to the endpoint
        #[arg(long)]
        audio_ref: String,
        /// Replay a recorded response instead of calling the endpoint
        #[arg(long, required_unless_present = "endpoint", conflicts_with = "endpoint")]
        fixture: Option<PathBuf>,
        /// Live endpoint URL (needs PATHOSCOPE_API_TOKEN)
        #[arg(long)]
        endpoint: Option<String>,
        /// Replacement instruction template
        #[arg(long)]
        instructions: Option<PathBuf>,
        /// Send one request per segment
        #[arg(long)]
        per_segment: bool,
        /// Concurrent requests with --per-segment
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        /// Print the request document and exit without sending
        #[arg(long)]
        dry_run: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Join channel files onto the segment table and write the merged segments.json
    Ingest {
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// Where the analysis table comes from.
#[derive(Args)]
struct TableArgs {
    /// Use the bundled 41-segment dataset (or the 51-index series for timeseries)
    #[arg(long, conflicts_with = "segments")]
    bundled: bool,
    /// segments.json: list of segment records
    #[arg(long, required_unless_present = "bundled")]
    segments: Option<PathBuf>,
    /// e2v_probs.json: segment_id -> eight-class probabilities, projected at ingest
    #[arg(long, requires = "segments")]
    e2v: Option<PathBuf>,
    /// llm_annotations.json in the annotation response format
    #[arg(long, requires = "segments")]
    llm: Option<PathBuf>,
    /// trust_scores.json: segment_id -> {pathos, relevant}
    #[arg(long, requires = "segments")]
    trust: Option<PathBuf>,
    /// Weight table for projecting e2v probabilities
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Keep rows marked irrelevant
    #[arg(long)]
    no_filter: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    TApprox,
    Permutation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditFormat {
    Json,
    Text,
}

fn weights(path: Option<&Path>) -> Result<WeightTable> {
    path.map_or_else(|| Ok(default_weight_table()), load_weight_table)
}

fn mapping(path: Option<&Path>) -> Result<MappingTable> {
    path.map_or_else(|| Ok(default_mapping()), load_mapping)
}

impl TableArgs {
    fn load_unfiltered(&self) -> Result<AnalysisTable> {
        let w = weights(self.weights.as_deref())?;
        if self.bundled {
            return Ok(AnalysisTable::new(bundled::appendix_b()?)?.with_provenance("segments", "bundled:appendix_b"));
        }
        let segments = self.segments.as_deref().expect("clap enforces --segments");
        pipeline::ingest(
            segments,
            self.e2v.as_deref(),
            self.llm.as_deref(),
            self.trust.as_deref(),
            &w,
        )
    }

    fn load(&self) -> Result<AnalysisTable> {
        let table = self.load_unfiltered()?;
        Ok(if self.no_filter {
            table
        } else {
            pipeline::apply_relevance_filter(&table)
        })
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Project {
            probs,
            weights: wpath,
            print_weights,
            output,
        } => {
            let w = weights(wpath.as_deref())?;
            if print_weights {
                return emit(output.as_deref(), &format!("{}\n", w.to_json()));
            }
            let mut out = BTreeMap::new();
            for (id, p) in pipeline::parse_e2v_probs(&read_file(&probs)?)? {
                out.insert(id, project(&p, &w));
            }
            emit(output.as_deref(), &to_json(&out))
        }
        Command::Correlate {
            table,
            method,
            permutations,
            seed,
            json,
            output,
        } => {
            let t = table.load()?;
            let m = match method {
                Method::TApprox => PValueMethod::TApprox,
                Method::Permutation => PValueMethod::Permutation { permutations, seed },
            };
            if permutations < MIN_PERMUTATIONS {
                return Err(Error::Input(format!(
                    "--permutations must be at least {MIN_PERMUTATIONS}"
                )));
            }
            let suite = pipeline::correlation_suite(&t, m);
            let text = if json { to_json(&suite) } else { suite.to_csv() };
            emit(output.as_deref(), &text)?;
            if suite
                .comparisons
                .iter()
                .all(|c| matches!(c.outcome, ComparisonOutcome::Unavailable { .. }))
            {
                return Err(Error::Degenerate("no comparison had enough non-constant pairs".into()));
            }
            Ok(())
        }
        Command::Describe { table, output } => {
            let stats = pipeline::descriptive_suite(&table.load()?);
            emit(output.as_deref(), &pipeline::descriptives_csv(&stats))
        }
        Command::Rhetoric { table, output } => {
            let dist = pipeline::rhetoric_distribution(&table.load()?);
            emit(output.as_deref(), &pipeline::rhetoric_csv(&dist))
        }
        Command::Timeseries {
            table,
            channels,
            format,
            output,
        } => {
            let channels = parse_channels(&channels)?;
            let frame = if table.bundled {
                let BundledDataset::Figure1Series(fig) = bundled::load_bundled_dataset(BundledName::Figure1Series)?
                else {
                    unreachable!("requested the figure series")
                };
                TimeSeriesFrame::from_figure1(&fig, &channels)?
            } else {
                TimeSeriesFrame::from_table(&table.load()?, &channels)
            };
            let format = match format {
                Format::Csv => ExportFormat::Csv,
                Format::Svg => ExportFormat::Svg,
            };
            emit(output.as_deref(), &frame.export(format))
        }
        Command::EmodbAudit {
            manifest,
            bundled: use_bundled,
            convention,
            match_records,
            mapping: mpath,
            gap_threshold,
            format,
            sequential,
            output,
        } => {
            let conv = match &convention {
                Some(p) => emodb::load_convention(p)?,
                None => emodb::default_convention(),
            };
            let (matrix, name) = if use_bundled {
                (bundled::table6_counts()?, "bundled:table6_counts".to_string())
            } else {
                let path = manifest.expect("clap enforces --manifest");
                let mode = if sequential {
                    ExecMode::Sequential
                } else {
                    ExecMode::Parallel
                };
                let metas = emodb::parse_manifest(&read_file(&path)?, &conv, mode)?;
                (emodb::build_matrix(&metas), conv.name.clone())
            };
            let matches: Option<MatchReport> = match &match_records {
                Some(p) => Some(report_from_records(p, &mapping(mpath.as_deref())?)?),
                None => None,
            };
            let report = audit_report(&matrix, matches.as_ref(), &name, gap_threshold)?;
            let text = match format {
                AuditFormat::Json => format!("{}\n", report.to_json()),
                AuditFormat::Text => report.to_text(),
            };
            emit(output.as_deref(), &text)
        }
        Command::MatchRate {
            records,
            mapping: mpath,
            output,
        } => {
            let report = report_from_records(&records, &mapping(mpath.as_deref())?)?;
            emit(output.as_deref(), &report.to_csv())
        }
        Command::Annotate {
            segments,
            audio_ref,
            fixture,
            endpoint,
            instructions,
            per_segment,
            parallelism,
            dry_run,
            output,
        } => {
            let rows: Vec<SegmentRecord> = serde_json::from_str(&read_file(&segments)?)
                .map_err(|e| Error::Schema(format!("{}: {e}", segments.display())))?;
            let template = match &instructions {
                Some(p) => read_file(p)?,
                None => annotator::default_instructions().to_string(),
            };
            let request = annotator::build_request_with(&audio_ref, &rows, &template)?;
            if dry_run {
                return emit(output.as_deref(), &format!("{}\n", request.to_json()));
            }
            let transport = make_transport(fixture, endpoint)?;
            let response: AnnotationResponse = if per_segment {
                let items: Vec<_> = rows.into_iter().map(|r| (audio_ref.clone(), r)).collect();
                annotator::annotate_each(&items, transport.as_ref(), parallelism)?
            } else {
                annotator::annotate(&request, transport.as_ref())?
            };
            if !response.rejected.is_empty() {
                log::warn!("W003 degraded_annotation rejected={}", response.rejected.len());
            }
            emit(output.as_deref(), &format!("{}\n", response.to_json()))
        }
        Command::Ingest { table, output } => {
            // ingest keeps every row; filtering belongs to the analysis commands
            let t = table.load_unfiltered()?;
            emit(output.as_deref(), &format!("{}\n", t.segments_json()))
        }
    }
}

fn report_from_records(path: &Path, table: &MappingTable) -> Result<MatchReport> {
    let records = load_match_records(path)?;
    let pairs: Vec<_> = records.into_iter().map(|r| (r.ground_truth, r.annotation)).collect();
    match_report(&pairs, table)
}

fn make_transport(fixture: Option<PathBuf>, endpoint: Option<String>) -> Result<Box<dyn Transport>> {
    if let Some(f) = fixture {
        return Ok(Box::new(FixtureTransport::new(f)));
    }
    let endpoint = endpoint.expect("clap enforces --fixture or --endpoint");
    live_transport(endpoint)
}

#[cfg(feature = "http")]
fn live_transport(endpoint: String) -> Result<Box<dyn Transport>> {
    Ok(Box::new(annotator::HttpTransport::from_env(endpoint)?))
}

#[cfg(not(feature = "http"))]
fn live_transport(_endpoint: String) -> Result<Box<dyn Transport>> {
    Err(Error::Transport(format!(
        "built without the http feature; use --fixture (live calls read {})",
        annotator::CREDENTIAL_ENV
    )))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
