//! Joining the modality channels into one table and running the analysis
//! suites over it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotator::parse_response;
use crate::channel::Channel;
use crate::circumplex::{project, WeightTable};
use crate::error::{read_file, Error, Result};
use crate::model::{ClassProbabilities, Entries, PathosScore, SegmentRecord};
use crate::rankstats::{describe, pairwise_complete, spearman, CorrelationResult, DescriptiveStats, PValueMethod};

/// Reserved key in `e2v_probs.json` for producer metadata (model id, version).
pub const E2V_META_KEY: &str = "_meta";

/// Segment rows ordered by start time, plus where each channel came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisTable {
    rows: Vec<SegmentRecord>,
    pub provenance: BTreeMap<String, String>,
}

impl AnalysisTable {
    /// Sorts by `start_s` (ties by id) and rejects duplicate ids.
    pub fn new(mut rows: Vec<SegmentRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.segment_id.as_str()) {
                return Err(Error::schema(format!("duplicate segment_id {}", r.segment_id)));
            }
        }
        rows.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then_with(|| a.segment_id.cmp(&b.segment_id))
        });
        Ok(AnalysisTable {
            rows,
            provenance: BTreeMap::new(),
        })
    }

    pub fn with_provenance(mut self, channel: &str, source: &str) -> Self {
        self.provenance.insert(channel.to_string(), source.to_string());
        self
    }

    pub fn rows(&self) -> &[SegmentRecord] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of one channel in row order, `None` where absent.
    pub fn column(&self, channel: Channel) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| channel.value(r)).collect()
    }

    pub fn segments_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("records serialize")
    }
}

/// In-memory contents of the ingest inputs.
#[derive(Debug, Clone, Default)]
pub struct IngestSources {
    pub segments: String,
    pub e2v_probs: Option<String>,
    pub llm_annotations: Option<String>,
    pub trust_scores: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrustEntry {
    #[serde(default)]
    pathos: Option<PathosScore>,
    relevant: bool,
}

fn index_of(rows: &[SegmentRecord]) -> HashMap<String, usize> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| (r.segment_id.clone(), i))
        .collect()
}

/// Left-joins channel files onto the segment table by `segment_id`.
/// e2v probabilities are projected to arousal/valence with `weights`.
pub fn ingest_sources(src: &IngestSources, weights: &WeightTable) -> Result<AnalysisTable> {
    let mut rows: Vec<SegmentRecord> =
        serde_json::from_str(&src.segments).map_err(|e| Error::schema(format!("segments: {e}")))?;
    let table = AnalysisTable::new(std::mem::take(&mut rows))?;
    let mut rows = table.rows;
    let index = index_of(&rows);
    let lookup = |id: &str, file: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Join(id.to_string(), file.to_string()))
    };

    if let Some(text) = &src.e2v_probs {
        for (id, probs) in parse_e2v_probs(text)? {
            let i = lookup(&id, "e2v_probs")?;
            rows[i].e2v_point = Some(project(&probs, weights));
            rows[i].e2v_probs = Some(probs);
        }
    }

    if let Some(text) = &src.llm_annotations {
        let resp = parse_response(text, None).map_err(|e| Error::schema(format!("llm_annotations: {e}")))?;
        for id in resp
            .annotations
            .keys()
            .chain(resp.rejected.iter().map(|r| &r.segment_id))
        {
            lookup(id, "llm_annotations")?;
        }
        for (id, ann) in resp.annotations {
            let i = index[&id];
            rows[i].llm_annotation = Some(ann);
        }
    }

    if let Some(text) = &src.trust_scores {
        let Entries(entries) = serde_json::from_str::<Entries<TrustEntry>>(text)
            .map_err(|e| Error::schema(format!("trust_scores: {e}")))?;
        let mut seen = HashSet::new();
        for (id, entry) in entries {
            if !seen.insert(id.clone()) {
                return Err(Error::schema(format!("trust_scores: duplicate segment_id {id}")));
            }
            let i = lookup(&id, "trust_scores")?;
            rows[i].relevant = entry.relevant;
            rows[i].pathos = entry.pathos;
            rows[i].validate()?;
        }
    }

    Ok(AnalysisTable {
        rows,
        provenance: BTreeMap::new(),
    })
}

/// Validates an `e2v_probs.json` document: segment id to eight-class map,
/// plus an optional `_meta` object that is skipped. Entries keep file order.
pub fn parse_e2v_probs(text: &str) -> Result<Vec<(String, ClassProbabilities)>> {
    let Entries(entries) =
        serde_json::from_str::<Entries<Value>>(text).map_err(|e| Error::schema(format!("e2v_probs: {e}")))?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for (id, value) in entries {
        if id == E2V_META_KEY {
            if !value.is_object() {
                return Err(Error::schema(format!("e2v_probs: {E2V_META_KEY} must be an object")));
            }
            continue;
        }
        if !seen.insert(id.clone()) {
            return Err(Error::schema(format!("e2v_probs: duplicate segment_id {id}")));
        }
        let probs: ClassProbabilities =
            serde_json::from_value(value).map_err(|e| Error::schema(format!("e2v_probs[{id}]: {e}")))?;
        out.push((id, probs));
    }
    Ok(out)
}

/// [`ingest_sources`] reading each input from disk. Channel paths are optional.
pub fn ingest(
    segments_path: &Path,
    e2v_path: Option<&Path>,
    llm_path: Option<&Path>,
    trust_path: Option<&Path>,
    weights: &WeightTable,
) -> Result<AnalysisTable> {
    let read_opt = |p: Option<&Path>| p.map(read_file).transpose();
    let src = IngestSources {
        segments: read_file(segments_path)?,
        e2v_probs: read_opt(e2v_path)?,
        llm_annotations: read_opt(llm_path)?,
        trust_scores: read_opt(trust_path)?,
    };
    let mut table = ingest_sources(&src, weights)?;
    let sources = [
        ("segments", Some(segments_path)),
        ("e2v", e2v_path),
        ("llm", llm_path),
        ("trust", trust_path),
    ];
    for (channel, path) in sources {
        if let Some(p) = path {
            table.provenance.insert(channel.to_string(), p.display().to_string());
        }
    }
    Ok(table)
}

/// Drops rows marked irrelevant; retained rows are untouched.
pub fn apply_relevance_filter(table: &AnalysisTable) -> AnalysisTable {
    let rows: Vec<SegmentRecord> = table.rows.iter().filter(|r| r.relevant).cloned().collect();
    let removed = table.rows.len() - rows.len();
    if removed > 0 {
        log::info!("W001 filtered_rows removed={removed} retained={}", rows.len());
    }
    if rows.is_empty() && !table.rows.is_empty() {
        log::warn!("W005 empty_after_filter removed={removed}");
    }
    AnalysisTable {
        rows,
        provenance: table.provenance.clone(),
    }
}

/// The six modality comparisons, in reporting order.
pub const COMPARISONS: [(&str, Channel, Channel); 6] = [
    ("gemV_pathos", Channel::GeminiValence, Channel::Pathos),
    ("gemA_pathos", Channel::GeminiArousal, Channel::Pathos),
    ("e2vV_pathos", Channel::E2vValence, Channel::Pathos),
    ("e2vA_pathos", Channel::E2vArousal, Channel::Pathos),
    ("e2vA_gemA", Channel::E2vArousal, Channel::GeminiArousal),
    ("e2vV_gemV", Channel::E2vValence, Channel::GeminiValence),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComparisonOutcome {
    Available(CorrelationResult),
    Unavailable { n: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub name: &'static str,
    pub x: Channel,
    pub y: Channel,
    pub outcome: ComparisonOutcome,
}

impl Comparison {
    pub fn result(&self) -> Option<&CorrelationResult> {
        match &self.outcome {
            ComparisonOutcome::Available(r) => Some(r),
            ComparisonOutcome::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSuiteResult {
    pub comparisons: Vec<Comparison>,
}

impl CorrelationSuiteResult {
    pub fn get(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }

    /// `comparison,rho,p,n`; unavailable comparisons leave rho and p empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["comparison", "rho", "p", "n"])
            .expect("in-memory write");
        for c in &self.comparisons {
            let row = match &c.outcome {
                ComparisonOutcome::Available(r) => [
                    c.name.to_string(),
                    format!("{:.6}", r.rho),
                    format!("{:.6e}", r.p_value),
                    r.n.to_string(),
                ],
                ComparisonOutcome::Unavailable { n, .. } => {
                    [c.name.to_string(), String::new(), String::new(), n.to_string()]
                }
            };
            w.write_record(&row).expect("in-memory write");
        }
        finish_csv(w)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Spearman correlation for each comparison over pairwise-complete rows.
pub fn correlation_suite(table: &AnalysisTable, method: PValueMethod) -> CorrelationSuiteResult {
    let comparisons = COMPARISONS
        .iter()
        .map(|&(name, x, y)| {
            let (xs, ys) = pairwise_complete(&table.column(x), &table.column(y)).expect("columns have table length");
            let outcome = match spearman(&xs, &ys, method) {
                Ok(r) => ComparisonOutcome::Available(r),
                Err(e) => {
                    log::warn!("W006 comparison_unavailable name={name} n={} reason={e}", xs.len());
                    ComparisonOutcome::Unavailable {
                        n: xs.len(),
                        reason: e.to_string(),
                    }
                }
            };
            Comparison { name, x, y, outcome }
        })
        .collect();
    CorrelationSuiteResult { comparisons }
}

/// Descriptive statistics per channel; channels with no values are omitted.
pub fn descriptive_suite(table: &AnalysisTable) -> BTreeMap<Channel, DescriptiveStats> {
    let mut out = BTreeMap::new();
    for ch in Channel::ALL {
        let values: Vec<f64> = table.column(ch).into_iter().flatten().collect();
        match describe(&values) {
            Ok(d) => {
                out.insert(ch, d);
            }
            Err(_) => log::warn!("W007 empty_channel channel={ch}"),
        }
    }
    out
}

pub fn descriptives_csv(stats: &BTreeMap<Channel, DescriptiveStats>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["measure", "mean", "sd", "min", "max", "n"])
        .expect("in-memory write");
    for (ch, d) in stats {
        w.write_record([
            ch.name().to_string(),
            format!("{:.6}", d.mean),
            format!("{:.6}", d.sd),
            format!("{:.6}", d.min),
            format!("{:.6}", d.max),
            d.n.to_string(),
        ])
        .expect("in-memory write");
    }
    finish_csv(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhetoricCount {
    pub rhetorical_function: String,
    pub n: usize,
    pub pct: f64,
}

/// Rhetorical-function label counts over annotated rows, most frequent
/// first; equal counts are ordered by label.
pub fn rhetoric_distribution(table: &AnalysisTable) -> Vec<RhetoricCount> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut annotated = 0;
    for r in &table.rows {
        if let Some(a) = &r.llm_annotation {
            annotated += 1;
            *counts.entry(a.rhetorical_function.trim().to_string()).or_insert(0) += 1;
        }
    }
    let mut out: Vec<RhetoricCount> = counts
        .into_iter()
        .map(|(label, n)| RhetoricCount {
            rhetorical_function: label,
            n,
            pct: 100.0 * n as f64 / annotated as f64,
        })
        .collect();
    out.sort_by(|a, b| {
        b.n.cmp(&a.n)
            .then_with(|| a.rhetorical_function.cmp(&b.rhetorical_function))
    });
    out
}

pub fn rhetoric_csv(dist: &[RhetoricCount]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rhetorical_function", "n", "pct"])
        .expect("in-memory write");
    for r in dist {
        w.write_record([r.rhetorical_function.clone(), r.n.to_string(), format!("{:.2}", r.pct)])
            .expect("in-memory write");
    }
    finish_csv(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::circumplex::default_weight_table;

    fn segs(n: usize) -> String {
        let recs: Vec<_> = (0..n)
            .map(|i| SegmentRecord::new(format!("s{i:04}"), i as f64, i as f64 + 1.0, "x").unwrap())
            .collect();
        serde_json::to_string(&recs).unwrap()
    }

    #[test]
    fn segments_only_leaves_channels_absent() {
        let t = ingest_sources(
            &IngestSources {
                segments: segs(5),
                ..Default::default()
            },
            &default_weight_table(),
        )
        .unwrap();
        assert_eq!(t.len(), 5);
        for ch in Channel::ALL {
            assert!(t.column(ch).iter().all(Option::is_none));
        }
    }

    #[test]
    fn unknown_id_is_join_error() {
        let src = IngestSources {
            segments: segs(3),
            trust_scores: Some(r#"{"s9999": {"pathos": 0, "relevant": true}}"#.into()),
            ..Default::default()
        };
        let err = ingest_sources(&src, &default_weight_table()).unwrap_err();
        assert!(matches!(&err, Error::Join(id, _) if id == "s9999"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn e2v_probs_are_projected_at_ingest() {
        let src = IngestSources {
            segments: segs(2),
            e2v_probs: Some(
                r#"{"_meta": {"model": "test"},
                    "s0001": {"angry":0.5,"disgusted":0,"fearful":0,"happy":0.5,"neutral":0,"other":0,"sad":0,"surprised":0}}"#
                    .into(),
            ),
            ..Default::default()
        };
        let t = ingest_sources(&src, &default_weight_table()).unwrap();
        let p = t.rows()[1].e2v_point.unwrap();
        assert!((p.arousal - 0.70).abs() < 1e-12 && (p.valence - 0.075).abs() < 1e-12);
        assert!(t.rows()[0].e2v_point.is_none());
    }

    #[test]
    fn relevance_filter_counts() {
        let mut recs: Vec<SegmentRecord> = (0..51)
            .map(|i| SegmentRecord::new(format!("s{i:04}"), i as f64, i as f64 + 1.0, "x").unwrap())
            .collect();
        for r in recs.iter_mut().take(10) {
            r.relevant = false;
        }
        let t = AnalysisTable::new(recs.clone()).unwrap();
        let f = apply_relevance_filter(&t);
        assert_eq!(f.len(), 41);
        assert_eq!(f.rows(), &t.rows()[10..]);

        let all = AnalysisTable::new(recs[10..].to_vec()).unwrap();
        assert_eq!(apply_relevance_filter(&all), all);

        let none = AnalysisTable::new(recs[..10].to_vec()).unwrap();
        assert!(apply_relevance_filter(&none).is_empty());
    }

    #[test]
    fn insufficient_pairs_mark_comparison_unavailable() {
        let mut recs = bundled::appendix_b().unwrap();
        for r in recs.iter_mut().skip(2) {
            r.e2v_point = None;
        }
        let t = AnalysisTable::new(recs).unwrap();
        let s = correlation_suite(&t, PValueMethod::TApprox);
        assert!(s.get("e2vV_pathos").unwrap().result().is_none());
        assert!(s.get("gemV_pathos").unwrap().result().is_some());
        assert!(s.to_csv().contains("e2vV_pathos,,,2\n"));
    }

    #[test]
    fn identical_channels_correlate_perfectly() {
        let mut recs = bundled::appendix_b().unwrap();
        for r in recs.iter_mut() {
            let p = f64::from(r.pathos.unwrap()) / 2.0;
            r.llm_annotation.as_mut().unwrap().valence = p;
        }
        let s = correlation_suite(&AnalysisTable::new(recs).unwrap(), PValueMethod::TApprox);
        assert_eq!(s.get("gemV_pathos").unwrap().result().unwrap().rho, 1.0);
    }

    #[test]
    fn descriptive_single_row_and_empty_channel() {
        let mut rec = SegmentRecord::new("s1", 0.0, 1.0, "x").unwrap();
        rec.pathos = Some(PathosScore::new(-1).unwrap());
        let d = descriptive_suite(&AnalysisTable::new(vec![rec]).unwrap());
        assert_eq!(d.len(), 1);
        assert_eq!(d[&Channel::Pathos].sd, 0.0);
    }

    #[test]
    fn rhetoric_edge_cases() {
        let t = AnalysisTable::new(vec![SegmentRecord::new("s1", 0.0, 1.0, "x").unwrap()]).unwrap();
        assert!(rhetoric_distribution(&t).is_empty());

        let mut recs = bundled::appendix_b().unwrap();
        for r in recs.iter_mut() {
            r.llm_annotation.as_mut().unwrap().rhetorical_function = "Appell".into();
        }
        let d = rhetoric_distribution(&AnalysisTable::new(recs).unwrap());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].pct, 100.0);
    }
}
