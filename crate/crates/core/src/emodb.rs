//! Acted-corpus audit: filename metadata parsing, the speaker by emotion
//! matrix, structural gap detection and the corpus quality report.
//!
//! Filename conventions are configuration. The shipped default encodes the
//! usual EMO-DB scheme (speaker in chars 0..2, text code in 2..5, emotion
//! letter at 5) with genders taken from the published speaker table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::exec::{self, ExecMode};
use crate::labelmap::MatchReport;
use crate::model::{CorpusEmotion, Gender, MatrixRow, SpeakerEmotionMatrix};

const DEFAULT_CONVENTION: &str = include_str!("../data/convention.json");

/// Match rate (percent) below which a confident category is flagged.
pub const FLAG_MAX_MATCH_PCT: f64 = 20.0;
/// Mean confidence above which a poorly matched category is flagged.
pub const FLAG_MIN_CONFIDENCE: f64 = 0.75;

/// Half-open character range `[start, end)` within a filename stem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl TryFrom<[usize; 2]> for Span {
    type Error = Error;

    fn try_from([start, end]: [usize; 2]) -> Result<Self> {
        if end <= start {
            return Err(Error::schema(format!("span [{start}, {end}) is empty")));
        }
        Ok(Span { start, end })
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl Span {
    fn overlaps(self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConvention")]
pub struct FilenameConvention {
    pub name: String,
    pub speaker_span: Span,
    pub text_span: Span,
    pub emotion_code_span: Span,
    pub code_table: BTreeMap<String, CorpusEmotion>,
    pub gender_table: BTreeMap<String, Gender>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvention {
    #[serde(default = "unnamed")]
    name: String,
    speaker_span: Span,
    text_span: Span,
    emotion_code_span: Span,
    code_table: BTreeMap<String, CorpusEmotion>,
    gender_table: BTreeMap<String, Gender>,
}

fn unnamed() -> String {
    "custom".into()
}

impl TryFrom<RawConvention> for FilenameConvention {
    type Error = Error;

    fn try_from(raw: RawConvention) -> Result<Self> {
        let conv = FilenameConvention {
            name: raw.name,
            speaker_span: raw.speaker_span,
            text_span: raw.text_span,
            emotion_code_span: raw.emotion_code_span,
            code_table: raw.code_table,
            gender_table: raw.gender_table,
        };
        conv.validate()?;
        Ok(conv)
    }
}

impl FilenameConvention {
    pub fn validate(&self) -> Result<()> {
        let spans = [
            ("speaker_span", self.speaker_span),
            ("text_span", self.text_span),
            ("emotion_code_span", self.emotion_code_span),
        ];
        for (i, (a_name, a)) in spans.iter().enumerate() {
            for (b_name, b) in &spans[i + 1..] {
                if a.overlaps(*b) {
                    return Err(Error::schema(format!("convention: {a_name} overlaps {b_name}")));
                }
            }
        }
        let code_len = self.emotion_code_span.end - self.emotion_code_span.start;
        if let Some(code) = self.code_table.keys().find(|k| k.chars().count() != code_len) {
            return Err(Error::schema(format!(
                "convention: code {code:?} does not fit emotion_code_span of width {code_len}"
            )));
        }
        let speaker_len = self.speaker_span.end - self.speaker_span.start;
        if let Some(s) = self.gender_table.keys().find(|k| k.chars().count() != speaker_len) {
            return Err(Error::schema(format!(
                "convention: speaker {s:?} does not fit speaker_span of width {speaker_len}"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::schema(format!("convention: {e}")))
    }

    /// Shortest stem (in characters) the spans fit into.
    pub fn min_stem_len(&self) -> usize {
        self.speaker_span
            .end
            .max(self.text_span.end)
            .max(self.emotion_code_span.end)
    }
}

pub fn default_convention() -> FilenameConvention {
    FilenameConvention::from_json(DEFAULT_CONVENTION).expect("embedded convention is valid")
}

pub fn load_convention(path: impl AsRef<Path>) -> Result<FilenameConvention> {
    FilenameConvention::from_json(&read_file(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceMeta {
    pub speaker_id: String,
    pub text_code: String,
    pub emotion: CorpusEmotion,
    pub gender: Gender,
    pub filename: String,
}

fn stem(name: &str) -> &str {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    match base.rfind('.') {
        Some(i) if i > 0 => &base[..i],
        _ => base,
    }
}

fn slice(chars: &[char], span: Span) -> String {
    chars[span.start..span.end].iter().collect()
}

pub fn parse_filename(name: &str, conv: &FilenameConvention) -> Result<UtteranceMeta> {
    let fail = |field: &'static str, reason: String| Error::Filename {
        filename: name.to_string(),
        field,
        reason,
    };
    let chars: Vec<char> = stem(name).chars().collect();
    if chars.len() < conv.min_stem_len() {
        return Err(fail(
            "stem",
            format!("{} characters, convention needs {}", chars.len(), conv.min_stem_len()),
        ));
    }
    let speaker_id = slice(&chars, conv.speaker_span);
    let gender = *conv
        .gender_table
        .get(&speaker_id)
        .ok_or_else(|| fail("speaker_id", format!("unknown speaker {speaker_id:?}")))?;
    let code = slice(&chars, conv.emotion_code_span);
    let emotion = *conv
        .code_table
        .get(&code)
        .ok_or_else(|| fail("emotion_code", format!("unknown emotion code {code:?}")))?;
    Ok(UtteranceMeta {
        speaker_id,
        text_code: slice(&chars, conv.text_span),
        emotion,
        gender,
        filename: name.to_string(),
    })
}

/// Parses one filename per line; blank lines and `#` comments are skipped.
/// The first failing line (in manifest order) is reported.
pub fn parse_manifest(text: &str, conv: &FilenameConvention, mode: ExecMode) -> Result<Vec<UtteranceMeta>> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    exec::map_slice(mode, &lines, |l| parse_filename(l, conv))
        .into_iter()
        .collect()
}

pub fn build_matrix(metas: &[UtteranceMeta]) -> SpeakerEmotionMatrix {
    let mut m = SpeakerEmotionMatrix::new();
    for meta in metas {
        m.increment(&meta.speaker_id, meta.gender, meta.emotion, 1);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub speaker_id: String,
    pub emotion: CorpusEmotion,
    pub count: u64,
}

/// Every cell with `count <= threshold`, sorted by count, speaker, emotion.
pub fn detect_gaps(matrix: &SpeakerEmotionMatrix, threshold: u64) -> Vec<Gap> {
    let mut gaps: Vec<Gap> = matrix
        .speakers()
        .flat_map(|s| {
            CorpusEmotion::ALL.into_iter().filter_map(move |e| {
                let count = matrix.get(s, e);
                (count <= threshold).then(|| Gap {
                    speaker_id: s.to_string(),
                    emotion: e,
                    count,
                })
            })
        })
        .collect();
    gaps.sort_by(|a, b| (a.count, &a.speaker_id, a.emotion).cmp(&(b.count, &b.speaker_id, b.emotion)));
    gaps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Imbalance {
    pub most_frequent: CorpusEmotion,
    pub max_count: u64,
    pub least_frequent: CorpusEmotion,
    pub min_count: u64,
    /// `max_count / min_count`; absent when some category is empty.
    pub ratio: Option<f64>,
    /// Category share of the corpus in percent.
    pub shares_pct: BTreeMap<CorpusEmotion, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceCheck {
    pub category: CorpusEmotion,
    pub match_pct: f64,
    pub avg_conf: Option<f64>,
    /// Poorly matched yet confidently annotated.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub convention: String,
    pub total_utterances: u64,
    pub speaker_count: usize,
    pub gender_totals: BTreeMap<Gender, u64>,
    pub category_totals: BTreeMap<CorpusEmotion, u64>,
    matrix: Vec<MatrixRow>,
    pub imbalance: Imbalance,
    pub gap_threshold: u64,
    pub gaps: Vec<Gap>,
    pub confidence_checks: Option<Vec<ConfidenceCheck>>,
}

pub fn audit_report(
    matrix: &SpeakerEmotionMatrix,
    matches: Option<&MatchReport>,
    convention: &str,
    gap_threshold: u64,
) -> Result<AuditReport> {
    if matrix.is_empty() || matrix.grand_total() == 0 {
        return Err(Error::input("audit_report: empty speaker/emotion matrix"));
    }
    let total = matrix.grand_total();
    let category_totals: BTreeMap<_, _> = CorpusEmotion::ALL
        .into_iter()
        .map(|e| (e, matrix.column_total(e)))
        .collect();
    // ties resolve to the earlier category
    let (most_frequent, max_count) =
        category_totals.iter().fold(
            (CorpusEmotion::Anger, 0),
            |acc, (&e, &n)| if n > acc.1 { (e, n) } else { acc },
        );
    let (least_frequent, min_count) =
        category_totals.iter().fold(
            (CorpusEmotion::Anger, u64::MAX),
            |acc, (&e, &n)| if n < acc.1 { (e, n) } else { acc },
        );
    let imbalance = Imbalance {
        most_frequent,
        max_count,
        least_frequent,
        min_count,
        ratio: (min_count > 0).then(|| max_count as f64 / min_count as f64),
        shares_pct: category_totals
            .iter()
            .map(|(&e, &n)| (e, 100.0 * n as f64 / total as f64))
            .collect(),
    };

    let mut gender_totals = BTreeMap::new();
    for s in matrix.speakers() {
        if let Some(g) = matrix.gender(s) {
            *gender_totals.entry(g).or_insert(0) += matrix.row_total(s);
        }
    }

    let confidence_checks = matches.map(|r| {
        r.per_category
            .iter()
            .map(|(&category, c)| ConfidenceCheck {
                category,
                match_pct: c.match_pct,
                avg_conf: c.avg_conf,
                flagged: c.match_pct < FLAG_MAX_MATCH_PCT && c.avg_conf.is_some_and(|a| a > FLAG_MIN_CONFIDENCE),
            })
            .collect()
    });

    Ok(AuditReport {
        convention: convention.to_string(),
        total_utterances: total,
        speaker_count: matrix.speakers().count(),
        gender_totals,
        category_totals,
        matrix: matrix.to_rows(),
        imbalance,
        gap_threshold,
        gaps: detect_gaps(matrix, gap_threshold),
        confidence_checks,
    })
}

fn abbrev(e: CorpusEmotion) -> &'static str {
    &e.name()[..3]
}

impl AuditReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ConfidenceCheck> {
        self.confidence_checks.iter().flatten().filter(|c| c.flagged)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Corpus audit (convention: {})", self.convention);
        let _ = writeln!(
            out,
            "{} utterances, {} speakers ({})",
            self.total_utterances,
            self.speaker_count,
            self.gender_totals
                .iter()
                .map(|(g, n)| format!("{g}: {n}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let _ = writeln!(out);
        let _ = write!(out, "Speaker G");
        for e in CorpusEmotion::ALL {
            let _ = write!(out, " {:>4}", abbrev(e));
        }
        let _ = writeln!(out, " Total");
        for row in &self.matrix {
            let _ = write!(out, "{:<7} {}", row.speaker_id, row.gender);
            for e in CorpusEmotion::ALL {
                let _ = write!(out, " {:>4}", row.counts[&e]);
            }
            let _ = writeln!(out, " {:>5}", row.total);
        }
        let _ = write!(out, "Total    ");
        for e in CorpusEmotion::ALL {
            let _ = write!(out, " {:>4}", self.category_totals[&e]);
        }
        let _ = writeln!(out, " {:>5}", self.total_utterances);
        let _ = writeln!(out);

        let im = &self.imbalance;
        let ratio = im.ratio.map(|r| format!("{r:.2}")).unwrap_or_else(|| "inf".into());
        let _ = writeln!(
            out,
            "Class imbalance: {} {} ({:.1}%) vs {} {} ({:.1}%), ratio {ratio}",
            im.most_frequent,
            im.max_count,
            im.shares_pct[&im.most_frequent],
            im.least_frequent,
            im.min_count,
            im.shares_pct[&im.least_frequent],
        );
        let _ = writeln!(out, "Gaps (count <= {}):", self.gap_threshold);
        if self.gaps.is_empty() {
            let _ = writeln!(out, "  none");
        }
        for g in &self.gaps {
            let _ = writeln!(out, "  speaker {} {}: {}", g.speaker_id, g.emotion, g.count);
        }
        if let Some(checks) = &self.confidence_checks {
            let _ = writeln!(
                out,
                "Match vs confidence (flag: match < {FLAG_MAX_MATCH_PCT}% and confidence > {FLAG_MIN_CONFIDENCE}):"
            );
            for c in checks {
                let conf = c.avg_conf.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
                let flag = if c.flagged { "  FLAGGED confident but wrong" } else { "" };
                let _ = writeln!(
                    out,
                    "  {:<10} match {:>5.1}%  conf {conf}{flag}",
                    c.category.name(),
                    c.match_pct
                );
            }
        }
        out
    }
}
