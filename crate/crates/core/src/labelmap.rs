//! Semantic mapping of open-ended emotion labels onto corpus categories and
//! match-rate reporting.
//!
//! Only the primary label of an annotation is matched. Labels missing from
//! the mapping are counted as non-matches and also tallied in
//! [`MatchReport::unmatched_labels`] so vocabulary drift stays visible.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::model::{CorpusEmotion, Entries, SegmentAnnotation};

const DEFAULT_MAPPING: &str = include_str!("../data/mapping.json");

/// Case-folds and trims; diacritics are kept as written.
pub fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MappingTable {
    entries: BTreeMap<String, CorpusEmotion>,
}

impl MappingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mapping; fails if the normalized key is already present.
    pub fn insert(&mut self, label: &str, category: CorpusEmotion) -> Result<()> {
        let key = normalize_label(label);
        if key.is_empty() {
            return Err(Error::schema("mapping: empty label"));
        }
        if self.entries.contains_key(&key) {
            return Err(Error::schema(format!(
                "mapping: duplicate label {key:?} after normalization"
            )));
        }
        self.entries.insert(key, category);
        Ok(())
    }

    /// Parses the flat `{"label": "Category", ...}` layout.
    pub fn from_json(text: &str) -> Result<Self> {
        let Entries(entries) =
            serde_json::from_str::<Entries<String>>(text).map_err(|e| Error::schema(format!("mapping: {e}")))?;
        let mut table = MappingTable::new();
        for (label, category) in entries {
            let category: CorpusEmotion = category.parse().map_err(|_| {
                Error::schema(format!(
                    "mapping: label {label:?} targets unknown category {category:?}"
                ))
            })?;
            table.insert(&label, category)?;
        }
        Ok(table)
    }

    pub fn get(&self, label: &str) -> Option<CorpusEmotion> {
        self.entries.get(&normalize_label(label)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

pub fn default_mapping() -> MappingTable {
    MappingTable::from_json(DEFAULT_MAPPING).expect("embedded mapping is valid")
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<MappingTable> {
    MappingTable::from_json(&read_file(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Canonical {
    Matched(CorpusEmotion),
    Unmatched,
}

pub fn canonicalize(label: &str, table: &MappingTable) -> Canonical {
    match table.get(label) {
        Some(c) => Canonical::Matched(c),
        None => Canonical::Unmatched,
    }
}

/// Ground truth paired with one annotation, as stored in match-rate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub utterance_id: String,
    pub ground_truth: CorpusEmotion,
    pub annotation: SegmentAnnotation,
}

pub fn load_match_records(path: impl AsRef<Path>) -> Result<Vec<MatchRecord>> {
    let path = path.as_ref();
    serde_json::from_str(&read_file(path)?).map_err(|e| Error::schema(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryMatch {
    pub n: usize,
    pub matched: usize,
    /// Records whose primary label had no mapping at all.
    pub unmatched: usize,
    pub match_pct: f64,
    /// Mean over records that carry a confidence; `None` if none do.
    pub avg_conf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub per_category: BTreeMap<CorpusEmotion, CategoryMatch>,
    pub total_n: usize,
    pub total_matched: usize,
    /// Micro-average: matched records over all records.
    pub total_match_pct: f64,
    pub total_avg_conf: Option<f64>,
    pub unmatched_labels: BTreeMap<String, usize>,
}

/// Order-independent mean: values are sorted before summation.
fn stable_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn pct(matched: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * matched as f64 / n as f64
    }
}

pub fn match_report(records: &[(CorpusEmotion, SegmentAnnotation)], table: &MappingTable) -> Result<MatchReport> {
    if records.is_empty() {
        return Err(Error::input("match_report: no records"));
    }
    struct Acc {
        n: usize,
        matched: usize,
        unmatched: usize,
        conf: Vec<f64>,
    }
    let mut acc: BTreeMap<CorpusEmotion, Acc> = BTreeMap::new();
    let mut unmatched_labels = BTreeMap::new();
    for (gt, ann) in records {
        let a = acc.entry(*gt).or_insert(Acc {
            n: 0,
            matched: 0,
            unmatched: 0,
            conf: Vec::new(),
        });
        a.n += 1;
        match canonicalize(&ann.primary_emotion, table) {
            Canonical::Matched(c) if c == *gt => a.matched += 1,
            Canonical::Matched(_) => {}
            Canonical::Unmatched => {
                a.unmatched += 1;
                *unmatched_labels
                    .entry(normalize_label(&ann.primary_emotion))
                    .or_insert(0) += 1;
            }
        }
        if let Some(c) = ann.confidence {
            a.conf.push(c);
        }
    }
    for (label, count) in &unmatched_labels {
        log::warn!("W002 unmatched_label label={label:?} count={count}");
    }

    let all_conf: Vec<f64> = acc.values().flat_map(|a| a.conf.iter().copied()).collect();
    let total_n: usize = acc.values().map(|a| a.n).sum();
    let total_matched: usize = acc.values().map(|a| a.matched).sum();
    let per_category = acc
        .into_iter()
        .map(|(cat, a)| {
            (
                cat,
                CategoryMatch {
                    n: a.n,
                    matched: a.matched,
                    unmatched: a.unmatched,
                    match_pct: pct(a.matched, a.n),
                    avg_conf: stable_mean(a.conf),
                },
            )
        })
        .collect();
    Ok(MatchReport {
        per_category,
        total_n,
        total_matched,
        total_match_pct: pct(total_matched, total_n),
        total_avg_conf: stable_mean(all_conf),
        unmatched_labels,
    })
}

impl MatchReport {
    /// Mean of per-category percentages, for contrast with the micro-average.
    pub fn macro_match_pct(&self) -> f64 {
        let n = self.per_category.len() as f64;
        self.per_category.values().map(|c| c.match_pct).sum::<f64>() / n
    }

    /// `category,n,match_pct,avg_conf`, one row per category then `Total`.
    pub fn to_csv(&self) -> String {
        fn conf(c: Option<f64>) -> String {
            c.map(|v| format!("{v:.4}")).unwrap_or_default()
        }
        let mut out = String::from("category,n,match_pct,avg_conf\n");
        for (cat, c) in &self.per_category {
            let _ = writeln!(out, "{cat},{},{:.4},{}", c.n, c.match_pct, conf(c.avg_conf));
        }
        let _ = writeln!(
            out,
            "Total,{},{:.4},{}",
            self.total_n,
            self.total_match_pct,
            conf(self.total_avg_conf)
        );
        out
    }
}
