//! Datasets shipped inside the crate as embedded JSON.
//!
//! * `appendix_b`: the 41 retained segments of the plenary speech
//!   with all five channels. Timestamps are a synthetic 4.5 s grid keyed on
//!   the segment number; the published table carries no times.
//! * `figure1_series`: the three plotted channels over the 51 segment
//!   indices. Pathos is absent at the ten filtered indices.
//! * `table6_counts`: EMO-DB utterance counts per speaker and emotion.
//!
//! Every loader re-checks the invariants of its bundle and reports the
//! first one that fails.

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::model::{CorpusEmotion, Gender, SegmentRecord, SpeakerEmotionMatrix};

const APPENDIX_B: &str = include_str!("../data/appendix_b.json");
const FIGURE1_SERIES: &str = include_str!("../data/figure1_series.json");
const TABLE6_COUNTS: &str = include_str!("../data/table6_counts.json");

pub const APPENDIX_B_ROWS: usize = 41;
pub const FIGURE1_LENGTH: usize = 51;
pub const TABLE6_GRAND_TOTAL: u64 = 535;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledName {
    AppendixB,
    Figure1Series,
    Table6Counts,
}

impl BundledName {
    pub fn name(self) -> &'static str {
        match self {
            BundledName::AppendixB => "appendix_b",
            BundledName::Figure1Series => "figure1_series",
            BundledName::Table6Counts => "table6_counts",
        }
    }
}

impl FromStr for BundledName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "appendix_b" => Ok(BundledName::AppendixB),
            "figure1_series" => Ok(BundledName::Figure1Series),
            "table6_counts" => Ok(BundledName::Table6Counts),
            _ => Err(Error::input(format!(
                "unknown bundled dataset {s:?}; expected appendix_b, figure1_series or table6_counts"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BundledDataset {
    AppendixB(Vec<SegmentRecord>),
    Figure1Series(Figure1Series),
    Table6Counts(SpeakerEmotionMatrix),
}

pub fn load_bundled_dataset(name: BundledName) -> Result<BundledDataset> {
    Ok(match name {
        BundledName::AppendixB => BundledDataset::AppendixB(appendix_b()?),
        BundledName::Figure1Series => BundledDataset::Figure1Series(figure1_series()?),
        BundledName::Table6Counts => BundledDataset::Table6Counts(table6_counts()?),
    })
}

pub fn appendix_b() -> Result<Vec<SegmentRecord>> {
    parse_appendix_b(APPENDIX_B)
}

pub fn figure1_series() -> Result<Figure1Series> {
    parse_figure1_series(FIGURE1_SERIES)
}

pub fn table6_counts() -> Result<SpeakerEmotionMatrix> {
    parse_table6_counts(TABLE6_COUNTS)
}

fn integrity(dataset: &str, invariant: impl Into<String>) -> Error {
    Error::Integrity {
        dataset: dataset.to_string(),
        invariant: invariant.into(),
    }
}

pub fn parse_appendix_b(text: &str) -> Result<Vec<SegmentRecord>> {
    const NAME: &str = "appendix_b";
    let records: Vec<SegmentRecord> =
        serde_json::from_str(text).map_err(|e| integrity(NAME, format!("records parse: {e}")))?;
    if records.len() != APPENDIX_B_ROWS {
        return Err(integrity(
            NAME,
            format!("expected {APPENDIX_B_ROWS} records, found {}", records.len()),
        ));
    }
    let mut seen = HashSet::new();
    for rec in &records {
        if !seen.insert(rec.segment_id.as_str()) {
            return Err(integrity(NAME, format!("duplicate segment_id {}", rec.segment_id)));
        }
        if !rec.relevant {
            return Err(integrity(NAME, format!("{} is marked irrelevant", rec.segment_id)));
        }
        for ch in Channel::ALL {
            if ch.value(rec).is_none() {
                return Err(integrity(NAME, format!("{} lacks channel {ch}", rec.segment_id)));
            }
        }
    }
    if records.windows(2).any(|w| w[0].start_s > w[1].start_s) {
        return Err(integrity(NAME, "records not ordered by start_s"));
    }
    Ok(records)
}

/// One plotted series: `(index, value)` points, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub channel: Channel,
    pub points: Vec<(usize, f64)>,
}

/// Aligned per-index series as plotted over the full speech.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Series {
    pub length: usize,
    pub series: Vec<Series>,
}

impl Figure1Series {
    pub fn channel(&self, channel: Channel) -> Option<&Series> {
        self.series.iter().find(|s| s.channel == channel)
    }

    pub fn channels(&self) -> Vec<Channel> {
        self.series.iter().map(|s| s.channel).collect()
    }

    /// Values by index, `None` where the series has no point.
    pub fn dense(&self, channel: Channel) -> Option<Vec<Option<f64>>> {
        let series = self.channel(channel)?;
        let mut out = vec![None; self.length];
        for &(i, v) in &series.points {
            out[i] = Some(v);
        }
        Some(out)
    }
}

const FIGURE1_EXPECTED: [(Channel, usize); 3] = [
    (Channel::GeminiValence, 51),
    (Channel::E2vArousal, 51),
    (Channel::Pathos, 46),
];

pub fn parse_figure1_series(text: &str) -> Result<Figure1Series> {
    const NAME: &str = "figure1_series";
    let fig: Figure1Series = serde_json::from_str(text).map_err(|e| integrity(NAME, format!("series parse: {e}")))?;
    if fig.length != FIGURE1_LENGTH {
        return Err(integrity(NAME, format!("length {} != {FIGURE1_LENGTH}", fig.length)));
    }
    for (channel, expected) in FIGURE1_EXPECTED {
        let s = fig
            .channel(channel)
            .ok_or_else(|| integrity(NAME, format!("missing series {channel}")))?;
        if s.points.len() != expected {
            return Err(integrity(
                NAME,
                format!("series {channel} has {} points, expected {expected}", s.points.len()),
            ));
        }
    }
    for s in &fig.series {
        if s.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(integrity(
                NAME,
                format!("series {} indices not strictly increasing", s.channel),
            ));
        }
        for &(i, v) in &s.points {
            if i >= fig.length {
                return Err(integrity(NAME, format!("series {} index {i} out of range", s.channel)));
            }
            let ok = if s.channel.is_discrete() {
                v.fract() == 0.0 && (-2.0..=2.0).contains(&v)
            } else {
                v.is_finite() && (-1.0..=1.0).contains(&v)
            };
            if !ok {
                return Err(integrity(
                    NAME,
                    format!("series {} value {v} at index {i} out of range", s.channel),
                ));
            }
        }
    }
    Ok(fig)
}

#[derive(Deserialize)]
struct Table6Doc {
    speakers: Vec<Table6Row>,
    category_totals: BTreeMap<CorpusEmotion, u64>,
    grand_total: u64,
}

#[derive(Deserialize)]
struct Table6Row {
    speaker_id: String,
    gender: Gender,
    counts: BTreeMap<CorpusEmotion, u64>,
    total: u64,
}

pub fn parse_table6_counts(text: &str) -> Result<SpeakerEmotionMatrix> {
    const NAME: &str = "table6_counts";
    let doc: Table6Doc = serde_json::from_str(text).map_err(|e| integrity(NAME, format!("matrix parse: {e}")))?;
    let mut matrix = SpeakerEmotionMatrix::new();
    for row in &doc.speakers {
        if matrix.row(&row.speaker_id).is_some() {
            return Err(integrity(NAME, format!("duplicate speaker {}", row.speaker_id)));
        }
        matrix.add_speaker(&row.speaker_id, row.gender);
        for emotion in CorpusEmotion::ALL {
            let n = *row
                .counts
                .get(&emotion)
                .ok_or_else(|| integrity(NAME, format!("speaker {} lacks {emotion}", row.speaker_id)))?;
            matrix.increment(&row.speaker_id, row.gender, emotion, n);
        }
        if matrix.row_total(&row.speaker_id) != row.total {
            return Err(integrity(
                NAME,
                format!(
                    "row sum for speaker {} is {}, Total column says {}",
                    row.speaker_id,
                    matrix.row_total(&row.speaker_id),
                    row.total
                ),
            ));
        }
    }
    for emotion in CorpusEmotion::ALL {
        let stated = doc.category_totals.get(&emotion).copied();
        if stated != Some(matrix.column_total(emotion)) {
            return Err(integrity(
                NAME,
                format!(
                    "column {emotion} sums to {}, stated {stated:?}",
                    matrix.column_total(emotion)
                ),
            ));
        }
    }
    if matrix.grand_total() != doc.grand_total || doc.grand_total != TABLE6_GRAND_TOTAL {
        return Err(integrity(
            NAME,
            format!("grand total {} (stated {})", matrix.grand_total(), doc.grand_total),
        ));
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn appendix_b_anchor_row() {
        let recs = appendix_b().unwrap();
        assert_eq!(recs.len(), 41);
        let s42 = recs.iter().find(|r| r.segment_id == "s0042").unwrap();
        assert_eq!(s42.pathos.unwrap().value(), 1);
        assert_eq!(s42.llm_annotation.as_ref().unwrap().valence, 0.40);
        assert!(recs.iter().all(|r| r.relevant && r.pathos.is_some()));
    }

    #[test]
    fn appendix_b_pathos_histogram() {
        let mut hist = BTreeMap::new();
        for r in appendix_b().unwrap() {
            *hist.entry(r.pathos.unwrap().value()).or_insert(0) += 1;
        }
        assert_eq!(hist, BTreeMap::from([(-2, 1), (-1, 18), (0, 21), (1, 1)]));
    }

    #[test]
    fn table6_anchor_cells() {
        let m = table6_counts().unwrap();
        assert_eq!(m.grand_total(), 535);
        assert_eq!(m.column_total(CorpusEmotion::Anger), 127);
        assert_eq!(m.row_total("16"), 71);
        assert_eq!(m.get("08", CorpusEmotion::Disgust), 0);
        assert_eq!(m.gender("13"), Some(Gender::M));
        assert_eq!(m.gender("03"), Some(Gender::F));
    }

    #[test]
    fn figure1_anchor_points() {
        let fig = figure1_series().unwrap();
        let gv = fig.dense(Channel::GeminiValence).unwrap();
        assert_eq!(gv[49], Some(0.6));
        let pathos = fig.dense(Channel::Pathos).unwrap();
        assert_eq!(pathos[42], Some(1.0));
        assert_eq!(pathos.iter().flatten().count(), 46);
        assert_eq!(fig.dense(Channel::E2vArousal).unwrap().len(), 51);
    }

    #[test]
    fn corrupted_bundles_name_the_invariant() {
        let short = APPENDIX_B.replacen("\"s0003\"", "\"s0004\"", 1);
        let err = parse_appendix_b(&short).unwrap_err();
        assert!(matches!(err, Error::Integrity { .. }));
        assert!(err.to_string().contains("duplicate segment_id s0004"), "{err}");

        let bad_total = TABLE6_COUNTS.replacen("\"total\": 71", "\"total\": 70", 1);
        let err = parse_table6_counts(&bad_total).unwrap_err();
        assert!(err.to_string().contains("speaker 16"), "{err}");

        let bad_fig = FIGURE1_SERIES.replacen("\"length\": 51", "\"length\": 50", 1);
        let err = parse_figure1_series(&bad_fig).unwrap_err();
        assert!(err.to_string().contains("length 50"), "{err}");
    }

    #[test]
    fn load_by_name() {
        for name in ["appendix_b", "figure1_series", "table6_counts"] {
            let n: BundledName = name.parse().unwrap();
            assert_eq!(n.name(), name);
            load_bundled_dataset(n).unwrap();
        }
        assert!("table7".parse::<BundledName>().is_err());
    }
}
