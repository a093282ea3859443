//! Shared domain types.
//!
//! Every type validates on construction and on deserialization, so a value
//! that exists is a value that satisfies its invariants.

use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Probability sums further than this from 1 are rejected outright.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

/// The eight classes emitted by the acoustic emotion model, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Angry,
    Disgusted,
    Fearful,
    Happy,
    Neutral,
    Other,
    Sad,
    Surprised,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 8] = [
        EmotionClass::Angry,
        EmotionClass::Disgusted,
        EmotionClass::Fearful,
        EmotionClass::Happy,
        EmotionClass::Neutral,
        EmotionClass::Other,
        EmotionClass::Sad,
        EmotionClass::Surprised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmotionClass::Angry => "angry",
            EmotionClass::Disgusted => "disgusted",
            EmotionClass::Fearful => "fearful",
            EmotionClass::Happy => "happy",
            EmotionClass::Neutral => "neutral",
            EmotionClass::Other => "other",
            EmotionClass::Sad => "sad",
            EmotionClass::Surprised => "surprised",
        }
    }

    /// Position in [`EmotionClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmotionClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::schema(format!("unknown emotion class {s:?}")))
    }
}

/// Map-shaped JSON object read entry by entry, so duplicate keys survive
/// deserialization and can be reported instead of silently overwritten.
#[derive(Debug, Clone)]
pub(crate) struct Entries<V>(pub Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor(PhantomData))
    }
}

/// Collects one value per [`EmotionClass`] from named entries.
pub(crate) fn class_array(entries: Vec<(String, f64)>, what: &str) -> Result<[f64; 8]> {
    let mut slots: [Option<f64>; 8] = [None; 8];
    for (name, value) in entries {
        let class: EmotionClass = name
            .parse()
            .map_err(|_| Error::schema(format!("{what}: unknown class {name:?}")))?;
        if slots[class.index()].replace(value).is_some() {
            return Err(Error::schema(format!("{what}: duplicate class {name:?}")));
        }
    }
    let mut out = [0.0; 8];
    for class in EmotionClass::ALL {
        out[class.index()] =
            slots[class.index()].ok_or_else(|| Error::schema(format!("{what}: missing class {:?}", class.name())))?;
    }
    Ok(out)
}

pub(crate) fn serialize_class_array<S: Serializer>(values: &[f64; 8], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(8))?;
    for class in EmotionClass::ALL {
        map.serialize_entry(class.name(), &values[class.index()])?;
    }
    map.end()
}

/// Distribution over the eight acoustic classes for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbabilities {
    probs: [f64; 8],
}

impl ClassProbabilities {
    /// Validates and, if the sum is within [`RENORMALIZE_TOLERANCE`] of one,
    /// renormalizes by division. Sums off by rounding noise only are kept as is.
    pub fn new(probs: [f64; 8]) -> Result<Self> {
        for (class, &p) in EmotionClass::ALL.iter().zip(probs.iter()) {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::schema(format!("probability for {class} is {p}, outside [0, 1]")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(Error::schema(format!(
                "probabilities sum to {sum}, more than {RENORMALIZE_TOLERANCE} away from 1"
            )));
        }
        let mut probs = probs;
        // below this the sum is float rounding noise and dividing would only add more
        if (sum - 1.0).abs() > 1e-12 {
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Ok(ClassProbabilities { probs })
    }

    pub fn one_hot(class: EmotionClass) -> Self {
        let mut probs = [0.0; 8];
        probs[class.index()] = 1.0;
        ClassProbabilities { probs }
    }

    pub fn from_pairs<I: IntoIterator<Item = (EmotionClass, f64)>>(pairs: I) -> Result<Self> {
        let entries = pairs.into_iter().map(|(c, p)| (c.name().to_string(), p)).collect();
        Self::new(class_array(entries, "class probabilities")?)
    }

    pub fn get(&self, class: EmotionClass) -> f64 {
        self.probs[class.index()]
    }

    pub fn as_array(&self) -> &[f64; 8] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionClass, f64)> + '_ {
        EmotionClass::ALL.into_iter().map(|c| (c, self.probs[c.index()]))
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::input(format!("mixture weight {alpha} outside [0, 1]")));
        }
        let mut probs = [0.0; 8];
        for (i, p) in probs.iter_mut().enumerate() {
            *p = alpha * self.probs[i] + (1.0 - alpha) * other.probs[i];
        }
        Self::new(probs)
    }
}

impl Serialize for ClassProbabilities {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_class_array(&self.probs, s)
    }
}

impl<'de> Deserialize<'de> for ClassProbabilities {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let Entries(entries) = Entries::<f64>::deserialize(d)?;
        class_array(entries, "class probabilities")
            .and_then(ClassProbabilities::new)
            .map_err(de::Error::custom)
    }
}

fn check_unit_interval(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::schema(format!("{name} = {value} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Continuous arousal/valence pair in `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct CircumplexPoint {
    pub arousal: f64,
    pub valence: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    arousal: f64,
    valence: f64,
}

impl TryFrom<RawPoint> for CircumplexPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        CircumplexPoint::new(raw.arousal, raw.valence)
    }
}

impl CircumplexPoint {
    pub fn new(arousal: f64, valence: f64) -> Result<Self> {
        check_unit_interval("arousal", arousal, -1.0, 1.0)?;
        check_unit_interval("valence", valence, -1.0, 1.0)?;
        Ok(CircumplexPoint { arousal, valence })
    }
}

/// Five-level integer Pathos score, -2 (divisive) to +2 (unifying).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i8")]
pub struct PathosScore(i8);

impl PathosScore {
    pub const MIN: PathosScore = PathosScore(-2);
    pub const MAX: PathosScore = PathosScore(2);

    pub fn new(value: i64) -> Result<Self> {
        if (-2..=2).contains(&value) {
            Ok(PathosScore(value as i8))
        } else {
            Err(Error::schema(format!(
                "pathos score {value} not in {{-2, -1, 0, 1, 2}}"
            )))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }
}

impl TryFrom<i64> for PathosScore {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        PathosScore::new(v)
    }
}

impl From<PathosScore> for i8 {
    fn from(p: PathosScore) -> i8 {
        p.0
    }
}

impl From<PathosScore> for f64 {
    fn from(p: PathosScore) -> f64 {
        p.0 as f64
    }
}

impl fmt::Display for PathosScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// One open-ended LLM annotation of a segment.
///
/// `confidence` is optional because published segment tables omit it; when
/// present it must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotation")]
pub struct SegmentAnnotation {
    pub primary_emotion: String,
    pub secondary_emotion: Option<String>,
    pub arousal: f64,
    pub valence: f64,
    pub rhetorical_function: String,
    pub confidence: Option<f64>,
}

#[derive(Deserialize)]
pub(crate) struct RawAnnotation {
    primary_emotion: String,
    #[serde(default)]
    secondary_emotion: Option<String>,
    arousal: f64,
    valence: f64,
    #[serde(default)]
    rhetorical_function: String,
    #[serde(default)]
    confidence: Option<f64>,
}

impl TryFrom<RawAnnotation> for SegmentAnnotation {
    type Error = Error;

    fn try_from(raw: RawAnnotation) -> Result<Self> {
        let ann = SegmentAnnotation {
            primary_emotion: raw.primary_emotion,
            secondary_emotion: raw.secondary_emotion,
            arousal: raw.arousal,
            valence: raw.valence,
            rhetorical_function: raw.rhetorical_function,
            confidence: raw.confidence,
        };
        ann.validate()?;
        Ok(ann)
    }
}

impl SegmentAnnotation {
    pub fn validate(&self) -> Result<()> {
        if self.primary_emotion.trim().is_empty() {
            return Err(Error::schema("primary_emotion is empty"));
        }
        check_unit_interval("arousal", self.arousal, -1.0, 1.0)?;
        check_unit_interval("valence", self.valence, -1.0, 1.0)?;
        if let Some(c) = self.confidence {
            check_unit_interval("confidence", c, 0.0, 1.0)?;
        }
        Ok(())
    }

    pub fn point(&self) -> CircumplexPoint {
        CircumplexPoint {
            arousal: self.arousal,
            valence: self.valence,
        }
    }
}

/// One utterance with every per-modality measurement that is available for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct SegmentRecord {
    pub segment_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub transcript: String,
    pub e2v_probs: Option<ClassProbabilities>,
    pub e2v_point: Option<CircumplexPoint>,
    pub llm_annotation: Option<SegmentAnnotation>,
    pub pathos: Option<PathosScore>,
    pub relevant: bool,
}

#[derive(Deserialize)]
struct RawRecord {
    segment_id: String,
    start_s: f64,
    end_s: f64,
    #[serde(default)]
    transcript: String,
    #[serde(default)]
    e2v_probs: Option<ClassProbabilities>,
    #[serde(default)]
    e2v_point: Option<CircumplexPoint>,
    #[serde(default)]
    llm_annotation: Option<SegmentAnnotation>,
    #[serde(default)]
    pathos: Option<PathosScore>,
    #[serde(default = "default_relevant")]
    relevant: bool,
}

fn default_relevant() -> bool {
    true
}

impl TryFrom<RawRecord> for SegmentRecord {
    type Error = Error;

    fn try_from(raw: RawRecord) -> Result<Self> {
        let rec = SegmentRecord {
            segment_id: raw.segment_id,
            start_s: raw.start_s,
            end_s: raw.end_s,
            transcript: raw.transcript,
            e2v_probs: raw.e2v_probs,
            e2v_point: raw.e2v_point,
            llm_annotation: raw.llm_annotation,
            pathos: raw.pathos,
            relevant: raw.relevant,
        };
        rec.validate()?;
        Ok(rec)
    }
}

impl SegmentRecord {
    /// A bare segment with no measurements attached.
    pub fn new(segment_id: impl Into<String>, start_s: f64, end_s: f64, transcript: impl Into<String>) -> Result<Self> {
        let rec = SegmentRecord {
            segment_id: segment_id.into(),
            start_s,
            end_s,
            transcript: transcript.into(),
            e2v_probs: None,
            e2v_point: None,
            llm_annotation: None,
            pathos: None,
            relevant: true,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_id.is_empty() {
            return Err(Error::schema("segment_id is empty"));
        }
        if !(self.start_s.is_finite() && self.end_s.is_finite()) || self.start_s < 0.0 || self.end_s <= self.start_s {
            return Err(Error::schema(format!(
                "segment {}: need end_s > start_s >= 0, got [{}, {}]",
                self.segment_id, self.start_s, self.end_s
            )));
        }
        if !self.relevant && self.pathos.is_some() {
            return Err(Error::schema(format!(
                "segment {}: excluded by relevance filter but carries a pathos score",
                self.segment_id
            )));
        }
        if let Some(a) = &self.llm_annotation {
            a.validate()
                .map_err(|e| Error::schema(format!("segment {}: {e}", self.segment_id)))?;
        }
        Ok(())
    }
}

/// Emotion categories of acted-speech corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorpusEmotion {
    Anger,
    Boredom,
    Disgust,
    Fear,
    Happiness,
    Neutral,
    Sadness,
}

impl CorpusEmotion {
    pub const ALL: [CorpusEmotion; 7] = [
        CorpusEmotion::Anger,
        CorpusEmotion::Boredom,
        CorpusEmotion::Disgust,
        CorpusEmotion::Fear,
        CorpusEmotion::Happiness,
        CorpusEmotion::Neutral,
        CorpusEmotion::Sadness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorpusEmotion::Anger => "Anger",
            CorpusEmotion::Boredom => "Boredom",
            CorpusEmotion::Disgust => "Disgust",
            CorpusEmotion::Fear => "Fear",
            CorpusEmotion::Happiness => "Happiness",
            CorpusEmotion::Neutral => "Neutral",
            CorpusEmotion::Sadness => "Sadness",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CorpusEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorpusEmotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorpusEmotion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::schema(format!("unknown corpus emotion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

/// Utterance counts per speaker and corpus emotion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpeakerEmotionMatrix {
    counts: BTreeMap<String, [u64; 7]>,
    speaker_gender: BTreeMap<String, Gender>,
}

impl SpeakerEmotionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a speaker with an all-zero row.
    pub fn add_speaker(&mut self, speaker_id: &str, gender: Gender) {
        self.counts.entry(speaker_id.to_string()).or_insert([0; 7]);
        self.speaker_gender.insert(speaker_id.to_string(), gender);
    }

    pub fn increment(&mut self, speaker_id: &str, gender: Gender, emotion: CorpusEmotion, by: u64) {
        self.add_speaker(speaker_id, gender);
        if let Some(row) = self.counts.get_mut(speaker_id) {
            row[emotion.index()] += by;
        }
    }

    pub fn get(&self, speaker_id: &str, emotion: CorpusEmotion) -> u64 {
        self.counts.get(speaker_id).map_or(0, |row| row[emotion.index()])
    }

    pub fn gender(&self, speaker_id: &str) -> Option<Gender> {
        self.speaker_gender.get(speaker_id).copied()
    }

    /// Speakers in ascending id order.
    pub fn speakers(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn row(&self, speaker_id: &str) -> Option<&[u64; 7]> {
        self.counts.get(speaker_id)
    }

    pub fn row_total(&self, speaker_id: &str) -> u64 {
        self.counts.get(speaker_id).map_or(0, |row| row.iter().sum())
    }

    pub fn column_total(&self, emotion: CorpusEmotion) -> u64 {
        self.counts.values().map(|row| row[emotion.index()]).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.values().flat_map(|row| row.iter()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Adds every cell of `other` into `self`.
    pub fn merge(&mut self, other: &SpeakerEmotionMatrix) {
        for (speaker, row) in &other.counts {
            let gender = other.speaker_gender[speaker];
            for emotion in CorpusEmotion::ALL {
                self.increment(speaker, gender, emotion, row[emotion.index()]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MatrixRow {
    pub speaker_id: String,
    pub gender: Gender,
    pub counts: BTreeMap<CorpusEmotion, u64>,
    pub total: u64,
}

impl SpeakerEmotionMatrix {
    pub(crate) fn to_rows(&self) -> Vec<MatrixRow> {
        self.counts
            .iter()
            .map(|(speaker, row)| MatrixRow {
                speaker_id: speaker.clone(),
                gender: self.speaker_gender[speaker],
                counts: CorpusEmotion::ALL.iter().map(|&e| (e, row[e.index()])).collect(),
                total: row.iter().sum(),
            })
            .collect()
    }
}

impl Serialize for SpeakerEmotionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}
