use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SegmentRecord;

/// A scalar measurement channel of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    GeminiArousal,
    GeminiValence,
    E2vArousal,
    E2vValence,
    Pathos,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::GeminiArousal,
        Channel::GeminiValence,
        Channel::E2vArousal,
        Channel::E2vValence,
        Channel::Pathos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::GeminiArousal => "gemini_arousal",
            Channel::GeminiValence => "gemini_valence",
            Channel::E2vArousal => "e2v_arousal",
            Channel::E2vValence => "e2v_valence",
            Channel::Pathos => "pathos",
        }
    }

    /// Human-readable legend label.
    pub fn label(self) -> &'static str {
        match self {
            Channel::GeminiArousal => "Gemini Arousal",
            Channel::GeminiValence => "Gemini Valence",
            Channel::E2vArousal => "e2v Arousal",
            Channel::E2vValence => "e2v Valence",
            Channel::Pathos => "TRUST Pathos",
        }
    }

    /// Pathos is an ordinal score; the others are continuous.
    pub fn is_discrete(self) -> bool {
        self == Channel::Pathos
    }

    pub fn value(self, rec: &SegmentRecord) -> Option<f64> {
        match self {
            Channel::GeminiArousal => rec.llm_annotation.as_ref().map(|a| a.arousal),
            Channel::GeminiValence => rec.llm_annotation.as_ref().map(|a| a.valence),
            Channel::E2vArousal => rec.e2v_point.map(|p| p.arousal),
            Channel::E2vValence => rec.e2v_point.map(|p| p.valence),
            Channel::Pathos => rec.pathos.map(f64::from),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let known: Vec<_> = Channel::ALL.iter().map(|c| c.name()).collect();
            Error::input(format!("unknown channel {s:?}; expected one of {}", known.join(", ")))
        })
    }
}
