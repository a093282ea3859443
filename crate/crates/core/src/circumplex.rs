//! Projection of discrete class probabilities onto the arousal/valence plane.
//!
//! Each class carries one arousal and one valence weight; a segment's point
//! is the probability-weighted sum of those weights. Weights are data: the
//! default table is embedded, and any JSON file with the same shape can
//! replace it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::model::{class_array, serialize_class_array, CircumplexPoint, ClassProbabilities, EmotionClass, Entries};

const DEFAULT_WEIGHTS: &str = include_str!("../data/weights.json");

/// Per-class arousal and valence weights, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTable {
    arousal_w: [f64; 8],
    valence_w: [f64; 8],
}

impl WeightTable {
    pub fn new(arousal_w: [f64; 8], valence_w: [f64; 8]) -> Result<Self> {
        for (axis, weights) in [("arousal", &arousal_w), ("valence", &valence_w)] {
            for class in EmotionClass::ALL {
                let w = weights[class.index()];
                if !w.is_finite() || !(-1.0..=1.0).contains(&w) {
                    return Err(Error::schema(format!(
                        "{axis} weight for {class} is {w}, outside [-1, 1]"
                    )));
                }
            }
        }
        Ok(WeightTable { arousal_w, valence_w })
    }

    pub fn arousal(&self, class: EmotionClass) -> f64 {
        self.arousal_w[class.index()]
    }

    pub fn valence(&self, class: EmotionClass) -> f64 {
        self.valence_w[class.index()]
    }

    /// Parses the `weights.json` layout: `{"arousal": {...}, "valence": {...}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightsDoc = serde_json::from_str(text).map_err(|e| Error::schema(format!("weights: {e}")))?;
        let arousal = class_array(doc.arousal.0, "arousal weights")?;
        let valence = class_array(doc.valence.0, "valence weights")?;
        Self::new(arousal, valence)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&WeightsOut {
            arousal: &self.arousal_w,
            valence: &self.valence_w,
        })
        .expect("weight table serializes")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsDoc {
    arousal: Entries<f64>,
    valence: Entries<f64>,
}

#[derive(Serialize)]
struct WeightsOut<'a> {
    #[serde(serialize_with = "serialize_class_array")]
    arousal: &'a [f64; 8],
    #[serde(serialize_with = "serialize_class_array")]
    valence: &'a [f64; 8],
}

/// The embedded Russell/Warriner-derived weights.
pub fn default_weight_table() -> WeightTable {
    WeightTable::from_json(DEFAULT_WEIGHTS).expect("embedded weight table is valid")
}

pub fn load_weight_table(path: impl AsRef<Path>) -> Result<WeightTable> {
    WeightTable::from_json(&read_file(path)?)
}

/// Weighted sums of the class weights. No clamping is applied; validated
/// weights keep the result inside `[-1, 1]`.
pub fn project(probs: &ClassProbabilities, weights: &WeightTable) -> CircumplexPoint {
    let mut arousal = 0.0;
    let mut valence = 0.0;
    for (class, p) in probs.iter() {
        arousal += p * weights.arousal(class);
        valence += p * weights.valence(class);
    }
    CircumplexPoint { arousal, valence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionClass::*;

    #[test]
    fn default_table_values() {
        let w = default_weight_table();
        assert_eq!(w.arousal(Fearful), 0.80);
        assert_eq!(w.valence(Sad), -0.85);
        assert_eq!(w.valence(Neutral), 0.0);
        assert_eq!(w.arousal(Other), 0.10);
        assert_eq!(w.arousal(Sad), -0.30);
    }

    #[test]
    fn one_hot_happy_and_neutral() {
        let w = default_weight_table();
        let p = project(&ClassProbabilities::one_hot(Happy), &w);
        assert_eq!((p.arousal, p.valence), (0.65, 0.90));
        let p = project(&ClassProbabilities::one_hot(Neutral), &w);
        assert_eq!((p.arousal, p.valence), (0.0, 0.0));
    }

    #[test]
    fn half_angry_half_happy() {
        // 0.5 * (0.75, -0.75) + 0.5 * (0.65, 0.90) = (0.70, 0.075)
        let probs = ClassProbabilities::from_pairs([
            (Angry, 0.5),
            (Disgusted, 0.0),
            (Fearful, 0.0),
            (Happy, 0.5),
            (Neutral, 0.0),
            (Other, 0.0),
            (Sad, 0.0),
            (Surprised, 0.0),
        ])
        .unwrap();
        let p = project(&probs, &default_weight_table());
        assert!((p.arousal - 0.70).abs() < 1e-15);
        assert!((p.valence - 0.075).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let w = default_weight_table();
        assert_eq!(WeightTable::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn all_zero_table_projects_to_origin() {
        let text = r#"{"arousal":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0},
                       "valence":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0}}"#;
        let w = WeightTable::from_json(text).unwrap();
        let probs = ClassProbabilities::new([0.1, 0.2, 0.05, 0.15, 0.2, 0.1, 0.1, 0.1]).unwrap();
        let p = project(&probs, &w);
        assert_eq!((p.arousal, p.valence), (0.0, 0.0));
    }

    #[test]
    fn schema_errors_name_the_class() {
        let missing = r#"{"arousal":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0},
                          "valence":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0}}"#;
        let err = WeightTable::from_json(missing).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(err.to_string().contains("surprised"), "{err}");

        let dup = r#"{"arousal":{"angry":0,"angry":0.1,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0},
                      "valence":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0}}"#;
        let err = WeightTable::from_json(dup).unwrap_err();
        assert!(err.to_string().contains("duplicate class \"angry\""), "{err}");

        let range = r#"{"arousal":{"angry":1.2,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0},
                        "valence":{"angry":0,"disgusted":0,"fearful":0,"happy":0,"neutral":0,"other":0,"sad":0,"surprised":0}}"#;
        let err = WeightTable::from_json(range).unwrap_err();
        assert!(err.to_string().contains("angry"), "{err}");
    }
}
