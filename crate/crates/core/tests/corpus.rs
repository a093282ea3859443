use std::path::PathBuf;

use pathoscope::bundled;
use pathoscope::emodb::{
    audit_report, build_matrix, default_convention, detect_gaps, parse_filename, parse_manifest, FilenameConvention,
};
use pathoscope::error::Error;
use pathoscope::exec::ExecMode;
use pathoscope::labelmap::{canonicalize, default_mapping, load_match_records, match_report, Canonical, MappingTable};
use pathoscope::model::{CorpusEmotion, Gender, SpeakerEmotionMatrix};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn manifest_matrix() -> SpeakerEmotionMatrix {
    let text = std::fs::read_to_string(fixture("emodb_manifest.txt")).unwrap();
    build_matrix(&parse_manifest(&text, &default_convention(), ExecMode::Parallel).unwrap())
}

fn fixture_report() -> pathoscope::labelmap::MatchReport {
    let recs = load_match_records(fixture("match_fixture.json")).unwrap();
    let pairs: Vec<_> = recs.into_iter().map(|r| (r.ground_truth, r.annotation)).collect();
    match_report(&pairs, &default_mapping()).unwrap()
}

#[test]
fn manifest_and_bundled_counts_agree() {
    assert_eq!(manifest_matrix(), bundled::table6_counts().unwrap());
}

#[test]
fn column_and_row_totals() {
    let m = manifest_matrix();
    let cols: Vec<u64> = CorpusEmotion::ALL.iter().map(|&e| m.column_total(e)).collect();
    assert_eq!(cols, [127, 81, 46, 69, 71, 79, 62]);
    assert_eq!(m.row_total("14"), 69);
    assert_eq!(m.gender("13"), Some(Gender::M));
}

#[test]
fn threshold_one_reports_the_single_fear_utterance() {
    let gaps = detect_gaps(&manifest_matrix(), 1);
    assert!(gaps
        .iter()
        .any(|g| g.speaker_id == "09" && g.emotion == CorpusEmotion::Fear && g.count == 1));
    assert_eq!(gaps[0].count, 0);
}

#[test]
fn synthetic_convention_extracts_spans() {
    let conv = FilenameConvention::from_json(
        r#"{"name": "toy", "speaker_span": [0, 2], "text_span": [2, 5], "emotion_code_span": [5, 6],
            "code_table": {"X": "Anger"}, "gender_table": {"03": "F"}}"#,
    )
    .unwrap();
    let m = parse_filename("03a01Xa.wav", &conv).unwrap();
    assert_eq!(
        (m.speaker_id.as_str(), m.text_code.as_str(), m.emotion, m.gender),
        ("03", "a01", CorpusEmotion::Anger, Gender::F)
    );

    for (name, field) in [
        ("03a0", "stem"),
        ("03a01Qa.wav", "emotion_code"),
        ("99a01Xa.wav", "speaker_id"),
    ] {
        match parse_filename(name, &conv) {
            Err(Error::Filename { field: f, .. }) => assert_eq!(f, field, "{name}"),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn overlapping_spans_are_rejected() {
    let err = FilenameConvention::from_json(
        r#"{"speaker_span": [0, 2], "text_span": [1, 5], "emotion_code_span": [5, 6],
            "code_table": {"X": "Anger"}, "gender_table": {"03": "F"}}"#,
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn audit_flags_confident_but_wrong_categories() {
    let report = audit_report(&manifest_matrix(), Some(&fixture_report()), "emodb-standard", 0).unwrap();
    let flagged: Vec<CorpusEmotion> = report.flagged().map(|c| c.category).collect();
    assert_eq!(flagged, [CorpusEmotion::Boredom, CorpusEmotion::Disgust]);
    assert_eq!(report.imbalance.max_count, 127);
    assert_eq!(report.imbalance.min_count, 46);
    assert!((report.imbalance.ratio.unwrap() - 127.0 / 46.0).abs() < 1e-12);

    let doc: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(doc["convention"], "emodb-standard");
    assert_eq!(doc["total_utterances"], 535);
    assert_eq!(doc["matrix"].as_array().unwrap().len(), 10);
    assert_eq!(
        report.to_json(),
        audit_report(&manifest_matrix(), Some(&fixture_report()), "emodb-standard", 0)
            .unwrap()
            .to_json()
    );
}

#[test]
fn empty_matrix_cannot_be_audited() {
    assert!(audit_report(&SpeakerEmotionMatrix::new(), None, "x", 0).is_err());
}

#[test]
fn published_mapping_examples() {
    let t = default_mapping();
    assert_eq!(
        canonicalize("Sachlichkeit", &t),
        Canonical::Matched(CorpusEmotion::Neutral)
    );
    assert_eq!(
        canonicalize("  VERÄRGERUNG ", &t),
        Canonical::Matched(CorpusEmotion::Anger)
    );
    assert_eq!(canonicalize("Zeitgeist", &MappingTable::new()), Canonical::Unmatched);
}

#[test]
fn default_mapping_covers_every_bundled_label() {
    let t = default_mapping();
    let mut labels: Vec<String> = bundled::appendix_b()
        .unwrap()
        .into_iter()
        .filter_map(|r| r.llm_annotation.map(|a| a.primary_emotion))
        .collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 14);
    for l in labels {
        assert_ne!(canonicalize(&l, &t), Canonical::Unmatched, "{l}");
    }
}

#[test]
fn mapping_files_are_validated() {
    let t = MappingTable::from_json(r#"{"sachlichkeit": "Neutral"}"#).unwrap();
    assert_eq!(
        canonicalize("Sachlichkeit", &t),
        Canonical::Matched(CorpusEmotion::Neutral)
    );
    assert!(matches!(
        MappingTable::from_json(r#"{"jubel": "Ecstasy"}"#),
        Err(Error::Schema(_))
    ));
    assert!(matches!(
        MappingTable::from_json(r#"{"Wut": "Anger", "wut": "Anger"}"#),
        Err(Error::Schema(_))
    ));
}

#[test]
fn report_totals_are_micro_averaged() {
    let r = fixture_report();
    let n: usize = r.per_category.values().map(|c| c.n).sum();
    let matched: usize = r.per_category.values().map(|c| c.matched).sum();
    assert_eq!((n, matched), (535, 161));
    assert_eq!(r.total_match_pct, 100.0 * 161.0 / 535.0);
    assert!((r.macro_match_pct() - r.total_match_pct).abs() > 0.1);
    assert!(r.to_csv().starts_with("category,n,match_pct,avg_conf\n"));
}
