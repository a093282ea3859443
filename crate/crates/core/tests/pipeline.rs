use std::collections::BTreeMap;
use std::path::PathBuf;

use pathoscope::bundled;
use pathoscope::channel::Channel;
use pathoscope::circumplex::default_weight_table;
use pathoscope::error::Error;
use pathoscope::exec::ExecMode;
use pathoscope::model::{EmotionClass, SegmentRecord};
use pathoscope::pipeline::{
    apply_relevance_filter, correlation_suite, descriptive_suite, descriptives_csv, ingest, ingest_sources,
    parse_e2v_probs, rhetoric_csv, rhetoric_distribution, AnalysisTable, IngestSources, COMPARISONS,
};
use pathoscope::rankstats::{average_ranks, pairwise_complete, spearman, spearman_with, PValueMethod};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// The bundled rows split back into the four input documents.
fn split_bundle() -> (Vec<Value>, Value, Value) {
    let rows = bundled::appendix_b().unwrap();
    let segments = rows
        .iter()
        .map(|r| {
            json!({
                "segment_id": r.segment_id, "start_s": r.start_s, "end_s": r.end_s,
                "transcript": r.transcript, "e2v_point": r.e2v_point,
            })
        })
        .collect();
    let trust: BTreeMap<_, _> = rows
        .iter()
        .map(|r| {
            (
                r.segment_id.clone(),
                json!({"pathos": r.pathos, "relevant": r.relevant}),
            )
        })
        .collect();
    let llm = serde_json::from_str(&read("plenary_annotations.json")).unwrap();
    (segments, llm, json!(trust))
}

fn sources(segments: &[Value], llm: &Value, trust: &Value) -> IngestSources {
    IngestSources {
        segments: serde_json::to_string(segments).unwrap(),
        e2v_probs: None,
        llm_annotations: Some(llm.to_string()),
        trust_scores: Some(trust.to_string()),
    }
}

#[test]
fn split_inputs_rejoin_to_the_bundle() {
    let (segments, llm, trust) = split_bundle();
    let joined = ingest_sources(&sources(&segments, &llm, &trust), &default_weight_table()).unwrap();
    let bundle = AnalysisTable::new(bundled::appendix_b().unwrap()).unwrap();
    assert_eq!(joined.len(), 41);
    assert_eq!(joined.rows(), bundle.rows());
}

#[test]
fn suite_is_invariant_to_input_row_order() {
    let (mut segments, llm, trust) = split_bundle();
    let w = default_weight_table();
    let reference = correlation_suite(
        &apply_relevance_filter(&ingest_sources(&sources(&segments, &llm, &trust), &w).unwrap()),
        PValueMethod::TApprox,
    )
    .to_csv();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        segments.shuffle(&mut rng);
        let mut ann: Vec<(String, Value)> = llm["annotations"].as_object().unwrap().clone().into_iter().collect();
        ann.shuffle(&mut rng);
        let llm_shuffled = json!({"annotations": serde_json::Map::from_iter(ann)});
        let t = apply_relevance_filter(&ingest_sources(&sources(&segments, &llm_shuffled, &trust), &w).unwrap());
        assert_eq!(correlation_suite(&t, PValueMethod::TApprox).to_csv(), reference);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = || {
        let t = apply_relevance_filter(&AnalysisTable::new(bundled::appendix_b().unwrap()).unwrap());
        (
            correlation_suite(&t, PValueMethod::permutation(9)).to_csv(),
            descriptives_csv(&descriptive_suite(&t)),
            rhetoric_csv(&rhetoric_distribution(&t)),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn permutation_p_is_independent_of_execution_mode() {
    let t = AnalysisTable::new(bundled::appendix_b().unwrap()).unwrap();
    for (_, x, y) in COMPARISONS {
        let (xs, ys) = pairwise_complete(&t.column(x), &t.column(y)).unwrap();
        let m = PValueMethod::permutation(42);
        let seq = spearman_with(&xs, &ys, m, ExecMode::Sequential).unwrap();
        let par = spearman_with(&xs, &ys, m, ExecMode::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}

#[test]
fn pre_ranked_series_give_the_same_rho() {
    let t = AnalysisTable::new(bundled::appendix_b().unwrap()).unwrap();
    let suite = correlation_suite(&t, PValueMethod::TApprox);
    for c in &suite.comparisons {
        let (xs, ys) = pairwise_complete(&t.column(c.x), &t.column(c.y)).unwrap();
        let ranked = spearman(
            &average_ranks(&xs).unwrap(),
            &average_ranks(&ys).unwrap(),
            PValueMethod::TApprox,
        )
        .unwrap();
        assert!((ranked.rho - c.result().unwrap().rho).abs() < 1e-12, "{}", c.name);
    }
}

#[test]
fn valence_copied_from_pathos_gives_rho_one() {
    let mut rows = bundled::appendix_b().unwrap();
    for r in &mut rows {
        let p = f64::from(r.pathos.unwrap()) / 2.0;
        r.llm_annotation.as_mut().unwrap().valence = p;
    }
    let suite = correlation_suite(&AnalysisTable::new(rows).unwrap(), PValueMethod::TApprox);
    let r = suite.get("gemV_pathos").unwrap().result().unwrap();
    assert_eq!(r.rho, 1.0);
    assert_eq!(r.p_value, 0.0);
}

#[test]
fn unknown_segment_in_a_channel_file_is_a_join_error() {
    let (segments, llm, _) = split_bundle();
    let trust = json!({"s9999": {"pathos": 0, "relevant": true}});
    let err = ingest_sources(&sources(&segments, &llm, &trust), &default_weight_table()).unwrap_err();
    assert!(matches!(&err, Error::Join(id, file) if id == "s9999" && file == "trust_scores"));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn segments_alone_leave_every_channel_absent() {
    let src = IngestSources {
        segments: read("sidecar/segments.json"),
        ..Default::default()
    };
    let t = ingest_sources(&src, &default_weight_table()).unwrap();
    assert_eq!(t.len(), 51);
    for ch in Channel::ALL {
        assert!(t.column(ch).iter().all(Option::is_none), "{ch}");
    }
    assert!(descriptive_suite(&t).is_empty());
    let suite = correlation_suite(&t, PValueMethod::TApprox);
    assert!(suite.comparisons.iter().all(|c| c.result().is_none()));
    assert!(rhetoric_distribution(&t).is_empty());
}

#[test]
fn relevance_filter_only_removes_rows() {
    // 51 segments, the ten outside the bundle marked irrelevant
    let bundle: BTreeMap<String, SegmentRecord> = bundled::appendix_b()
        .unwrap()
        .into_iter()
        .map(|r| (r.segment_id.clone(), r))
        .collect();
    let rows: Vec<SegmentRecord> = (0..51)
        .map(|i| {
            let id = format!("s{i:04}");
            bundle.get(&id).cloned().unwrap_or_else(|| {
                let mut r = SegmentRecord::new(&id, i as f64 * 4.5, i as f64 * 4.5 + 4.5, "").unwrap();
                r.relevant = false;
                r
            })
        })
        .collect();
    let t = AnalysisTable::new(rows).unwrap();
    let kept = apply_relevance_filter(&t);
    assert_eq!((t.len(), kept.len()), (51, 41));
    for r in kept.rows() {
        assert_eq!(r, &bundle[&r.segment_id]);
    }

    let all_relevant = AnalysisTable::new(bundle.values().cloned().collect()).unwrap();
    assert_eq!(apply_relevance_filter(&all_relevant), all_relevant);
}

#[test]
fn irrelevant_rows_cannot_carry_pathos() {
    let (segments, llm, _) = split_bundle();
    let trust = json!({"s0003": {"pathos": 1, "relevant": false}});
    let err = ingest_sources(&sources(&segments, &llm, &trust), &default_weight_table()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn duplicate_keys_in_channel_files_are_schema_errors() {
    let (segments, llm, _) = split_bundle();
    let src = IngestSources {
        segments: serde_json::to_string(&segments).unwrap(),
        e2v_probs: None,
        llm_annotations: Some(llm.to_string()),
        trust_scores: Some(
            r#"{"s0003": {"pathos": 0, "relevant": true}, "s0003": {"pathos": 1, "relevant": true}}"#.into(),
        ),
    };
    let err = ingest_sources(&src, &default_weight_table()).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
}

#[test]
fn ingest_from_disk_records_provenance() {
    let t = ingest(
        &fixture("sidecar/segments.json"),
        Some(&fixture("sidecar/e2v_probs.json")),
        None,
        None,
        &default_weight_table(),
    )
    .unwrap();
    assert_eq!(t.provenance.len(), 2);
    assert!(t.provenance["e2v"].ends_with("e2v_probs.json"));
    assert!(t.column(Channel::E2vArousal).iter().all(Option::is_some));
}

// Contract between the acoustic sidecar and this crate, checked against the
// committed sample output.

#[test]
fn sidecar_sample_passes_the_schema_checker() {
    let text = read("sidecar/e2v_probs.json");
    let maps = parse_e2v_probs(&text).unwrap();
    assert_eq!(maps.len(), 51);

    let raw: serde_json::Map<String, Value> = serde_json::from_str(&text).unwrap();
    let classes: Vec<&str> = EmotionClass::ALL.iter().map(|c| c.name()).collect();
    for (id, m) in raw.iter().filter(|(k, _)| *k != "_meta") {
        let obj = m.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        let mut want = classes.clone();
        want.sort_unstable();
        assert_eq!(keys, want, "{id}");
        let sum: f64 = obj.values().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-6, "{id} sums to {sum}");
    }
    assert!(raw["_meta"]["model_id"].is_string());
}

#[test]
fn sidecar_sample_ingests_onto_its_segments() {
    let src = IngestSources {
        segments: read("sidecar/segments.json"),
        e2v_probs: Some(read("sidecar/e2v_probs.json")),
        ..Default::default()
    };
    let t = ingest_sources(&src, &default_weight_table()).unwrap();
    assert_eq!(t.len(), 51);
    for r in t.rows() {
        let p = r.e2v_point.unwrap();
        assert!(p.arousal.abs() <= 1.0 && p.valence.abs() <= 1.0);
    }
}

#[test]
fn malformed_probability_maps_are_rejected() {
    let cases = [
        r#"{"s0000": {"angry": 1.0}}"#,
        r#"{"s0000": {"angry": 0.5, "disgusted": 0, "fearful": 0, "happy": 0, "neutral": 0, "other": 0, "sad": 0, "surprised": 0}}"#,
        r#"{"s0000": {"angry": 1.0, "disgusted": 0, "fearful": 0, "happy": 0, "neutral": 0, "other": 0, "sad": 0, "surprised": 0, "bored": 0}}"#,
        r#"{"_meta": 3}"#,
    ];
    for c in cases {
        let err = parse_e2v_probs(c).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{c}: {err}");
    }
}
