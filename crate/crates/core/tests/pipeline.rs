mod common;

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use weaktie::pipeline::{
    run_embed, run_features, run_ingest, run_networks, run_pca, run_pipeline, run_regress, run_report, FailureKind,
    ModelId, Stage,
};
use weaktie::stats::CohortAxis;

fn files_under(root: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

#[test]
fn manifest_covers_every_output_with_correct_hashes() {
    let out = tempfile::tempdir().unwrap();
    let manifest = run_pipeline(&common::fixture_config(&common::fixture_dir(), out.path())).unwrap();
    let stages: Vec<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, ["ingest", "networks", "embed", "features", "pca", "regress", "report"]);

    let listed: BTreeSet<String> = manifest.stages.iter().flat_map(|s| s.outputs.iter().map(|f| f.path.clone())).collect();
    let mut on_disk = files_under(out.path());
    assert!(on_disk.remove("manifest.json"));
    assert_eq!(listed, on_disk);
    for record in manifest.stages.iter().flat_map(|s| &s.outputs) {
        let bytes = std::fs::read(out.path().join(&record.path)).unwrap();
        assert_eq!(record.bytes, bytes.len() as u64);
        assert_eq!(record.sha256, hex::encode(Sha256::digest(&bytes)), "{}", record.path);
    }
    assert!(common::regression_is_well_formed(out.path()));
}

#[test]
fn separate_stages_reproduce_the_full_run() {
    let fixture = common::fixture_dir();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let full = run_pipeline(&common::fixture_config(&fixture, a.path())).unwrap();
    let cfg = common::fixture_config(&fixture, b.path());
    for step in [run_ingest, run_networks, run_embed, run_features, run_pca, run_regress, run_report] {
        step(&cfg).unwrap();
    }
    for record in full.stages.iter().flat_map(|s| &s.outputs) {
        let other = std::fs::read(b.path().join(&record.path)).unwrap();
        assert_eq!(record.sha256, hex::encode(Sha256::digest(&other)), "{}", record.path);
    }
}

#[test]
fn every_model_and_cohort_axis_runs() {
    let fixture = common::fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = common::fixture_config(&fixture, out.path());
    run_pipeline(&cfg).unwrap();
    for model in ModelId::ALL {
        cfg.model = model;
        run_pca(&cfg).unwrap();
        run_regress(&cfg).unwrap();
        let doc: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.path().join("regression.json")).unwrap()).unwrap();
        let names: Vec<&str> = doc["result"]["terms"].as_array().unwrap().iter().map(|t| t["name"].as_str().unwrap()).collect();
        assert_eq!(names.contains(&"deg_ave"), model.uses_degree(), "{model}");
        assert_eq!(names.contains(&"div_weakness"), model.uses_diversity(), "{model}");
    }

    cfg.model = ModelId::I;
    for axis in [CohortAxis::YearCreation, CohortAxis::CoreTeamSize, CohortAxis::Ownership] {
        cfg.cohort = Some(axis);
        run_regress(&cfg).unwrap();
        let text = std::fs::read_to_string(out.path().join("cohorts.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis,cohort,rows,term,coefficient,standard_error,p_value,ci_low,ci_high,error"
        );
        let cohorts: BTreeSet<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
        assert!(!cohorts.is_empty());
        if axis == CohortAxis::Ownership {
            assert_eq!(cohorts, BTreeSet::from(["individual", "organization"]));
        }
    }
}

#[test]
fn failures_are_classified() {
    let fixture = common::fixture_dir();
    let out = tempfile::tempdir().unwrap();

    let mut cfg = common::fixture_config(&fixture, out.path());
    cfg.seed = None;
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Config, FailureKind::Config));

    let mut cfg = common::fixture_config(&fixture, out.path());
    cfg.window_months = 18;
    assert_eq!(run_ingest(&cfg).unwrap_err().exit_code(), 2);

    let mut cfg = common::fixture_config(&fixture, out.path());
    cfg.events = fixture.join("missing.jsonl");
    let err = run_ingest(&cfg).unwrap_err();
    assert_eq!((err.stage, err.exit_code()), (Stage::Ingest, 3));

    let cfg = common::fixture_config(&fixture, tempfile::tempdir().unwrap().path());
    assert_eq!(run_features(&cfg).unwrap_err().kind, FailureKind::Data);
}
