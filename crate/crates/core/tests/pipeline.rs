use std::fs;
use std::process::Command;

use adlens::config::PipelineConfig;
use adlens::pipeline::{layout, Pipeline, PipelineError, Stage};
use adlens::synth::{mini_spec, write_fixture, Fixture};

fn fixture() -> (tempfile::TempDir, Fixture) {
    let dir = tempfile::tempdir().unwrap();
    let fx = write_fixture(dir.path(), &mini_spec()).unwrap();
    (dir, fx)
}

#[test]
fn mini_corpus_completes_with_counts_and_metrics() {
    let (_d, fx) = fixture();
    let p = Pipeline::from_config_file(&fx.config_path).unwrap();
    let report = p.run().unwrap();
    let stages: Vec<Stage> = report.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, Stage::ALL.to_vec());
    assert_eq!(report.stages[0].counts["records"], 60);
    assert_eq!(report.stages[2].counts["rejects"], 0);
    let e = &report.evaluation;
    assert!(e.classification.n > 0 && (0.0..=1.0).contains(&e.classification.accuracy));
    assert!(e.regression_rmse.is_finite());
    assert_eq!(e.significance.len(), 5);
    for rel in [layout::SCORED, layout::LABELED, layout::REGISTRY, layout::FEATURES, layout::MODEL, layout::SPLIT, layout::EVALUATION] {
        assert!(p.artifact(rel).exists(), "{rel}");
    }
    assert!(!p.artifact(layout::STALE).exists());
}

#[test]
fn missing_embeddings_fail_validation_before_any_stage() {
    let (d, fx) = fixture();
    fs::remove_file(d.path().join("embeddings.txt")).unwrap();
    let err = Pipeline::from_config_file(&fx.config_path).err().unwrap();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert!(!d.path().join("artifacts").exists());
}

#[test]
fn failed_stage_is_marked_stale_until_it_succeeds() {
    let (_d, fx) = fixture();
    let p = Pipeline::from_config_file(&fx.config_path).unwrap();
    let err = p.run_stage(Stage::Train).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let stale = fs::read_to_string(p.artifact(layout::STALE)).unwrap();
    assert!(stale.starts_with("train\n"), "{stale}");
    for s in [Stage::Ingest, Stage::Debias, Stage::Features] {
        p.run_stage(s).unwrap();
    }
    assert!(p.artifact(layout::STALE).exists());
    p.run_stage(Stage::Train).unwrap();
    assert!(!p.artifact(layout::STALE).exists());
}

#[test]
fn registry_change_after_features_is_rejected() {
    let (_d, fx) = fixture();
    let p = Pipeline::from_config_file(&fx.config_path).unwrap();
    for s in [Stage::Ingest, Stage::Debias, Stage::Features] {
        p.run_stage(s).unwrap();
    }
    let mut cfg = PipelineConfig::load(&fx.config_path).unwrap();
    cfg.registry.segment_k += 1;
    let err = Pipeline::new(cfg).unwrap().run_stage(Stage::Train).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn missing_images_become_rejects() {
    let (d, fx) = fixture();
    let p = Pipeline::from_config_file(&fx.config_path).unwrap();
    for s in [Stage::Ingest, Stage::Debias] {
        p.run_stage(s).unwrap();
    }
    let labeled = fs::read_to_string(p.artifact(layout::LABELED)).unwrap();
    let ids: Vec<String> = labeled
        .lines()
        .take(2)
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["post_id"].as_str().unwrap().to_string())
        .collect();
    fs::remove_file(d.path().join(format!("images/{}.png", ids[0]))).unwrap();
    fs::write(d.path().join(format!("images/{}.png", ids[1])), b"garbage").unwrap();
    let c = p.run_stage(Stage::Features).unwrap();
    assert_eq!(c.counts["rejects"], 2);
    let rejects = fs::read_to_string(p.artifact(layout::FEATURE_REJECTS)).unwrap();
    assert!(rejects.contains(&ids[0]) && rejects.contains(&ids[1]));
}

#[test]
fn debias_disabled_keeps_normalized_scores() {
    let (_d, fx) = fixture();
    let mut cfg = PipelineConfig::load(&fx.config_path).unwrap();
    cfg.debias.enabled = false;
    let p = Pipeline::new(cfg).unwrap();
    p.run_stage(Stage::Ingest).unwrap();
    p.run_stage(Stage::Debias).unwrap();
    let rows = fs::read_to_string(p.artifact(layout::LABELED)).unwrap();
    for line in rows.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["epsilon_n"], v["epsilon_nt"]);
    }
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_adlens");
    let (d, fx) = fixture();
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    let cfg = fx.config_path.to_str().unwrap();
    assert_eq!(code(&["evaluate", "--config", cfg]), Some(4));
    assert_eq!(code(&["ingest", "--config", cfg]), Some(0));
    assert_eq!(code(&["ingest", "--config", d.path().join("nope.json").to_str().unwrap()]), Some(2));
    fs::write(d.path().join("corpus.jsonl"), "").unwrap();
    assert_eq!(code(&["ingest", "--config", cfg]), Some(3));
}
