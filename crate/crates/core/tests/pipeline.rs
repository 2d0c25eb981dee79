mod common;

use gpdr::experiment::{
    export_expressions, parse_exported, run_experiment, select_run, summarize, validate_data, Criterion, ExperimentConfig,
    Method, MetricKind, ResultStore, RunRecord,
};

#[test]
fn every_method_completes_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path());
    let store = run_experiment(&cfg).unwrap();
    assert_eq!(store.records.len(), Method::ALL.len() * 2);
    assert_eq!(store.failures().count(), 0, "{:?}", store.failures().map(|r| &r.error).collect::<Vec<_>>());
    for r in &store.records {
        let acc = r.balanced_accuracy.unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(r.reconstruction_error.unwrap().is_finite());
        assert_eq!(r.fold_accuracies.len(), 3);
        if r.method.fitness_spec().is_some() {
            assert_eq!(r.expressions.len(), 2);
            assert!(r.genome.is_some());
        }
        assert_eq!(r.teacher.is_some(), r.method == Method::MtTeacher);
        assert_eq!(r.decoder_expressions.is_empty(), r.method != Method::AmtGp);
    }
    let reloaded = ResultStore::load(&cfg.output).unwrap();
    let strip = |s: &ResultStore| s.records.iter().map(RunRecord::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(&reloaded), strip(&store));
}

#[test]
fn well_separated_blobs_classify_well() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path());
    cfg.methods = vec![Method::Pca, Method::MtDistEuclidean];
    let store = run_experiment(&cfg).unwrap();
    for r in &store.records {
        assert!(r.balanced_accuracy.unwrap() > 0.8, "{} run {}: {:?}", r.method, r.run, r.balanced_accuracy);
    }
}

#[test]
fn interrupted_sweeps_resume_without_rerunning() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path());
    cfg.methods = vec![Method::Pca, Method::MtRankEuclidean];
    let first = run_experiment(&cfg).unwrap();
    let runs = ResultStore::records_dir(&cfg.output);
    let victim = runs.join(RunRecord::file_name(Method::MtRankEuclidean, 2, 1));
    std::fs::remove_file(&victim).unwrap();
    let before: Vec<_> = std::fs::read_dir(&runs)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.clone(), std::fs::metadata(&p).unwrap().modified().unwrap())
        })
        .collect();
    let second = run_experiment(&cfg).unwrap();
    for (path, stamp) in before {
        assert_eq!(std::fs::metadata(&path).unwrap().modified().unwrap(), stamp, "{path:?} was rewritten");
    }
    assert!(victim.exists());
    let strip = |s: &gpdr::experiment::ResultStore| s.records.iter().map(RunRecord::without_timing).collect::<Vec<_>>();
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn summary_and_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path());
    cfg.methods = vec![Method::Pca, Method::MtDistEuclidean, Method::AmtGp];
    cfg.runs = 3;
    let store = run_experiment(&cfg).unwrap();
    let summary = summarize(&store).unwrap();
    for m in &cfg.methods {
        let cell = summary.get(*m, 2, MetricKind::BalancedAccuracy).unwrap();
        assert_eq!(cell.n, 3);
    }
    let table = summary.to_markdown();
    assert!(table.contains("AMT F_GP") && table.contains("PCA"));

    let text = export_expressions(&store, Method::AmtGp, 2, Criterion::BestReconstruction).unwrap();
    let parsed = parse_exported(&text);
    let chosen = select_run(&store, Method::AmtGp, 2, Criterion::BestReconstruction).unwrap();
    assert_eq!(parsed.len(), chosen.expressions.len() + chosen.decoder_expressions.len());
    assert_eq!(parsed[0].1, chosen.expressions[0]);
    assert!(export_expressions(&store, Method::Pca, 2, Criterion::BestAccuracy).is_err());
}

#[test]
fn configuration_survives_toml() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path());
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
    let report = validate_data(&cfg).unwrap();
    assert!(report.to_string().contains("90"));
}
