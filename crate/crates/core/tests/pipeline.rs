use std::fs;
use std::path::Path;

use latentml::classifier::ClassifierKind;
use latentml::dataio::{generate_synthetic, save_binary, split_indices, SyntheticSpec};
use latentml::eval::{trapezoid_area, RocPoint};
use latentml::pipeline::{
    prepare_cell, read_run_report, run_experiment, write_reports, ExperimentConfig, FeatureMode,
    SplitFractions, VaeSettings, METRICS_HEADER,
};
use latentml::vae::TrainConfig;
use latentml::{Dataset, Matrix, SplitSpec};

fn data(n: usize, seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        n_samples: n,
        feature_dim: 16,
        n_informative: 6,
        class_separation: 1.5,
        label_balance: 0.5,
    };
    generate_synthetic(&spec, seed).unwrap()
}

fn small_vae() -> VaeSettings {
    VaeSettings {
        hidden_dims: vec![12],
        latent_dim: 4,
        train: TrainConfig {
            epochs: 3,
            batch_size: 32,
            ..TrainConfig::default()
        },
    }
}

fn minimal(dir: &Path) -> ExperimentConfig {
    let path = dir.join("data.lmld");
    save_binary(&data(300, 1), None, &path).unwrap();
    let mut cfg = ExperimentConfig::with_defaults(path, dir.join("out"));
    cfg.splits = vec![SplitFractions {
        train_fraction: 0.5,
        test_fraction: 0.3,
    }];
    cfg.seeds = vec![42];
    cfg.classifiers = vec![ClassifierKind::DecisionTree];
    cfg.feature_mode = FeatureMode::Raw;
    cfg
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn minimal_config_gives_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = minimal(dir.path());
    let report = run_experiment(&cfg, &mut |_| {}).unwrap();
    assert_eq!(report.cells.len(), 1);
    assert!(report.failures.is_empty());
    let (header, rows) = read_csv(&cfg.output_dir.join("metrics.csv"));
    assert_eq!(header, METRICS_HEADER);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][..4], ["50/30", "42", "raw", "decision_tree"]);
    assert!(cfg.output_dir.join("models/50-30_s42_scaler.lmlm").exists());
    assert!(cfg
        .output_dir
        .join("models/50-30_s42_raw_decision_tree.lmlm")
        .exists());
}

#[test]
fn grid_is_complete_and_comparisons_are_rounded() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal(dir.path());
    cfg.splits = vec![
        SplitFractions {
            train_fraction: 0.3,
            test_fraction: 0.3,
        },
        SplitFractions {
            train_fraction: 0.6,
            test_fraction: 0.3,
        },
    ];
    cfg.seeds = vec![42, 123];
    cfg.classifiers = vec![
        ClassifierKind::NaiveBayes,
        ClassifierKind::LogisticRegression,
    ];
    cfg.feature_mode = FeatureMode::Both;
    cfg.vae = small_vae();
    let report = run_experiment(&cfg, &mut |_| {}).unwrap();
    assert_eq!(report.cells.len() + report.failures.len(), cfg.cell_count());
    assert_eq!(report.cells.len(), 16);
    // one seed pair per split, one split pair per seed, per mode and classifier
    assert_eq!(report.seed_comparisons.len(), 2 * 2 * 2);
    assert_eq!(report.split_comparisons.len(), 2 * 2 * 2);

    let (header, rows) = read_csv(&cfg.output_dir.join("ttest_splits.csv"));
    assert_eq!(header[6..], ["t_statistic", "p_value"]);
    for row in rows {
        for v in &row[6..] {
            let decimals = v.split('.').nth(1).map_or(0, str::len);
            assert_eq!(decimals, 4, "{v}");
        }
    }
}

#[test]
fn roc_files_integrate_to_the_reported_auc() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal(dir.path());
    cfg.classifiers = vec![ClassifierKind::RandomForest, ClassifierKind::NaiveBayes];
    let report = run_experiment(&cfg, &mut |_| {}).unwrap();
    let (header, metrics) = read_csv(&cfg.output_dir.join("metrics.csv"));
    let auc_col = header.iter().position(|h| h == "auc").unwrap();
    for (cell, row) in report.cells.iter().zip(&metrics) {
        let name = format!("50-30_s42_raw_{}.csv", cell.classifier.name());
        let (header, rows) = read_csv(&cfg.output_dir.join("roc").join(name));
        assert_eq!(header, ["fpr", "tpr", "threshold"]);
        let points: Vec<RocPoint> = rows
            .iter()
            .map(|r| RocPoint {
                fpr: r[0].parse().unwrap(),
                tpr: r[1].parse().unwrap(),
                threshold: r[2].parse().unwrap(),
            })
            .collect();
        assert_eq!(points[0].threshold, f64::INFINITY);
        let auc: f64 = row[auc_col].parse().unwrap();
        assert!((trapezoid_area(&points) - auc).abs() <= 1e-9);
    }
}

#[test]
fn report_command_rewrites_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal(dir.path());
    cfg.record_timings = false;
    cfg.seeds = vec![1, 2];
    run_experiment(&cfg, &mut |_| {}).unwrap();
    let tables = [
        "metrics.csv",
        "ttest_seeds.csv",
        "ttest_splits.csv",
        "execution_times.csv",
    ];
    let before: Vec<Vec<u8>> = tables
        .iter()
        .map(|t| fs::read(cfg.output_dir.join(t)).unwrap())
        .collect();
    let again = dir.path().join("again");
    write_reports(&again, &read_run_report(&cfg.output_dir).unwrap()).unwrap();
    let after: Vec<Vec<u8>> = tables
        .iter()
        .map(|t| fs::read(again.join(t)).unwrap())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn a_failing_classifier_does_not_stop_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal(dir.path());
    cfg.classifiers = vec![
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::NaiveBayes,
    ];
    cfg.classifier_params.random_forest.n_trees = 0;
    let report = run_experiment(&cfg, &mut |_| {}).unwrap();
    assert_eq!(report.cells.len(), 2);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].classifier, ClassifierKind::RandomForest);
    let (_, rows) = read_csv(&cfg.output_dir.join("failures.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "random_forest");
}

#[test]
fn missing_dataset_aborts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal(dir.path());
    cfg.dataset.path = dir.path().join("absent.lmld");
    let err = run_experiment(&cfg, &mut |_| {}).unwrap_err();
    assert!(err.is_data_error());
}

#[test]
fn test_rows_never_reach_the_scaler_or_vae() {
    let ds = data(400, 5);
    let spec = SplitSpec::new(0.5, 0.3, 17);
    let test_rows = split_indices(ds.labels(), &spec).unwrap().test;
    let d = ds.feature_dim();
    let mut values = ds.features().as_slice().to_vec();
    for &r in &test_rows {
        for v in &mut values[r * d..(r + 1) * d] {
            *v = 1.0 - *v * 0.5;
        }
    }
    let perturbed = ds
        .with_features(Matrix::new(ds.len(), d, values).unwrap())
        .unwrap();

    let vae = small_vae();
    let a = prepare_cell(&ds, &spec, Some(&vae), 17).unwrap();
    let b = prepare_cell(&perturbed, &spec, Some(&vae), 17).unwrap();
    assert_eq!(a.scaler, b.scaler);
    assert_eq!(a.vae, b.vae);
    assert_eq!(a.train, b.train);
    assert_ne!(a.test, b.test);
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = minimal(dir.path());
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);

    let sparse = r#"{"dataset": {"path": "d.lmld"}, "output_dir": "out"}"#;
    let path = dir.path().join("cfg.json");
    fs::write(&path, sparse).unwrap();
    let loaded = ExperimentConfig::load(&path).unwrap();
    assert_eq!(loaded.dataset.path, dir.path().join("d.lmld"));
    assert_eq!(loaded.cell_count(), 60);

    assert!(ExperimentConfig::from_json(
        r#"{"dataset": {"path": "d"}, "output_dir": "o", "seeds": []}"#
    )
    .is_err());
    assert!(ExperimentConfig::from_json(
        r#"{"dataset": {"path": "d"}, "output_dir": "o", "colour": 1}"#
    )
    .is_err());
}
