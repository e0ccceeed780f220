use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierKind, ClassifierModel, ClassifierParams};
use crate::dataio::{
    drop_unlabeled, fit_scaler, load_binary, load_csv, split, Dataset, LabelColumn, ScalerParams,
    SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    confusion_and_scores, kfold_cv, roc_auc, roc_curve_points, time_execution, ttest_ind,
    ClassificationScores, CvResult, RocPoint, TTestResult, TimingRecord,
};
use crate::numcore::{derive_seed, Matrix};
use crate::persist::save_model;
use crate::pipeline::config::{
    DatasetFormat, DatasetSource, ExperimentConfig, FeatureMode, VaeSettings,
};
use crate::pipeline::report::{cell_id, write_reports};
use crate::vae::{extract_latent, init_vae, train_vae, LossBreakdown, TrainConfig, VaeModel};

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub split: String,
    pub seed: u64,
    pub mode: FeatureMode,
    pub classifier: ClassifierKind,
    pub cv: CvResult,
    pub test: ClassificationScores,
    pub auc: f64,
    /// Absent when timings are switched off.
    pub timing: Option<TimingRecord>,
    pub roc: Vec<RocPoint>,
}

/// A cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub split: String,
    pub seed: u64,
    pub mode: FeatureMode,
    pub classifier: ClassifierKind,
    pub error: String,
}

/// A t-test between the CV fold scores of two cells that differ only in
/// seed or only in split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode: FeatureMode,
    pub classifier: ClassifierKind,
    pub split_a: String,
    pub split_b: String,
    pub seed_a: u64,
    pub seed_b: u64,
    pub result: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    pub failures: Vec<FailureRow>,
    pub seed_comparisons: Vec<Comparison>,
    pub split_comparisons: Vec<Comparison>,
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    let ds = match source.format {
        DatasetFormat::Lmld => load_binary(&source.path)?,
        DatasetFormat::Csv => load_csv(&source.path, &LabelColumn::from(&source.label_column))?,
    };
    Ok(drop_unlabeled(&ds, source.unlabeled))
}

/// Everything a cell needs that is fit on the training partition only.
#[derive(Debug, Clone)]
pub struct PreparedCell {
    pub scaler: ScalerParams,
    /// Scaled train and test partitions.
    pub train: Dataset,
    pub test: Dataset,
    pub vae: Option<VaeModel>,
    pub vae_losses: Vec<LossBreakdown>,
    /// `z_mean` of the scaled partitions.
    pub latent_train: Option<Dataset>,
    pub latent_test: Option<Dataset>,
}

/// Splits, fits the scaler on train, and optionally trains a VAE on the
/// scaled train rows and encodes both partitions.
pub fn prepare_cell(
    ds: &Dataset,
    spec: &SplitSpec,
    vae: Option<&VaeSettings>,
    seed: u64,
) -> Result<PreparedCell> {
    let (train, test, _holdout) = split(ds, spec)?;
    let scaler = fit_scaler(&train)?;
    let train = train.with_features(scaler.transform(train.features())?)?;
    let test = test.with_features(scaler.transform(test.features())?)?;
    let mut cell = PreparedCell {
        scaler,
        train,
        test,
        vae: None,
        vae_losses: Vec::new(),
        latent_train: None,
        latent_test: None,
    };
    if let Some(settings) = vae {
        let init = init_vae(
            cell.train.feature_dim(),
            &settings.hidden_dims,
            settings.latent_dim,
            seed,
        )?;
        let config = TrainConfig {
            seed,
            ..settings.train.clone()
        };
        let (model, losses) = train_vae(&init, &cell.train, &config)?;
        cell.latent_train = Some(extract_latent(&model, &cell.train)?);
        cell.latent_test = Some(extract_latent(&model, &cell.test)?);
        cell.vae = Some(model);
        cell.vae_losses = losses;
    }
    Ok(cell)
}

/// Result of evaluating one classifier on one feature set.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cv: CvResult,
    pub test: ClassificationScores,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub timing: TimingRecord,
    pub model: ClassifierModel,
    pub test_proba: Vec<f64>,
}

/// k-fold CV on the training set, a timed fit on all of it, then test metrics.
/// Fold `i` trains with seed `derive_seed(seed, i)`; the final fit uses `seed`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_classifier(
    kind: ClassifierKind,
    params: &ClassifierParams,
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    folds: usize,
    seed: u64,
) -> Result<CellOutcome> {
    let cv = kfold_cv(
        |fold, tx, ty, vx| {
            params
                .train(kind, tx, ty, derive_seed(seed, fold as u64))?
                .predict_proba(vx)
        },
        train_x,
        train_y,
        folds,
        seed,
    )?;
    let (model, timing) =
        time_execution(kind.name(), || params.train(kind, train_x, train_y, seed))?;
    let test_proba = model.predict_proba(test_x)?;
    let predictions: Vec<u8> = test_proba.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let test = confusion_and_scores(&predictions, test_y)?;
    Ok(CellOutcome {
        cv,
        test,
        auc: roc_auc(&test_proba, test_y)?,
        roc: roc_curve_points(&test_proba, test_y)?,
        timing,
        model,
        test_proba,
    })
}

/// Runs the grid, writes `run.json`, model archives and CSV reports under the
/// output directory, and returns the report. Cells that fail are recorded as
/// failure rows; only a dataset or output-directory problem aborts the run.
pub fn run_experiment(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<RunReport> {
    config.validate()?;
    let ds = load_dataset(&config.dataset)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let models_dir = out.join("models");
    if config.save_models {
        fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    }
    let modes = config.feature_mode.expand();
    let needs_vae = modes.contains(&FeatureMode::Latent);

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for fractions in &config.splits {
        let split_label = fractions.label();
        for &seed in &config.seeds {
            let spec = fractions.spec(seed, config.stratify);
            let stem = cell_id(&split_label, seed, None, None);
            progress(&format!("preparing {stem}"));
            let prepared = prepare_cell(&ds, &spec, needs_vae.then_some(&config.vae), seed)
                .and_then(|p| {
                    if config.save_models {
                        save_model(&p.scaler, models_dir.join(format!("{stem}_scaler.lmlm")))?;
                        if let Some(vae) = &p.vae {
                            save_model(vae, models_dir.join(format!("{stem}_vae.lmlm")))?;
                        }
                    }
                    Ok(p)
                });
            for &mode in &modes {
                for &kind in &config.classifiers {
                    let fail = |error: String| FailureRow {
                        split: split_label.clone(),
                        seed,
                        mode,
                        classifier: kind,
                        error,
                    };
                    let p = match &prepared {
                        Ok(p) => p,
                        Err(e) => {
                            failures.push(fail(e.to_string()));
                            continue;
                        }
                    };
                    let (train, test) = match mode {
                        FeatureMode::Latent => (
                            p.latent_train.as_ref().unwrap(),
                            p.latent_test.as_ref().unwrap(),
                        ),
                        _ => (&p.train, &p.test),
                    };
                    let id = cell_id(&split_label, seed, Some(mode), Some(kind));
                    progress(&format!("evaluating {id}"));
                    let outcome = train.binary_labels().and_then(|ty| {
                        let vy = test.binary_labels()?;
                        let o = evaluate_classifier(
                            kind,
                            &config.classifier_params,
                            train.features(),
                            &ty,
                            test.features(),
                            &vy,
                            config.cv_folds,
                            seed,
                        )?;
                        if config.save_models {
                            save_model(&o.model, models_dir.join(format!("{id}.lmlm")))?;
                        }
                        Ok(o)
                    });
                    match outcome {
                        Ok(o) => cells.push(CellReport {
                            split: split_label.clone(),
                            seed,
                            mode,
                            classifier: kind,
                            cv: o.cv,
                            test: o.test,
                            auc: o.auc,
                            timing: config.record_timings.then_some(o.timing),
                            roc: o.roc,
                        }),
                        Err(e) => failures.push(fail(e.to_string())),
                    }
                }
            }
        }
    }

    let (seed_comparisons, split_comparisons) = compare_cells(&cells, config)?;
    let report = RunReport {
        config: config.clone(),
        cells,
        failures,
        seed_comparisons,
        split_comparisons,
    };
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    let path = out.join("run.json");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    write_reports(out, &report)?;
    Ok(report)
}

/// Seed pairs within each split, and split pairs within each seed.
fn compare_cells(
    cells: &[CellReport],
    config: &ExperimentConfig,
) -> Result<(Vec<Comparison>, Vec<Comparison>)> {
    let find = |split: &str, seed: u64, mode: FeatureMode, kind: ClassifierKind| {
        cells
            .iter()
            .find(|c| c.split == split && c.seed == seed && c.mode == mode && c.classifier == kind)
    };
    let labels: Vec<String> = config.splits.iter().map(|s| s.label()).collect();
    let mut by_seed = Vec::new();
    let mut by_split = Vec::new();
    for mode in config.feature_mode.expand() {
        for &kind in &config.classifiers {
            let push = |out: &mut Vec<Comparison>,
                        (sa, da): (&String, u64),
                        (sb, db): (&String, u64)|
             -> Result<()> {
                if let (Some(a), Some(b)) = (find(sa, da, mode, kind), find(sb, db, mode, kind)) {
                    out.push(Comparison {
                        mode,
                        classifier: kind,
                        split_a: sa.clone(),
                        split_b: sb.clone(),
                        seed_a: da,
                        seed_b: db,
                        result: ttest_ind(&a.cv.fold_scores, &b.cv.fold_scores)?,
                    });
                }
                Ok(())
            };
            for split in &labels {
                for (i, &a) in config.seeds.iter().enumerate() {
                    for &b in &config.seeds[i + 1..] {
                        push(&mut by_seed, (split, a), (split, b))?;
                    }
                }
            }
            for &seed in &config.seeds {
                for (i, a) in labels.iter().enumerate() {
                    for b in &labels[i + 1..] {
                        push(&mut by_split, (a, seed), (b, seed))?;
                    }
                }
            }
        }
    }
    Ok((by_seed, by_split))
}

pub fn read_run_report(dir: impl AsRef<Path>) -> Result<RunReport> {
    let path = dir.as_ref().join("run.json");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
