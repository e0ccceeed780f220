use std::fs;
use std::path::Path;

use crate::classifier::ClassifierKind;
use crate::error::{Error, Result};
use crate::pipeline::config::FeatureMode;
use crate::pipeline::run::{CellReport, Comparison, RunReport};

pub const METRICS_HEADER: [&str; 12] = [
    "split",
    "seed",
    "mode",
    "classifier",
    "cv_mean",
    "cv_std",
    "test_accuracy",
    "auc",
    "precision",
    "recall",
    "f1",
    "seconds",
];

/// File-name stem for a cell, e.g. `30-30_s42_latent_random_forest`. Mode
/// and classifier may be left out to name per-(split, seed) artifacts.
pub fn cell_id(
    split: &str,
    seed: u64,
    mode: Option<FeatureMode>,
    kind: Option<ClassifierKind>,
) -> String {
    let mut id = format!("{}_s{seed}", split.replace('/', "-"));
    if let Some(m) = mode {
        id.push('_');
        id.push_str(m.name());
    }
    if let Some(k) = kind {
        id.push('_');
        id.push_str(k.name());
    }
    id
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

fn four(v: f64) -> String {
    format!("{v:.4}")
}

fn comparison_rows(list: &[Comparison]) -> Vec<Vec<String>> {
    list.iter()
        .map(|c| {
            vec![
                c.mode.name().to_string(),
                c.classifier.name().to_string(),
                c.split_a.clone(),
                c.split_b.clone(),
                c.seed_a.to_string(),
                c.seed_b.to_string(),
                four(c.result.t_statistic),
                four(c.result.p_value),
            ]
        })
        .collect()
}

/// Writes the CSV tables for a finished run into `dir`:
///
/// * `metrics.csv`, one row per cell, full precision;
/// * `ttest_seeds.csv` and `ttest_splits.csv`, t and p to 4 decimals;
/// * `execution_times.csv`;
/// * `failures.csv`;
/// * `roc/<cell>.csv` with `fpr,tpr,threshold` per cell.
pub fn write_reports(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let seconds = |c: &CellReport| {
        c.timing
            .as_ref()
            .map(|t| t.wall_seconds.to_string())
            .unwrap_or_default()
    };

    let metrics: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.split.clone(),
                c.seed.to_string(),
                c.mode.name().to_string(),
                c.classifier.name().to_string(),
                c.cv.mean.to_string(),
                c.cv.std.to_string(),
                c.test.accuracy.to_string(),
                c.auc.to_string(),
                c.test.precision.to_string(),
                c.test.recall.to_string(),
                c.test.f1.to_string(),
                seconds(c),
            ]
        })
        .collect();
    write_table(&dir.join("metrics.csv"), &METRICS_HEADER, &metrics)?;

    let cmp_header = [
        "mode",
        "classifier",
        "split_a",
        "split_b",
        "seed_a",
        "seed_b",
        "t_statistic",
        "p_value",
    ];
    write_table(
        &dir.join("ttest_seeds.csv"),
        &cmp_header,
        &comparison_rows(&report.seed_comparisons),
    )?;
    write_table(
        &dir.join("ttest_splits.csv"),
        &cmp_header,
        &comparison_rows(&report.split_comparisons),
    )?;

    let times: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.split.clone(),
                c.seed.to_string(),
                c.mode.name().to_string(),
                c.classifier.name().to_string(),
                seconds(c),
            ]
        })
        .collect();
    write_table(
        &dir.join("execution_times.csv"),
        &["split", "seed", "mode", "classifier", "seconds"],
        &times,
    )?;

    let failures: Vec<Vec<String>> = report
        .failures
        .iter()
        .map(|f| {
            vec![
                f.split.clone(),
                f.seed.to_string(),
                f.mode.name().to_string(),
                f.classifier.name().to_string(),
                f.error.clone(),
            ]
        })
        .collect();
    write_table(
        &dir.join("failures.csv"),
        &["split", "seed", "mode", "classifier", "error"],
        &failures,
    )?;

    let roc_dir = dir.join("roc");
    fs::create_dir_all(&roc_dir).map_err(|e| Error::io(&roc_dir, e))?;
    for c in &report.cells {
        let rows: Vec<Vec<String>> = c
            .roc
            .iter()
            .map(|p| {
                vec![
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                    p.threshold.to_string(),
                ]
            })
            .collect();
        let name = format!(
            "{}.csv",
            cell_id(&c.split, c.seed, Some(c.mode), Some(c.classifier))
        );
        write_table(&roc_dir.join(name), &["fpr", "tpr", "threshold"], &rows)?;
    }
    Ok(())
}
