//! The experiment grid: configuration, execution and report emission.

mod config;
mod report;
mod run;

pub use config::{
    DatasetFormat, DatasetSource, ExperimentConfig, FeatureMode, LabelRef, SplitFractions,
    VaeSettings,
};
pub use report::{cell_id, write_reports, METRICS_HEADER};
pub use run::{
    evaluate_classifier, load_dataset, prepare_cell, read_run_report, run_experiment, CellOutcome,
    CellReport, Comparison, FailureRow, PreparedCell, RunReport,
};
