use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierKind, ClassifierParams};
use crate::dataio::{LabelColumn, SplitSpec, DEFAULT_UNLABELED};
use crate::error::{Error, Result};
use crate::vae::{TrainConfig, DEFAULT_HIDDEN, DEFAULT_LATENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Lmld,
    Csv,
}

/// A CSV label column given by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRef {
    Index(usize),
    Name(String),
}

impl From<&LabelRef> for LabelColumn {
    fn from(r: &LabelRef) -> Self {
        match r {
            LabelRef::Index(i) => LabelColumn::Index(*i),
            LabelRef::Name(n) => LabelColumn::Name(n.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: DatasetFormat,
    /// CSV only.
    #[serde(default = "default_label")]
    pub label_column: LabelRef,
    /// Rows carrying this label are dropped before splitting.
    #[serde(default = "default_sentinel")]
    pub unlabeled: i8,
}

fn default_format() -> DatasetFormat {
    DatasetFormat::Lmld
}

fn default_label() -> LabelRef {
    LabelRef::Name("label".into())
}

fn default_sentinel() -> i8 {
    DEFAULT_UNLABELED
}

/// Train and test fractions; the remainder is the unused holdout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train_fraction: f64,
    pub test_fraction: f64,
}

impl SplitFractions {
    pub fn spec(&self, seed: u64, stratify: bool) -> SplitSpec {
        SplitSpec {
            stratify,
            ..SplitSpec::new(self.train_fraction, self.test_fraction, seed)
        }
    }

    pub fn label(&self) -> String {
        self.spec(0, false).label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Raw,
    Latent,
    Both,
}

impl FeatureMode {
    /// The concrete modes a setting expands to, raw first.
    pub fn expand(self) -> Vec<FeatureMode> {
        match self {
            FeatureMode::Both => vec![FeatureMode::Raw, FeatureMode::Latent],
            m => vec![m],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Raw => "raw",
            FeatureMode::Latent => "latent",
            FeatureMode::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeSettings {
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    /// The seed inside is replaced by the cell seed.
    pub train: TrainConfig,
}

impl Default for VaeSettings {
    fn default() -> Self {
        VaeSettings {
            hidden_dims: DEFAULT_HIDDEN.to_vec(),
            latent_dim: DEFAULT_LATENT,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_splits")]
    pub splits: Vec<SplitFractions>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_mode")]
    pub feature_mode: FeatureMode,
    #[serde(default)]
    pub vae: VaeSettings,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub classifier_params: ClassifierParams,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub stratify: bool,
    pub output_dir: PathBuf,
    /// Wall-clock timings make reports differ between runs; switch them off
    /// for byte-identical output.
    #[serde(default = "default_true")]
    pub record_timings: bool,
    #[serde(default = "default_true")]
    pub save_models: bool,
}

fn default_splits() -> Vec<SplitFractions> {
    [(0.3, 0.3), (0.5, 0.3), (0.7, 0.3)]
        .into_iter()
        .map(|(train_fraction, test_fraction)| SplitFractions {
            train_fraction,
            test_fraction,
        })
        .collect()
}

fn default_seeds() -> Vec<u64> {
    vec![42, 123]
}

fn default_mode() -> FeatureMode {
    FeatureMode::Both
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_folds() -> usize {
    5
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn with_defaults(dataset: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset: DatasetSource {
                path: dataset.into(),
                format: default_format(),
                label_column: default_label(),
                unlabeled: default_sentinel(),
            },
            splits: default_splits(),
            seeds: default_seeds(),
            feature_mode: default_mode(),
            vae: VaeSettings::default(),
            classifiers: default_classifiers(),
            classifier_params: ClassifierParams::default(),
            cv_folds: default_folds(),
            stratify: false,
            output_dir: output_dir.into(),
            record_timings: true,
            save_models: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Precondition(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON config; a relative dataset path is taken relative to the
    /// config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.splits.is_empty() || self.seeds.is_empty() || self.classifiers.is_empty() {
            return Err(Error::Precondition(
                "config needs at least one split, one seed and one classifier".into(),
            ));
        }
        for s in &self.splits {
            s.spec(0, false).validate()?;
        }
        if self.cv_folds < 2 {
            return Err(Error::Precondition("cv_folds must be at least 2".into()));
        }
        if self.feature_mode != FeatureMode::Raw {
            if self.vae.latent_dim == 0 {
                return Err(Error::Precondition("latent_dim must be positive".into()));
            }
            self.vae.train.validate()?;
        }
        Ok(())
    }

    /// Number of (split, seed, mode, classifier) cells.
    pub fn cell_count(&self) -> usize {
        self.splits.len()
            * self.seeds.len()
            * self.feature_mode.expand().len()
            * self.classifiers.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_the_standard_grid() {
        let cfg =
            ExperimentConfig::from_json(r#"{"dataset":{"path":"d.lmld"},"output_dir":"out"}"#)
                .unwrap();
        assert_eq!(cfg.seeds, vec![42, 123]);
        let labels: Vec<String> = cfg.splits.iter().map(SplitFractions::label).collect();
        assert_eq!(labels, ["30/30", "50/30", "70/30"]);
        assert_eq!(cfg.cell_count(), 60);
        assert_eq!(cfg, ExperimentConfig::with_defaults("d.lmld", "out"));
    }

    #[test]
    fn rejects_empty_lists_and_unknown_keys() {
        assert!(ExperimentConfig::from_json(
            r#"{"dataset":{"path":"d"},"output_dir":"o","seeds":[]}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"dataset":{"path":"d"},"output_dir":"o","colour":1}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"dataset":{"path":"d"},"output_dir":"o","splits":[{"train_fraction":0.8,"test_fraction":0.3}]}"#
        )
        .is_err());
    }

    #[test]
    fn label_column_forms() {
        let cfg = ExperimentConfig::from_json(
            r#"{"dataset":{"path":"d.csv","format":"csv","label_column":3},"output_dir":"o"}"#,
        )
        .unwrap();
        assert_eq!(
            LabelColumn::from(&cfg.dataset.label_column),
            LabelColumn::Index(3)
        );
    }
}
