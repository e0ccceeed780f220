//! Fixtures shared by the benchmarks.

use latentml::classifier::{ClassifierKind, ClassifierParams};
use latentml::dataio::{fit_scaler, generate_synthetic, SyntheticSpec};
use latentml::service::ScoringPipeline;
use latentml::vae::{extract_latent, init_vae, train_vae, TrainConfig};
use latentml::{Dataset, Matrix, RngState};

pub fn synthetic(n: usize, d: usize, informative: usize, seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        n_samples: n,
        feature_dim: d,
        n_informative: informative,
        class_separation: 1.0,
        label_balance: 0.5,
    };
    generate_synthetic(&spec, seed).expect("valid synthetic spec")
}

/// Scaler, a briefly trained encoder with a 32-d latent space, and a random
/// forest on the latent features: the deployment shape the service runs.
pub fn latent_rf_pipeline(d: usize) -> ScoringPipeline {
    let ds = synthetic(2000, d, 32.min(d), 1);
    let scaler = fit_scaler(&ds).expect("non-empty");
    let scaled = ds
        .with_features(scaler.transform(ds.features()).expect("width"))
        .expect("same rows");
    let config = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (vae, _) =
        train_vae(&init_vae(d, &[128], 32, 1).expect("dims"), &scaled, &config).expect("training");
    let latent = extract_latent(&vae, &scaled).expect("encode");
    let rf = ClassifierParams::default()
        .train(
            ClassifierKind::RandomForest,
            latent.features(),
            &ds.binary_labels().expect("binary"),
            1,
        )
        .expect("forest");
    ScoringPipeline::new(scaler, Some(vae), rf, "bench").expect("dimensions chain")
}

pub fn random_rows(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = RngState::new(seed);
    Matrix::new(n, d, (0..n * d).map(|_| rng.uniform()).collect()).expect("shape")
}
