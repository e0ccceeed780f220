use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::thread;

use latentml::classifier::{ClassifierKind, ClassifierParams};
use latentml::dataio::{fit_scaler, generate_synthetic, SyntheticSpec};
use latentml::persist::{inspect, save_model};
use latentml::service::{serve, ScoringPipeline};
use latentml::vae::{extract_latent, init_vae, train_vae, TrainConfig};
use latentml::Error;
use serde_json::Value;

struct Archives {
    scaler: PathBuf,
    vae: PathBuf,
    latent_rf: PathBuf,
    raw_gbdt: PathBuf,
}

fn archives(dir: &Path) -> Archives {
    let spec = SyntheticSpec {
        n_samples: 300,
        feature_dim: 12,
        n_informative: 4,
        class_separation: 2.0,
        label_balance: 0.5,
    };
    let ds = generate_synthetic(&spec, 3).unwrap();
    let scaler = fit_scaler(&ds).unwrap();
    let scaled = ds
        .with_features(scaler.transform(ds.features()).unwrap())
        .unwrap();
    let config = TrainConfig {
        epochs: 5,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let (vae, _) = train_vae(&init_vae(12, &[10], 4, 3).unwrap(), &scaled, &config).unwrap();
    let latent = extract_latent(&vae, &scaled).unwrap();
    let y = ds.binary_labels().unwrap();
    let params = ClassifierParams::default();
    let rf = params
        .train(ClassifierKind::RandomForest, latent.features(), &y, 3)
        .unwrap();
    let gbdt = params
        .train(ClassifierKind::Gbdt, scaled.features(), &y, 3)
        .unwrap();
    let a = Archives {
        scaler: dir.join("scaler.lmlm"),
        vae: dir.join("vae.lmlm"),
        latent_rf: dir.join("rf.lmlm"),
        raw_gbdt: dir.join("gbdt.lmlm"),
    };
    save_model(&scaler, &a.scaler).unwrap();
    save_model(&vae, &a.vae).unwrap();
    save_model(&rf, &a.latent_rf).unwrap();
    save_model(&gbdt, &a.raw_gbdt).unwrap();
    a
}

fn exchange(addr: SocketAddr, lines: &[String]) -> Vec<Value> {
    let stream = TcpStream::connect(addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    lines
        .iter()
        .map(|line| {
            writeln!(writer, "{line}").unwrap();
            let mut reply = String::new();
            reader.read_line(&mut reply).unwrap();
            serde_json::from_str(&reply).unwrap()
        })
        .collect()
}

#[test]
fn hundred_concurrent_pings() {
    let dir = tempfile::tempdir().unwrap();
    let a = archives(dir.path());
    let pipeline = ScoringPipeline::from_archives(&a.scaler, Some(&a.vae), &a.latent_rf).unwrap();
    let server = serve(pipeline, "127.0.0.1:0").unwrap();
    let addr = server.local_addr();
    let digest = inspect(&a.latent_rf).unwrap().digest;

    let handles: Vec<_> = (0..100)
        .map(|_| thread::spawn(move || exchange(addr, &[r#"{"ping":true}"#.to_string()]).remove(0)))
        .collect();
    for h in handles {
        let pong = h.join().unwrap();
        assert_eq!(pong["pong"], true);
        assert_eq!(pong["model"], digest.as_str());
    }
    assert_eq!(server.requests_served(), 100);
    server.shutdown();
}

#[test]
fn repeated_requests_and_errors_on_one_connection() {
    let dir = tempfile::tempdir().unwrap();
    let a = archives(dir.path());
    let pipeline = ScoringPipeline::from_archives(&a.scaler, Some(&a.vae), &a.latent_rf).unwrap();
    let server = serve(pipeline, "127.0.0.1:0").unwrap();
    let request = serde_json::json!({"id": "r1", "features": vec![0.25; 12]}).to_string();
    let replies = exchange(
        server.local_addr(),
        &[
            request.clone(),
            r#"{"id": "short", "features": [1, 2, 3]}"#.to_string(),
            "not json".to_string(),
            request,
        ],
    );
    assert_eq!(replies[0]["id"], "r1");
    assert_eq!(replies[0]["probability"], replies[3]["probability"]);
    let p = replies[0]["probability"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(replies[0]["label"], u8::from(p >= 0.5));
    assert!(replies[0]["latency_micros"].is_u64());
    assert_eq!(replies[1]["id"], "short");
    assert!(replies[1]["error"]
        .as_str()
        .unwrap()
        .contains("expected 12"));
    assert!(replies[2]["error"].is_string());
    server.shutdown();
}

#[test]
fn raw_mode_serving_without_an_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let a = archives(dir.path());
    let pipeline = ScoringPipeline::from_archives(&a.scaler, None, &a.raw_gbdt).unwrap();
    let server = serve(pipeline, "127.0.0.1:0").unwrap();
    let replies = exchange(
        server.local_addr(),
        &[serde_json::json!({"id": 7, "features": vec![0.5; 12]}).to_string()],
    );
    assert_eq!(replies[0]["id"], 7);
    assert!(replies[0]["probability"].is_f64());
    server.shutdown();
}

#[test]
fn mismatched_archives_refuse_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let a = archives(dir.path());
    // the latent classifier expects 4 inputs, the scaler emits 12
    let err = ScoringPipeline::from_archives(&a.scaler, None, &a.latent_rf).unwrap_err();
    assert!(matches!(err, Error::Shape(_)));
    let err = ScoringPipeline::from_archives(&a.scaler, Some(&a.vae), &a.raw_gbdt).unwrap_err();
    assert!(matches!(err, Error::Shape(_)));
    // a classifier archive where the scaler belongs
    let err = ScoringPipeline::from_archives(&a.latent_rf, Some(&a.vae), &a.latent_rf).unwrap_err();
    assert!(matches!(err, Error::Format(_) | Error::Precondition(_)));
}
