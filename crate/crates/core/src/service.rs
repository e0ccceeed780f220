//! Newline-delimited JSON scoring over TCP.
//!
//! Each request line is `{"id": "...", "features": [...]}` holding raw,
//! unscaled features. Each response line is
//! `{"id", "probability", "label", "latency_micros", "model"}`, or
//! `{"id", "error"}` when the request cannot be scored. The line
//! `{"ping":true}` is answered with `{"pong":true,"model":"<digest>"}`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::classifier::ClassifierModel;
use crate::dataio::ScalerParams;
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::persist::load_model;
use crate::vae::VaeModel;

/// Scaler, optional encoder and classifier chained together.
#[derive(Debug, Clone)]
pub struct ScoringPipeline {
    scaler: ScalerParams,
    encoder: Option<VaeModel>,
    classifier: ClassifierModel,
    digest: String,
}

impl ScoringPipeline {
    /// Checks that dimensions chain: scaler → encoder input, encoder latent →
    /// classifier input (or scaler → classifier without an encoder).
    pub fn new(
        scaler: ScalerParams,
        encoder: Option<VaeModel>,
        classifier: ClassifierModel,
        digest: impl Into<String>,
    ) -> Result<Self> {
        let feed = match &encoder {
            Some(vae) => {
                if vae.input_dim() != scaler.dim() {
                    return Err(Error::Shape(format!(
                        "scaler has {} features but the encoder expects {}",
                        scaler.dim(),
                        vae.input_dim()
                    )));
                }
                vae.latent_dim()
            }
            None => scaler.dim(),
        };
        if classifier.n_features() != feed {
            return Err(Error::Shape(format!(
                "classifier expects {} features but receives {feed}",
                classifier.n_features()
            )));
        }
        Ok(ScoringPipeline {
            scaler,
            encoder,
            classifier,
            digest: digest.into(),
        })
    }

    /// Loads the three archives; the reported digest is the classifier's.
    pub fn from_archives(scaler: &Path, encoder: Option<&Path>, classifier: &Path) -> Result<Self> {
        let scaler = load_model(scaler)?.0.into_scaler()?;
        let encoder = match encoder {
            Some(p) => Some(load_model(p)?.0.into_vae()?),
            None => None,
        };
        let (model, info) = load_model(classifier)?;
        ScoringPipeline::new(scaler, encoder, model.into_classifier()?, info.digest)
    }

    pub fn input_dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Class-1 probabilities for a batch of raw rows.
    pub fn score(&self, raw: &Matrix) -> Result<Vec<f64>> {
        let scaled = self.scaler.transform(raw)?;
        let features = match &self.encoder {
            Some(vae) => vae.latent_mean(&scaled)?,
            None => scaled,
        };
        self.classifier.predict_proba(&features)
    }

    pub fn score_row(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.input_dim(),
                raw.len()
            )));
        }
        let row = Matrix::new(1, raw.len(), raw.to_vec())?;
        Ok(self.score(&row)?[0])
    }
}

#[derive(Serialize)]
struct ScoreResponse<'a> {
    id: &'a Value,
    probability: f64,
    label: u8,
    latency_micros: u64,
    model: &'a str,
}

#[derive(Serialize)]
struct ErrorResponse<'a> {
    id: &'a Value,
    error: String,
}

#[derive(Serialize)]
struct Pong<'a> {
    pong: bool,
    model: &'a str,
}

fn error_line(id: &Value, error: String) -> String {
    serde_json::to_string(&ErrorResponse { id, error }).expect("response serializes")
}

/// Answers one request line.
pub fn handle_line(pipeline: &ScoringPipeline, line: &str) -> String {
    let start = Instant::now();
    let request: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error_line(&Value::Null, format!("malformed request: {e}")),
    };
    if request.get("ping") == Some(&Value::Bool(true)) {
        return serde_json::to_string(&Pong {
            pong: true,
            model: pipeline.digest(),
        })
        .expect("response serializes");
    }
    let id = request.get("id").unwrap_or(&Value::Null);
    let Some(items) = request.get("features").and_then(Value::as_array) else {
        return error_line(id, "request needs a \"features\" array".into());
    };
    let features: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
    let Some(features) = features else {
        return error_line(id, "features must all be numbers".into());
    };
    if features.len() != pipeline.input_dim() {
        return error_line(
            id,
            format!(
                "expected {} features, got {}",
                pipeline.input_dim(),
                features.len()
            ),
        );
    }
    match pipeline.score_row(&features) {
        Ok(probability) => serde_json::to_string(&ScoreResponse {
            id,
            probability,
            label: u8::from(probability >= 0.5),
            latency_micros: start.elapsed().as_micros() as u64,
            model: pipeline.digest(),
        })
        .expect("response serializes"),
        Err(e) => error_line(id, e.to_string()),
    }
}

/// A running listener.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    served: Arc<AtomicU64>,
    accept_thread: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Number of request lines handled so far.
    pub fn requests_served(&self) -> u64 {
        self.served.load(Ordering::Relaxed)
    }

    /// Stops accepting connections. Open connections finish on their own.
    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        let _ = self.accept_thread.join();
    }

    /// Blocks for the lifetime of the listener.
    pub fn wait(self) {
        let _ = self.accept_thread.join();
    }
}

fn serve_connection(
    stream: TcpStream,
    pipeline: &ScoringPipeline,
    served: &AtomicU64,
) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut response = handle_line(pipeline, &line);
        response.push('\n');
        served.fetch_add(1, Ordering::Relaxed);
        writer.write_all(response.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

/// Binds `addr` and serves each connection on its own thread.
pub fn serve(pipeline: ScoringPipeline, addr: impl ToSocketAddrs) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr).map_err(|e| Error::io("<listener>", e))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::io("<listener>", e))?;
    let pipeline = Arc::new(pipeline);
    let stop = Arc::new(AtomicBool::new(false));
    let served = Arc::new(AtomicU64::new(0));
    let accept_thread = {
        let stop = Arc::clone(&stop);
        let served = Arc::clone(&served);
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let pipeline = Arc::clone(&pipeline);
                let served = Arc::clone(&served);
                std::thread::spawn(move || {
                    let _ = serve_connection(stream, &pipeline, &served);
                });
            }
        })
    };
    Ok(ServerHandle {
        addr: local,
        stop,
        served,
        accept_thread,
    })
}
