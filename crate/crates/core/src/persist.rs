//! The LMLM model archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LMLM" | version u8 (= 1) | kind u8 | meta_len u32 | meta (JSON, meta_len bytes)
//!        | payload_len u64 | payload (payload_len bytes)
//! ```
//!
//! The metadata is a JSON object with sorted keys. It always holds `kind`,
//! `digest` (FNV-1a 64 of the payload, 16 hex digits), `payload_len` and
//! `writer`; the remaining keys describe dimensions and hyperparameters.
//!
//! Payload blocks, with `u32` counts and `f64` values:
//!
//! | kind | tag | payload |
//! |------|-----|---------|
//! | vae | 0 | n_encoder_hidden, n_decoder_hidden, then each layer in the order encoder hidden, mean head, log-variance head, decoder hidden, output as: activation u8, in, out, weights (in × out, row-major), bias (out) |
//! | dtree | 1 | n_features, tree |
//! | rforest | 2 | n_features, n_trees, trees |
//! | gbdt | 3 | n_features, initial_score, learning_rate, n_trees, trees |
//! | logreg | 4 | d, bias, weights (d) |
//! | gnb | 5 | d, log priors (2), means (2 × d), variances (2 × d) |
//! | scaler | 6 | d, min (d), max (d) |
//!
//! A tree is `node_count` followed by its nodes in preorder: a leaf is tag
//! `0` and its value, a split is tag `1`, the feature index and the threshold.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baseline::{GaussianNbModel, LogisticRegressionModel, LogisticRegressionParams};
use crate::classifier::ClassifierModel;
use crate::dataio::ScalerParams;
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::trees::{
    member_params, DecisionTreeModel, DecisionTreeParams, GbdtModel, GbdtParams, RandomForestModel,
    RandomForestParams, Tree, TreeNode,
};
use crate::vae::{Activation, DenseLayer, VaeModel};

pub const MAGIC: &[u8; 4] = b"LMLM";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vae,
    Dtree,
    Rforest,
    Gbdt,
    Logreg,
    Gnb,
    Scaler,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Vae,
        ModelKind::Dtree,
        ModelKind::Rforest,
        ModelKind::Gbdt,
        ModelKind::Logreg,
        ModelKind::Gnb,
        ModelKind::Scaler,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        ModelKind::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vae => "vae",
            ModelKind::Dtree => "dtree",
            ModelKind::Rforest => "rforest",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Logreg => "logreg",
            ModelKind::Gnb => "gnb",
            ModelKind::Scaler => "scaler",
        }
    }
}

/// Borrowed view of anything that can be archived.
#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    Vae(&'a VaeModel),
    Classifier(&'a ClassifierModel),
    Scaler(&'a ScalerParams),
}

impl<'a> From<&'a VaeModel> for ModelRef<'a> {
    fn from(m: &'a VaeModel) -> Self {
        ModelRef::Vae(m)
    }
}

impl<'a> From<&'a ClassifierModel> for ModelRef<'a> {
    fn from(m: &'a ClassifierModel) -> Self {
        ModelRef::Classifier(m)
    }
}

impl<'a> From<&'a ScalerParams> for ModelRef<'a> {
    fn from(m: &'a ScalerParams) -> Self {
        ModelRef::Scaler(m)
    }
}

impl<'a> From<&'a SavedModel> for ModelRef<'a> {
    fn from(m: &'a SavedModel) -> Self {
        match m {
            SavedModel::Vae(v) => ModelRef::Vae(v),
            SavedModel::Classifier(c) => ModelRef::Classifier(c),
            SavedModel::Scaler(s) => ModelRef::Scaler(s),
        }
    }
}

impl ModelRef<'_> {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelRef::Vae(_) => ModelKind::Vae,
            ModelRef::Scaler(_) => ModelKind::Scaler,
            ModelRef::Classifier(c) => match c {
                ClassifierModel::DecisionTree(_) => ModelKind::Dtree,
                ClassifierModel::RandomForest(_) => ModelKind::Rforest,
                ClassifierModel::Gbdt(_) => ModelKind::Gbdt,
                ClassifierModel::LogisticRegression(_) => ModelKind::Logreg,
                ClassifierModel::NaiveBayes(_) => ModelKind::Gnb,
            },
        }
    }
}

/// A model read back from an archive.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Vae(VaeModel),
    Classifier(ClassifierModel),
    Scaler(ScalerParams),
}

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        ModelRef::from(self).kind()
    }

    pub fn into_vae(self) -> Result<VaeModel> {
        match self {
            SavedModel::Vae(v) => Ok(v),
            other => Err(Error::Format(format!(
                "expected a vae archive, found {}",
                other.kind().name()
            ))),
        }
    }

    pub fn into_classifier(self) -> Result<ClassifierModel> {
        match self {
            SavedModel::Classifier(c) => Ok(c),
            other => Err(Error::Format(format!(
                "expected a classifier archive, found {}",
                other.kind().name()
            ))),
        }
    }

    pub fn into_scaler(self) -> Result<ScalerParams> {
        match self {
            SavedModel::Scaler(s) => Ok(s),
            other => Err(Error::Format(format!(
                "expected a scaler archive, found {}",
                other.kind().name()
            ))),
        }
    }
}

/// Header facts about an archive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveInfo {
    pub kind: ModelKind,
    pub version: u8,
    pub digest: String,
    pub payload_len: u64,
    pub metadata: Value,
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn count(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Integrity(format!("count {v} exceeds u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::Integrity(format!("non-finite parameter {v}")));
        }
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        vs.iter().try_for_each(|&v| self.f64(v))
    }

    fn tree(&mut self, tree: &Tree) -> Result<()> {
        let nodes = tree.preorder();
        self.count(nodes.len())?;
        for node in nodes {
            match node {
                TreeNode::Leaf { value } => {
                    self.u8(0);
                    self.f64(value)?;
                }
                TreeNode::Split {
                    feature, threshold, ..
                } => {
                    self.u8(1);
                    self.count(feature)?;
                    self.f64(threshold)?;
                }
            }
        }
        Ok(())
    }
}

struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "payload truncated at byte {}",
                self.pos
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn count(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "non-finite value before byte {}",
                self.pos
            )));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        // bound the allocation by what the payload can hold
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Format(format!("payload too short for {n} values")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    fn tree(&mut self) -> Result<Tree> {
        let n = self.count()?;
        if n > self.bytes.len() - self.pos {
            return Err(Error::Format(format!(
                "payload too short for {n} tree nodes"
            )));
        }
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            records.push(match self.u8()? {
                0 => TreeNode::Leaf { value: self.f64()? },
                1 => TreeNode::Split {
                    feature: self.count()?,
                    threshold: self.f64()?,
                    left: 0,
                    right: 0,
                },
                t => return Err(Error::Format(format!("unknown tree node tag {t}"))),
            });
        }
        Tree::from_preorder(&records)
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing payload bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn params_json<T: Serialize>(p: &T) -> Value {
    serde_json::to_value(p).expect("parameter structs serialize")
}

fn encode_payload(model: ModelRef<'_>) -> Result<(Vec<u8>, Value)> {
    let mut w = PayloadWriter { buf: Vec::new() };
    let meta = match model {
        ModelRef::Vae(m) => {
            w.count(m.encoder_hidden().len())?;
            w.count(m.decoder_hidden().len())?;
            for layer in m.layers() {
                w.u8(layer.activation().tag());
                w.count(layer.in_dim())?;
                w.count(layer.out_dim())?;
                w.f64s(layer.weights().as_slice())?;
                w.f64s(layer.bias())?;
            }
            json!({
                "input_dim": m.input_dim(),
                "hidden_dims": m.hidden_dims(),
                "latent_dim": m.latent_dim(),
                "param_count": m.param_count(),
            })
        }
        ModelRef::Scaler(s) => {
            w.count(s.dim())?;
            w.f64s(&s.min)?;
            w.f64s(&s.max)?;
            json!({ "input_dim": s.dim() })
        }
        ModelRef::Classifier(c) => match c {
            ClassifierModel::DecisionTree(m) => {
                w.count(m.n_features)?;
                w.tree(&m.tree)?;
                json!({
                    "input_dim": m.n_features,
                    "node_count": m.tree.node_count(),
                    "params": params_json(&m.params),
                })
            }
            ClassifierModel::RandomForest(m) => {
                w.count(m.n_features)?;
                w.count(m.trees.len())?;
                for t in &m.trees {
                    w.tree(&t.tree)?;
                }
                json!({
                    "input_dim": m.n_features,
                    "n_trees": m.trees.len(),
                    "params": params_json(&m.params),
                })
            }
            ClassifierModel::Gbdt(m) => {
                w.count(m.n_features)?;
                w.f64(m.initial_score)?;
                w.f64(m.learning_rate)?;
                w.count(m.trees.len())?;
                for t in &m.trees {
                    w.tree(t)?;
                }
                json!({
                    "input_dim": m.n_features,
                    "n_trees": m.trees.len(),
                    "params": params_json(&m.params),
                })
            }
            ClassifierModel::LogisticRegression(m) => {
                w.count(m.weights.len())?;
                w.f64(m.bias)?;
                w.f64s(&m.weights)?;
                json!({ "input_dim": m.weights.len(), "params": params_json(&m.params) })
            }
            ClassifierModel::NaiveBayes(m) => {
                w.count(m.n_features())?;
                w.f64s(&m.class_log_priors)?;
                for c in 0..2 {
                    w.f64s(&m.means[c])?;
                }
                for c in 0..2 {
                    w.f64s(&m.variances[c])?;
                }
                json!({ "input_dim": m.n_features() })
            }
        },
    };
    Ok((w.buf, meta))
}

fn params_from<T: for<'de> Deserialize<'de>>(meta: &Value) -> Result<T> {
    serde_json::from_value(meta.get("params").cloned().unwrap_or(Value::Null))
        .map_err(|e| Error::Format(format!("bad params in metadata: {e}")))
}

fn check_tree_width(tree: &Tree, n_features: usize) -> Result<()> {
    match tree.max_feature() {
        Some(f) if f >= n_features => Err(Error::Format(format!(
            "tree splits on feature {f} but the model has {n_features}"
        ))),
        _ => Ok(()),
    }
}

fn decode_payload(kind: ModelKind, payload: &[u8], meta: &Value) -> Result<SavedModel> {
    let mut r = PayloadReader {
        bytes: payload,
        pos: 0,
    };
    let model = match kind {
        ModelKind::Vae => {
            let n_enc = r.count()?;
            let n_dec = r.count()?;
            let mut layers = Vec::new();
            for _ in 0..n_enc + n_dec + 3 {
                let act = r.u8()?;
                let activation = Activation::from_tag(act)
                    .ok_or_else(|| Error::Format(format!("unknown activation tag {act}")))?;
                let (i, o) = (r.count()?, r.count()?);
                let weights = Matrix::new(i, o, r.f64s(i.saturating_mul(o))?)?;
                layers.push(DenseLayer::new(weights, r.f64s(o)?, activation)?);
            }
            let mut it = layers.into_iter();
            let enc: Vec<DenseLayer> = it.by_ref().take(n_enc).collect();
            let mean = it.next().unwrap();
            let logvar = it.next().unwrap();
            let dec: Vec<DenseLayer> = it.by_ref().take(n_dec).collect();
            let out = it.next().unwrap();
            SavedModel::Vae(VaeModel::from_layers(enc, mean, logvar, dec, out)?)
        }
        ModelKind::Scaler => {
            let d = r.count()?;
            let min = r.f64s(d)?;
            let max = r.f64s(d)?;
            SavedModel::Scaler(ScalerParams::new(min, max)?)
        }
        ModelKind::Dtree => {
            let n_features = r.count()?;
            let tree = r.tree()?;
            check_tree_width(&tree, n_features)?;
            let params: DecisionTreeParams = params_from(meta)?;
            SavedModel::Classifier(ClassifierModel::DecisionTree(DecisionTreeModel {
                tree,
                n_features,
                params,
            }))
        }
        ModelKind::Rforest => {
            let n_features = r.count()?;
            let n_trees = r.count()?;
            let params: RandomForestParams = params_from(meta)?;
            let mut trees = Vec::new();
            for t in 0..n_trees {
                let tree = r.tree()?;
                check_tree_width(&tree, n_features)?;
                trees.push(DecisionTreeModel {
                    tree,
                    n_features,
                    params: member_params(&params, n_features, t),
                });
            }
            SavedModel::Classifier(ClassifierModel::RandomForest(RandomForestModel {
                trees,
                n_features,
                params,
            }))
        }
        ModelKind::Gbdt => {
            let n_features = r.count()?;
            let initial_score = r.f64()?;
            let learning_rate = r.f64()?;
            let n_trees = r.count()?;
            let mut trees = Vec::new();
            for _ in 0..n_trees {
                let tree = r.tree()?;
                check_tree_width(&tree, n_features)?;
                trees.push(tree);
            }
            let params: GbdtParams = params_from(meta)?;
            SavedModel::Classifier(ClassifierModel::Gbdt(GbdtModel {
                initial_score,
                learning_rate,
                trees,
                n_features,
                params,
            }))
        }
        ModelKind::Logreg => {
            let d = r.count()?;
            let bias = r.f64()?;
            let weights = r.f64s(d)?;
            let params: LogisticRegressionParams = params_from(meta)?;
            SavedModel::Classifier(ClassifierModel::LogisticRegression(
                LogisticRegressionModel {
                    weights,
                    bias,
                    params,
                },
            ))
        }
        ModelKind::Gnb => {
            let d = r.count()?;
            let priors = r.f64s(2)?;
            let means = [r.f64s(d)?, r.f64s(d)?];
            let variances = [r.f64s(d)?, r.f64s(d)?];
            if variances.iter().flatten().any(|&v| v <= 0.0) {
                return Err(Error::Format("naive Bayes variance is not positive".into()));
            }
            SavedModel::Classifier(ClassifierModel::NaiveBayes(GaussianNbModel {
                class_log_priors: [priors[0], priors[1]],
                means,
                variances,
            }))
        }
    };
    r.finish()?;
    Ok(model)
}

/// Serializes a model to archive bytes. Deterministic: the same model always
/// yields the same bytes.
pub fn encode_archive<'a>(model: impl Into<ModelRef<'a>>) -> Result<Vec<u8>> {
    encode_with_info(model.into()).map(|(bytes, _)| bytes)
}

fn encode_with_info(model: ModelRef<'_>) -> Result<(Vec<u8>, ArchiveInfo)> {
    let kind = model.kind();
    let (payload, mut meta) = encode_payload(model)?;
    let digest = format!("{:016x}", fnv1a64(&payload));
    let obj = meta.as_object_mut().expect("metadata is an object");
    obj.insert("kind".into(), json!(kind.name()));
    obj.insert("digest".into(), json!(digest));
    obj.insert("payload_len".into(), json!(payload.len()));
    obj.insert(
        "writer".into(),
        json!(concat!("latentml ", env!("CARGO_PKG_VERSION"))),
    );
    let meta_bytes = serde_json::to_vec(&meta).expect("metadata serializes");

    let mut out = Vec::with_capacity(4 + 2 + 4 + meta_bytes.len() + 8 + payload.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind.tag());
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let info = ArchiveInfo {
        kind,
        version: VERSION,
        digest,
        payload_len: payload.len() as u64,
        metadata: meta,
    };
    Ok((out, info))
}

/// Parses the header and metadata and verifies the payload digest.
fn parse_archive(bytes: &[u8]) -> Result<(ArchiveInfo, &[u8])> {
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not an LMLM archive (bad magic)".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "unsupported archive version {}",
            bytes[4]
        )));
    }
    let kind = ModelKind::from_tag(bytes[5])
        .ok_or_else(|| Error::Format(format!("unknown model kind tag {}", bytes[5])))?;
    let meta_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let meta_end = 10usize.saturating_add(meta_len);
    if bytes.len() < meta_end.saturating_add(8) {
        return Err(Error::Format("archive truncated in metadata".into()));
    }
    let metadata: Value = serde_json::from_slice(&bytes[10..meta_end])
        .map_err(|e| Error::Format(format!("bad metadata: {e}")))?;
    let payload_len = u64::from_le_bytes(bytes[meta_end..meta_end + 8].try_into().unwrap());
    let payload = &bytes[meta_end + 8..];
    if payload.len() as u64 != payload_len {
        return Err(Error::Format(format!(
            "payload is {} bytes, header says {payload_len}",
            payload.len()
        )));
    }
    let recorded = metadata
        .get("digest")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Format("metadata lacks a digest".into()))?
        .to_string();
    let actual = format!("{:016x}", fnv1a64(payload));
    if recorded != actual {
        return Err(Error::Format(format!(
            "digest mismatch: recorded {recorded}, payload hashes to {actual}"
        )));
    }
    if metadata.get("kind").and_then(Value::as_str) != Some(kind.name()) {
        return Err(Error::Format(
            "metadata kind disagrees with the header tag".into(),
        ));
    }
    Ok((
        ArchiveInfo {
            kind,
            version: VERSION,
            digest: recorded,
            payload_len,
            metadata,
        },
        payload,
    ))
}

/// Reverses [`encode_archive`].
pub fn decode_archive(bytes: &[u8]) -> Result<(SavedModel, ArchiveInfo)> {
    let (info, payload) = parse_archive(bytes)?;
    let model = decode_payload(info.kind, payload, &info.metadata)?;
    Ok((model, info))
}

/// Writes an archive atomically (temporary file in the same directory, then rename).
pub fn save_model<'a>(
    model: impl Into<ModelRef<'a>>,
    path: impl AsRef<Path>,
) -> Result<ArchiveInfo> {
    let path = path.as_ref();
    let (bytes, info) = encode_with_info(model.into())?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes)
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(info)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(SavedModel, ArchiveInfo)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_archive(&bytes)
}

/// Header and metadata only, with the digest verified.
pub fn inspect(path: impl AsRef<Path>) -> Result<ArchiveInfo> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_archive(&bytes).map(|(info, _)| info)
}
