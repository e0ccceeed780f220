//! Dense variational autoencoder trained with manual backpropagation and Adam.
//!
//! The encoder maps `x` through ReLU layers to two linear heads, `z_mean`
//! and `z_log_var`, parameterizing a diagonal Gaussian posterior. A sample
//! `z = z_mean + exp(z_log_var / 2) ⊙ ε` feeds the ReLU decoder whose sigmoid
//! output layer reconstructs `x`. The loss per row is the squared error summed
//! over features plus the closed-form KL divergence to `N(0, I)` summed over
//! latent dimensions; both are averaged over the batch.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix, RngState};

pub const DEFAULT_HIDDEN: [usize; 2] = [512, 128];
pub const DEFAULT_LATENT: usize = 32;

/// Bounds applied to `z_log_var` before it is exponentiated.
pub const LOG_VAR_MIN: f64 = -30.0;
pub const LOG_VAR_MAX: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => (out > 0.0) as u8 as f64,
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Linear => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Fully connected layer computing `act(x · W + b)`; `W` is `in_dim × out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::Shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.cols()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Matrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut RngState) -> Self {
        let bound = glorot_bound(in_dim, out_dim);
        let w = (0..in_dim * out_dim)
            .map(|_| (2.0 * rng.uniform() - 1.0) * bound)
            .collect();
        DenseLayer {
            weights: Matrix::from_vec_unchecked(in_dim, out_dim, w),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.weights)?;
        let width = self.out_dim();
        let act = self.activation;
        for (i, v) in z.as_mut_slice().iter_mut().enumerate() {
            *v = act.apply(*v + self.bias[i % width]);
        }
        Ok(z)
    }

    fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    encoder_hidden: Vec<DenseLayer>,
    mean_head: DenseLayer,
    logvar_head: DenseLayer,
    decoder_hidden: Vec<DenseLayer>,
    output_layer: DenseLayer,
}

/// Per-sample batch means of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Precondition(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Precondition("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Creates a model with Glorot-uniform weights and zero biases.
///
/// The decoder mirrors `hidden_dims` in reverse. Weights are drawn layer by
/// layer in the canonical order of [`VaeModel::layers`], row-major within each.
pub fn init_vae(
    input_dim: usize,
    hidden_dims: &[usize],
    latent_dim: usize,
    seed: u64,
) -> Result<VaeModel> {
    if input_dim == 0 || latent_dim == 0 || hidden_dims.contains(&0) {
        return Err(Error::Precondition(
            "VAE dimensions must be positive".into(),
        ));
    }
    let mut rng = RngState::new(seed);
    let mut encoder_hidden = Vec::new();
    let mut width = input_dim;
    for &h in hidden_dims {
        encoder_hidden.push(DenseLayer::glorot(width, h, Activation::Relu, &mut rng));
        width = h;
    }
    let mean_head = DenseLayer::glorot(width, latent_dim, Activation::Linear, &mut rng);
    let logvar_head = DenseLayer::glorot(width, latent_dim, Activation::Linear, &mut rng);
    let mut decoder_hidden = Vec::new();
    let mut width = latent_dim;
    for &h in hidden_dims.iter().rev() {
        decoder_hidden.push(DenseLayer::glorot(width, h, Activation::Relu, &mut rng));
        width = h;
    }
    let output_layer = DenseLayer::glorot(width, input_dim, Activation::Sigmoid, &mut rng);
    VaeModel::from_layers(
        encoder_hidden,
        mean_head,
        logvar_head,
        decoder_hidden,
        output_layer,
    )
}

impl VaeModel {
    /// Assembles a model from explicit layers, checking that dimensions chain.
    pub fn from_layers(
        encoder_hidden: Vec<DenseLayer>,
        mean_head: DenseLayer,
        logvar_head: DenseLayer,
        decoder_hidden: Vec<DenseLayer>,
        output_layer: DenseLayer,
    ) -> Result<Self> {
        let model = VaeModel {
            encoder_hidden,
            mean_head,
            logvar_head,
            decoder_hidden,
            output_layer,
        };
        let chain = |layers: &[&DenseLayer], what: &str| -> Result<()> {
            for pair in layers.windows(2) {
                if pair[0].out_dim() != pair[1].in_dim() {
                    return Err(Error::Shape(format!(
                        "{what}: layer of width {} feeds a layer expecting {}",
                        pair[0].out_dim(),
                        pair[1].in_dim()
                    )));
                }
            }
            Ok(())
        };
        let mut enc: Vec<&DenseLayer> = model.encoder_hidden.iter().collect();
        enc.push(&model.mean_head);
        chain(&enc, "encoder")?;
        enc.pop();
        enc.push(&model.logvar_head);
        chain(&enc, "encoder")?;
        let mut dec: Vec<&DenseLayer> = vec![&model.mean_head];
        dec.extend(model.decoder_hidden.iter());
        dec.push(&model.output_layer);
        // mean head output feeds the decoder through z
        chain(&dec[1..], "decoder")?;
        let first_dec_in = dec[1].in_dim();
        if first_dec_in != model.latent_dim() || model.logvar_head.out_dim() != model.latent_dim() {
            return Err(Error::Shape("latent widths disagree".into()));
        }
        if model.output_layer.out_dim() != model.input_dim() {
            return Err(Error::Shape(format!(
                "output width {} differs from input width {}",
                model.output_layer.out_dim(),
                model.input_dim()
            )));
        }
        Ok(model)
    }

    /// A model whose every parameter is zero.
    pub fn zeroed(input_dim: usize, hidden_dims: &[usize], latent_dim: usize) -> Result<Self> {
        let mut m = init_vae(input_dim, hidden_dims, latent_dim, 0)?;
        for layer in m.layers_mut() {
            *layer = DenseLayer::zeros(layer.in_dim(), layer.out_dim(), layer.activation);
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder_hidden
            .first()
            .unwrap_or(&self.mean_head)
            .in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mean_head.out_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.encoder_hidden
            .iter()
            .map(DenseLayer::out_dim)
            .collect()
    }

    pub fn encoder_hidden(&self) -> &[DenseLayer] {
        &self.encoder_hidden
    }

    pub fn decoder_hidden(&self) -> &[DenseLayer] {
        &self.decoder_hidden
    }

    pub fn mean_head(&self) -> &DenseLayer {
        &self.mean_head
    }

    pub fn logvar_head(&self) -> &DenseLayer {
        &self.logvar_head
    }

    pub fn output_layer(&self) -> &DenseLayer {
        &self.output_layer
    }

    /// All layers in canonical order: encoder hidden, mean head, log-variance
    /// head, decoder hidden, output.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut v: Vec<&DenseLayer> = self.encoder_hidden.iter().collect();
        v.push(&self.mean_head);
        v.push(&self.logvar_head);
        v.extend(self.decoder_hidden.iter());
        v.push(&self.output_layer);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut v: Vec<&mut DenseLayer> = self.encoder_hidden.iter_mut().collect();
        v.push(&mut self.mean_head);
        v.push(&mut self.logvar_head);
        v.extend(self.decoder_hidden.iter_mut());
        v.push(&mut self.output_layer);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} input features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn encoder_trunk(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let mut acts = Vec::with_capacity(self.encoder_hidden.len());
        for layer in &self.encoder_hidden {
            let next = layer.forward(acts.last().unwrap_or(x))?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Posterior parameters `(z_mean, z_log_var)`, each `batch × latent_dim`.
    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        self.check_input(x)?;
        let trunk = self.encoder_trunk(x)?;
        let h = trunk.last().unwrap_or(x);
        Ok((self.mean_head.forward(h)?, self.logvar_head.forward(h)?))
    }

    /// `z_mean` only; the deterministic latent representation.
    pub fn latent_mean(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let trunk = self.encoder_trunk(x)?;
        self.mean_head.forward(trunk.last().unwrap_or(x))
    }

    /// Reconstruction mean, `batch × input_dim`, every value in `(0, 1)`.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "decoder expects {} latent dims, got {}",
                self.latent_dim(),
                z.cols()
            )));
        }
        let mut h = None;
        for layer in &self.decoder_hidden {
            h = Some(layer.forward(h.as_ref().unwrap_or(z))?);
        }
        self.output_layer.forward(h.as_ref().unwrap_or(z))
    }
}

/// `z = z_mean + exp(z_log_var / 2) ⊙ ε` with `ε` drawn from `rng`.
pub fn reparameterize(z_mean: &Matrix, z_log_var: &Matrix, rng: &mut RngState) -> Result<Matrix> {
    let eps = Matrix::from_vec_unchecked(
        z_mean.rows(),
        z_mean.cols(),
        rng.standard_normal(z_mean.rows() * z_mean.cols()),
    );
    reparameterize_with_noise(z_mean, z_log_var, &eps)
}

/// Reparameterization with caller-supplied noise.
pub fn reparameterize_with_noise(
    z_mean: &Matrix,
    z_log_var: &Matrix,
    eps: &Matrix,
) -> Result<Matrix> {
    if z_mean.shape() != z_log_var.shape() || z_mean.shape() != eps.shape() {
        return Err(Error::Shape(format!(
            "z_mean {:?}, z_log_var {:?} and noise {:?} differ",
            z_mean.shape(),
            z_log_var.shape(),
            eps.shape()
        )));
    }
    let data = z_mean
        .as_slice()
        .iter()
        .zip(z_log_var.as_slice())
        .zip(eps.as_slice())
        .map(|((m, lv), e)| m + (0.5 * clamp_log_var(*lv)).exp() * e)
        .collect();
    Matrix::new(z_mean.rows(), z_mean.cols(), data)
}

#[inline]
fn clamp_log_var(lv: f64) -> f64 {
    lv.clamp(LOG_VAR_MIN, LOG_VAR_MAX)
}

/// Squared-error reconstruction plus KL to the standard-normal prior.
pub fn vae_loss(
    x: &Matrix,
    x_hat: &Matrix,
    z_mean: &Matrix,
    z_log_var: &Matrix,
) -> Result<LossBreakdown> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape(format!(
            "input {:?} and reconstruction {:?} differ",
            x.shape(),
            x_hat.shape()
        )));
    }
    if z_mean.shape() != z_log_var.shape() || z_mean.rows() != x.rows() {
        return Err(Error::Shape(
            "latent statistics do not match the batch".into(),
        ));
    }
    let batch = x.rows().max(1) as f64;
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let kl_sum: f64 = z_mean
        .as_slice()
        .iter()
        .zip(z_log_var.as_slice())
        .map(|(m, lv)| {
            let lv = clamp_log_var(*lv);
            0.5 * (m * m + lv.exp() - lv - 1.0)
        })
        .sum();
    let reconstruction = sse / batch;
    let kl = kl_sum / batch;
    Ok(LossBreakdown {
        total: reconstruction + kl,
        reconstruction,
        kl,
    })
}

/// Gradient of one layer's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer, in the order of [`VaeModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|g| {
            g.weights.as_slice().iter().all(|v| v.is_finite())
                && g.bias.iter().all(|v| v.is_finite())
        })
    }
}

/// Loss and analytic gradients for one batch, sampling `ε` from `rng`.
pub fn backward(
    model: &VaeModel,
    batch: &Matrix,
    rng: &mut RngState,
) -> Result<(LossBreakdown, Gradients)> {
    let eps = Matrix::from_vec_unchecked(
        batch.rows(),
        model.latent_dim(),
        rng.standard_normal(batch.rows() * model.latent_dim()),
    );
    backward_with_noise(model, batch, &eps)
}

/// Loss for a batch with fixed noise; a deterministic function of the parameters.
pub fn loss_with_noise(model: &VaeModel, batch: &Matrix, eps: &Matrix) -> Result<LossBreakdown> {
    let (mean, logvar) = model.encode(batch)?;
    let z = reparameterize_with_noise(&mean, &logvar, eps)?;
    let x_hat = model.decode(&z)?;
    vae_loss(batch, &x_hat, &mean, &logvar)
}

/// Backpropagates a dense stack given the upstream gradient of its output.
/// `inputs[i]` is the input of `layers[i]`, `outputs[i]` its activation.
fn backprop_stack(
    layers: &[&DenseLayer],
    inputs: &[&Matrix],
    outputs: &[&Matrix],
    mut upstream: Matrix,
    grads: &mut [Option<LayerGradient>],
    need_input_grad: bool,
) -> Result<Option<Matrix>> {
    for i in (0..layers.len()).rev() {
        let layer = layers[i];
        let act = layer.activation;
        for (g, &o) in upstream
            .as_mut_slice()
            .iter_mut()
            .zip(outputs[i].as_slice())
        {
            *g *= act.derivative_from_output(o);
        }
        let dw = inputs[i].t_matmul(&upstream)?;
        let mut db = vec![0.0; layer.out_dim()];
        for row in upstream.iter_rows() {
            for (b, g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        grads[i] = Some(LayerGradient {
            weights: dw,
            bias: db,
        });
        if i > 0 || need_input_grad {
            upstream = upstream.matmul_t(&layer.weights)?;
        } else {
            return Ok(None);
        }
    }
    Ok(Some(upstream))
}

/// Loss and exact gradients for a batch under the supplied noise `eps`.
pub fn backward_with_noise(
    model: &VaeModel,
    batch: &Matrix,
    eps: &Matrix,
) -> Result<(LossBreakdown, Gradients)> {
    model.check_input(batch)?;
    let b = batch.rows();
    let latent = model.latent_dim();
    if eps.shape() != (b, latent) {
        return Err(Error::Shape(format!(
            "noise {:?} does not match batch {b} × latent {latent}",
            eps.shape()
        )));
    }
    let inv_b = 1.0 / b.max(1) as f64;

    // forward
    let trunk = model.encoder_trunk(batch)?;
    let h = trunk.last().unwrap_or(batch);
    let mean = model.mean_head.forward(h)?;
    let logvar = model.logvar_head.forward(h)?;
    let z = reparameterize_with_noise(&mean, &logvar, eps)?;
    let mut dec_acts: Vec<Matrix> = Vec::with_capacity(model.decoder_hidden.len() + 1);
    for layer in model
        .decoder_hidden
        .iter()
        .chain(std::iter::once(&model.output_layer))
    {
        let next = layer.forward(dec_acts.last().unwrap_or(&z))?;
        dec_acts.push(next);
    }
    let x_hat = dec_acts.last().expect("output layer");
    let loss = vae_loss(batch, x_hat, &mean, &logvar)?;

    let n_enc = model.encoder_hidden.len();
    let n_layers = n_enc + 2 + model.decoder_hidden.len() + 1;
    let mut grads: Vec<Option<LayerGradient>> = vec![None; n_layers];

    // decoder: d(loss)/d(x_hat) = 2 (x_hat - x) / B
    let d_out: Vec<f64> = x_hat
        .as_slice()
        .iter()
        .zip(batch.as_slice())
        .map(|(xh, x)| 2.0 * (xh - x) * inv_b)
        .collect();
    let d_out = Matrix::from_vec_unchecked(b, model.input_dim(), d_out);
    let dec_layers: Vec<&DenseLayer> = model
        .decoder_hidden
        .iter()
        .chain(std::iter::once(&model.output_layer))
        .collect();
    let mut dec_inputs: Vec<&Matrix> = vec![&z];
    dec_inputs.extend(dec_acts.iter().take(dec_acts.len() - 1));
    let dec_outputs: Vec<&Matrix> = dec_acts.iter().collect();
    let dz = backprop_stack(
        &dec_layers,
        &dec_inputs,
        &dec_outputs,
        d_out,
        &mut grads[n_enc + 2..],
        true,
    )?
    .expect("latent gradient requested");

    // through the reparameterization and the KL term
    let mut d_mean = Vec::with_capacity(b * latent);
    let mut d_logvar = Vec::with_capacity(b * latent);
    for i in 0..b * latent {
        let m = mean.as_slice()[i];
        let lv_raw = logvar.as_slice()[i];
        let lv = clamp_log_var(lv_raw);
        let std = (0.5 * lv).exp();
        let g = dz.as_slice()[i];
        d_mean.push(g + m * inv_b);
        let inside = lv_raw > LOG_VAR_MIN && lv_raw < LOG_VAR_MAX;
        d_logvar.push(if inside {
            g * eps.as_slice()[i] * 0.5 * std + 0.5 * (lv.exp() - 1.0) * inv_b
        } else {
            0.0
        });
    }
    let d_mean = Matrix::from_vec_unchecked(b, latent, d_mean);
    let d_logvar = Matrix::from_vec_unchecked(b, latent, d_logvar);

    // heads (linear activation), then the encoder trunk
    let mut head_grads: [Option<LayerGradient>; 1] = [None];
    let need_trunk = n_enc > 0;
    let dh_mean = backprop_stack(
        &[&model.mean_head],
        &[h],
        &[&mean],
        d_mean,
        &mut head_grads,
        need_trunk,
    )?;
    grads[n_enc] = head_grads[0].take();
    let dh_logvar = backprop_stack(
        &[&model.logvar_head],
        &[h],
        &[&logvar],
        d_logvar,
        &mut head_grads,
        need_trunk,
    )?;
    grads[n_enc + 1] = head_grads[0].take();

    if let (Some(a), Some(c)) = (dh_mean, dh_logvar) {
        let sum: Vec<f64> = a
            .as_slice()
            .iter()
            .zip(c.as_slice())
            .map(|(x, y)| x + y)
            .collect();
        let dh = Matrix::from_vec_unchecked(a.rows(), a.cols(), sum);
        let enc_layers: Vec<&DenseLayer> = model.encoder_hidden.iter().collect();
        let mut enc_inputs: Vec<&Matrix> = vec![batch];
        enc_inputs.extend(trunk.iter().take(n_enc - 1));
        let enc_outputs: Vec<&Matrix> = trunk.iter().collect();
        backprop_stack(
            &enc_layers,
            &enc_inputs,
            &enc_outputs,
            dh,
            &mut grads[..n_enc],
            false,
        )?;
    }

    let layers = grads
        .into_iter()
        .map(|g| g.expect("every layer receives a gradient"))
        .collect();
    Ok((loss, Gradients { layers }))
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    timestep: u64,
}

impl AdamState {
    pub fn new(model: &VaeModel) -> Self {
        let sizes: Vec<usize> = model.layers().iter().map(|l| l.param_count()).collect();
        AdamState {
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            timestep: 0,
        }
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn step(&mut self, model: &mut VaeModel, grads: &Gradients, config: &TrainConfig) {
        self.timestep += 1;
        let t = self.timestep as i32;
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let lr = config.learning_rate;
        let eps = config.adam_epsilon;
        for (((layer, g), m), v) in model
            .layers_mut()
            .into_iter()
            .zip(&grads.layers)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let nw = layer.weights.as_slice().len();
            let params = layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .chain(layer.bias.iter_mut());
            let gvals = g.weights.as_slice().iter().chain(g.bias.iter());
            for (((p, &gv), mi), vi) in params.zip(gvals).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gv;
                *vi = b2 * *vi + (1.0 - b2) * gv * gv;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            debug_assert_eq!(m.len(), nw + layer.bias.len());
        }
    }
}

/// Seed stream used for per-epoch shuffles.
const SHUFFLE_STREAM: u64 = 1;
/// Seed stream used for reparameterization noise.
const NOISE_STREAM: u64 = 2;

/// Trains `model` on `train` with mini-batch Adam.
///
/// Rows are reshuffled every epoch; the last partial batch is kept. Returns
/// the trained model and, per epoch, the row-weighted mean of the batch losses
/// observed before each update.
pub fn train_vae(
    model: &VaeModel,
    train: &Dataset,
    config: &TrainConfig,
) -> Result<(VaeModel, Vec<LossBreakdown>)> {
    config.validate()?;
    let x = train.features();
    model.check_input(x)?;
    if x.rows() == 0 {
        return Err(Error::Precondition(
            "cannot train on an empty dataset".into(),
        ));
    }
    if let Some(v) = x.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Precondition(format!(
            "training data must be scaled to [0, 1]; found {v}"
        )));
    }
    let root = RngState::new(config.seed);
    let mut shuffle_rng = root.fork(SHUFFLE_STREAM);
    let mut noise_rng = root.fork(NOISE_STREAM);
    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let n = x.rows();
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut acc = LossBreakdown::default();
        for chunk in order.chunks(config.batch_size) {
            let batch = x.select_rows(chunk);
            let (loss, grads) = backward(&model, &batch, &mut noise_rng)?;
            let w = chunk.len() as f64;
            acc.total += loss.total * w;
            acc.reconstruction += loss.reconstruction * w;
            acc.kl += loss.kl * w;
            adam.step(&mut model, &grads, config);
        }
        let n = n as f64;
        history.push(LossBreakdown {
            total: acc.total / n,
            reconstruction: acc.reconstruction / n,
            kl: acc.kl / n,
        });
    }
    for layer in model.layers() {
        if layer
            .weights
            .as_slice()
            .iter()
            .chain(&layer.bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("VAE parameters diverged".into()));
        }
    }
    Ok((model, history))
}

/// Replaces features by the encoder mean `z_mean`; labels are unchanged.
pub fn extract_latent(model: &VaeModel, ds: &Dataset) -> Result<Dataset> {
    let z = model.latent_mean(ds.features())?;
    ds.with_features(z)
}
