//! The LSTM autoencoder: encoder LSTM → dropout → repeat → decoder LSTM →
//! dropout → time-distributed dense. Training, reconstruction errors and
//! the on-disk model artifact.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::ChannelStats;
use crate::detect::DetectorThreshold;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::lstm::Kernels;
use crate::nn::{
    adam_step, dropout_mask, mae_loss, AdamConfig, AdamState, DenseParams, Gate, LstmLayerParams,
    Matrix, Mode, ParameterSet, Tensor3,
};

pub const SCHEMA_VERSION: u64 = 1;

// Random streams derived from the model seed.
const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub window_k: usize,
    pub feature_m: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            window_k: 30,
            feature_m: 3,
            hidden_dim: 64,
            dropout_rate: 0.2,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_k == 0 || self.feature_m == 0 || self.hidden_dim == 0 {
            return Err(Error::config(
                "window_k, feature_m and hidden_dim must be >= 1",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            shuffle_seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// All trainable tensors of the autoencoder. Also used as its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderWeights {
    pub encoder: LstmLayerParams,
    pub decoder: LstmLayerParams,
    pub output: DenseParams,
}

impl ParameterSet for AutoencoderWeights {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend(self.decoder.tensors());
        t.extend(self.output.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.decoder.tensors_mut());
        t.extend(self.output.tensors_mut());
        t
    }

    fn zeros_like(&self) -> Self {
        AutoencoderWeights {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            output: self.output.zeros_like(),
        }
    }
}

impl AutoencoderWeights {
    pub fn zeros(config: &AutoencoderConfig) -> Self {
        let (m, h) = (config.feature_m, config.hidden_dim);
        AutoencoderWeights {
            encoder: LstmLayerParams::zeros(m, h),
            decoder: LstmLayerParams::zeros(h, h),
            output: DenseParams::zeros(h, m),
        }
    }

    fn check(&self, config: &AutoencoderConfig) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        self.output.validate()?;
        let (m, h) = (config.feature_m, config.hidden_dim);
        let ok = self.encoder.input_dim == m
            && self.encoder.hidden_dim == h
            && self.decoder.input_dim == h
            && self.decoder.hidden_dim == h
            && self.output.in_dim() == h
            && self.output.out_dim() == m;
        if !ok {
            return Err(Error::shape(format!(
                "weights do not match feature_m={m}, hidden_dim={h}"
            )));
        }
        Ok(())
    }
}

/// Trained (or fresh) model plus everything needed to score new data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub schema_version: u64,
    pub config: AutoencoderConfig,
    pub weights: AutoencoderWeights,
    pub channel_stats: ChannelStats,
    pub threshold: Option<DetectorThreshold>,
}

fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Stored as [fan_out × fan_in].
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized by construction")
}

/// `rows × cols` (`rows >= cols`) Gaussian matrix with orthonormalized
/// columns (modified Gram-Schmidt).
fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut columns: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for j in 0..cols {
        for i in 0..j {
            let (done, rest) = columns.split_at_mut(j);
            let proj: f64 = done[i].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (v, q) in rest[0].iter_mut().zip(&done[i]) {
                *v -= proj * q;
            }
        }
        let norm = columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut columns[j] {
            *v /= norm;
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

fn init_lstm(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmLayerParams {
    let mut p = LstmLayerParams {
        input_dim,
        hidden_dim: hidden,
        input_kernel: glorot_uniform(4 * hidden, input_dim, rng),
        recurrent_kernel: orthogonal(4 * hidden, hidden, rng),
        bias: vec![0.0; 4 * hidden],
    };
    let forget = p.gate_rows(Gate::Forget);
    p.bias[forget].fill(1.0);
    p
}

/// Fresh model: Glorot-uniform input and dense kernels, orthogonal
/// recurrent kernels, zero biases except forget-gate biases of 1.
pub fn init_model(config: &AutoencoderConfig) -> Result<ModelArtifact> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(INIT_STREAM);
    let (m, h) = (config.feature_m, config.hidden_dim);
    let encoder = init_lstm(m, h, &mut rng);
    let decoder = init_lstm(h, h, &mut rng);
    let output = DenseParams {
        weight: glorot_uniform(m, h, &mut rng),
        bias: vec![0.0; m],
    };
    let names: Vec<String> = (0..m).map(|i| format!("ch{i}")).collect();
    Ok(ModelArtifact {
        schema_version: SCHEMA_VERSION,
        config: *config,
        weights: AutoencoderWeights {
            encoder,
            decoder,
            output,
        },
        channel_stats: ChannelStats::identity(&names),
        threshold: None,
    })
}

/// Dropout scale factors for one window: embedding and decoder outputs.
struct WindowMasks {
    embedding: Vec<f64>,
    decoded: Vec<f64>,
}

impl WindowMasks {
    fn draw(config: &AutoencoderConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (k, h, rate) = (config.window_k, config.hidden_dim, config.dropout_rate);
        Ok(WindowMasks {
            embedding: dropout_mask(h, rate, rng)?,
            decoded: dropout_mask(k * h, rate, rng)?,
        })
    }
}

struct WindowPass {
    enc: crate::nn::lstm::SequenceCache,
    dec: crate::nn::lstm::SequenceCache,
    decoded: Matrix,
    output: Matrix,
}

fn apply_mask(values: &mut [f64], mask: Option<&[f64]>) {
    if let Some(mask) = mask {
        for (v, s) in values.iter_mut().zip(mask) {
            *v *= s;
        }
    }
}

/// Forward-pass kernels for both LSTM layers, built once per call.
struct PreparedWeights {
    encoder: Kernels,
    decoder: Kernels,
}

impl PreparedWeights {
    fn new(w: &AutoencoderWeights) -> Self {
        PreparedWeights {
            encoder: w.encoder.kernels(),
            decoder: w.decoder.kernels(),
        }
    }
}

fn window_forward(
    w: &AutoencoderWeights,
    prep: &PreparedWeights,
    k: usize,
    window: &Matrix,
    masks: Option<&WindowMasks>,
) -> Result<WindowPass> {
    let enc = w.encoder.forward_cached_with(&prep.encoder, window)?;
    let mut embedding = enc.last_hidden().to_vec();
    apply_mask(&mut embedding, masks.map(|m| m.embedding.as_slice()));
    let dec = w
        .decoder
        .forward_repeated_cached_with(&prep.decoder, &embedding, k)?;
    let mut decoded = dec.hidden_states();
    apply_mask(decoded.as_mut_slice(), masks.map(|m| m.decoded.as_slice()));
    let output = w.output.forward_time_distributed(&decoded)?;
    Ok(WindowPass {
        enc,
        dec,
        decoded,
        output,
    })
}

/// Adds the gradient for one window into `grads`, given `d_output`
/// (gradient of the loss on the reconstruction).
fn window_backward(
    w: &AutoencoderWeights,
    pass: &WindowPass,
    d_output: &Matrix,
    masks: Option<&WindowMasks>,
    grads: &mut AutoencoderWeights,
) -> Result<()> {
    let mut d_decoded =
        w.output
            .backward_time_distributed(&pass.decoded, d_output, &mut grads.output);
    apply_mask(
        d_decoded.as_mut_slice(),
        masks.map(|m| m.decoded.as_slice()),
    );
    let d_emb = w
        .decoder
        .backward(&pass.dec, &d_decoded, &mut grads.decoder)?;
    let mut d_last = d_emb.into_vec();
    apply_mask(&mut d_last, masks.map(|m| m.embedding.as_slice()));
    let k = pass.enc.steps.len();
    let h = w.encoder.hidden_dim;
    let mut dh_seq = Matrix::zeros(k, h);
    dh_seq.row_mut(k - 1).copy_from_slice(&d_last);
    w.encoder.backward(&pass.enc, &dh_seq, &mut grads.encoder)?;
    Ok(())
}

fn check_windows(config: &AutoencoderConfig, windows: &Tensor3) -> Result<()> {
    let (_, k, m) = windows.dims();
    if k != config.window_k || m != config.feature_m {
        return Err(Error::shape(format!(
            "windows are {k}x{m}, model expects {}x{}",
            config.window_k, config.feature_m
        )));
    }
    Ok(())
}

impl ModelArtifact {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.weights.check(&self.config)?;
        if self.channel_stats.channels.len() != self.config.feature_m {
            return Err(Error::shape(format!(
                "{} channel statistics for {} features",
                self.channel_stats.channels.len(),
                self.config.feature_m
            )));
        }
        if let Some(bad) = self
            .channel_stats
            .channels
            .iter()
            .find(|c| !(c.std > 0.0 && c.std.is_finite() && c.mean.is_finite()))
        {
            return Err(Error::Numeric(format!(
                "invalid statistics for channel {:?}",
                bad.name
            )));
        }
        if let Some(t) = &self.threshold {
            if !(t.value.is_finite() && t.value >= 0.0) {
                return Err(Error::Numeric(format!("invalid threshold {}", t.value)));
            }
        }
        Ok(())
    }
}

/// Reconstructs each window. In [`Mode::Train`] dropout masks are drawn from
/// `rng` window by window; in [`Mode::Eval`] the rng is untouched.
pub fn forward(
    model: &ModelArtifact,
    windows: &Tensor3,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor3> {
    check_windows(&model.config, windows)?;
    let (n, k, m) = windows.dims();
    let prep = PreparedWeights::new(&model.weights);
    let mut out = Tensor3::zeros(n, k, m);
    for i in 0..n {
        let masks = match mode {
            Mode::Train => Some(WindowMasks::draw(&model.config, rng)?),
            Mode::Eval => None,
        };
        let pass = window_forward(&model.weights, &prep, k, &windows.matrix(i), masks.as_ref())?;
        out.item_mut(i).copy_from_slice(pass.output.as_slice());
    }
    Ok(out)
}

/// MAE between each window and its eval-mode reconstruction.
pub fn reconstruction_errors(model: &ModelArtifact, windows: &Tensor3) -> Result<Vec<f64>> {
    check_windows(&model.config, windows)?;
    let k = model.config.window_k;
    let prep = PreparedWeights::new(&model.weights);
    (0..windows.len())
        .map(|i| {
            let pass = window_forward(&model.weights, &prep, k, &windows.matrix(i), None)?;
            Ok(mae_loss(pass.output.as_slice(), windows.item(i))?.0)
        })
        .collect()
}

/// Batch MAE (over every element of every window) and its gradient with
/// dropout disabled.
pub fn loss_and_gradient(
    weights: &AutoencoderWeights,
    config: &AutoencoderConfig,
    windows: &Tensor3,
) -> Result<(f64, AutoencoderWeights)> {
    batch_loss_and_gradient(weights, config, windows, None)
}

/// Batch MAE with dropout off, without gradients.
pub fn batch_loss(
    weights: &AutoencoderWeights,
    config: &AutoencoderConfig,
    windows: &Tensor3,
) -> Result<f64> {
    check_windows(config, windows)?;
    let k = config.window_k;
    let prep = PreparedWeights::new(weights);
    let mut recon = Vec::with_capacity(windows.as_slice().len());
    for i in 0..windows.len() {
        let pass = window_forward(weights, &prep, k, &windows.matrix(i), None)?;
        recon.extend_from_slice(pass.output.as_slice());
    }
    Ok(mae_loss(&recon, windows.as_slice())?.0)
}

fn batch_loss_and_gradient(
    weights: &AutoencoderWeights,
    config: &AutoencoderConfig,
    windows: &Tensor3,
    masks: Option<&[WindowMasks]>,
) -> Result<(f64, AutoencoderWeights)> {
    check_windows(config, windows)?;
    if windows.is_empty() {
        return Err(Error::data("empty batch"));
    }
    let (n, k, m) = windows.dims();
    let prep = PreparedWeights::new(weights);
    let mut grads = weights.zeros_like();
    let mut total = 0.0;
    for i in 0..n {
        let mask = masks.map(|all| &all[i]);
        let pass = window_forward(weights, &prep, k, &windows.matrix(i), mask)?;
        let (loss, mut g) = mae_loss(pass.output.as_slice(), windows.item(i))?;
        total += loss;
        // Per-window MAE gradient is sign/(k·m); the batch mean adds 1/n.
        for v in &mut g {
            *v /= n as f64;
        }
        let d_out = Matrix::from_vec(k, m, g)?;
        window_backward(weights, &pass, &d_out, mask, &mut grads)?;
    }
    Ok((total / n as f64, grads))
}

/// Minibatch training with MAE and Adam; each window is its own target.
/// Returns the mean batch loss of each epoch. A fresh Adam state is used
/// for every call.
pub fn train_epochs(
    model: &mut ModelArtifact,
    windows: &Tensor3,
    tcfg: &TrainConfig,
) -> Result<Vec<f64>> {
    check_windows(&model.config, windows)?;
    if windows.is_empty() {
        return Err(Error::data("no training windows"));
    }
    if tcfg.batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    if tcfg.epochs == 0 {
        return Ok(Vec::new());
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tcfg.shuffle_seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);
    let mut adam = AdamState::new(&model.weights, tcfg.adam);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    for _ in 0..tcfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(tcfg.batch_size) {
            let batch = windows.select(idx);
            let masks = if model.config.dropout_rate > 0.0 {
                Some(
                    (0..idx.len())
                        .map(|_| WindowMasks::draw(&model.config, &mut dropout_rng))
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            let (loss, grads) =
                batch_loss_and_gradient(&model.weights, &model.config, &batch, masks.as_deref())?;
            adam_step(&mut model.weights, &grads, &mut adam)?;
            sum += loss;
            batches += 1;
        }
        let epoch_loss = sum / batches as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric("training loss diverged".into()));
        }
        log::debug!("epoch {} loss {epoch_loss}", history.len() + 1);
        history.push(epoch_loss);
    }
    Ok(history)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArtifactDocument {
    schema_version: u64,
    config: AutoencoderConfig,
    channel_stats: ChannelStats,
    threshold: Option<DetectorThreshold>,
    encoder_lstm: LstmLayerParams,
    decoder_lstm: LstmLayerParams,
    output_dense: DenseParams,
}

impl ModelArtifact {
    pub fn to_json(&self) -> String {
        let doc = ArtifactDocument {
            schema_version: self.schema_version,
            config: self.config,
            channel_stats: self.channel_stats.clone(),
            threshold: self.threshold,
            encoder_lstm: self.weights.encoder.clone(),
            decoder_lstm: self.weights.decoder.clone(),
            output_dense: self.weights.output.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let to_parse = |e: serde_json::Error| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(to_parse)?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing or invalid schema_version".into(),
            })?;
        if version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let doc: ArtifactDocument = serde_json::from_value(value).map_err(to_parse)?;
        let model = ModelArtifact {
            schema_version: doc.schema_version,
            config: doc.config,
            weights: AutoencoderWeights {
                encoder: doc.encoder_lstm,
                decoder: doc.decoder_lstm,
                output: doc.output_dense,
            },
            channel_stats: doc.channel_stats,
            threshold: doc.threshold,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model(model: &ModelArtifact, destination: &Path) -> Result<()> {
    write_atomic(destination, model.to_json().as_bytes())
}

pub fn load_model(source: &Path) -> Result<ModelArtifact> {
    let text = std::fs::read_to_string(source).map_err(|e| Error::Io {
        path: source.to_path_buf(),
        source: e,
    })?;
    ModelArtifact::from_json(&text)
}
