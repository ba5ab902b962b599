//! Fitting the triplane and decoder to baked slices: masked log-L2 loss over
//! the output head matching the visibility hint, Adam with a step learning
//! rate, a decaying grid blur, and per-epoch validation with checkpoints.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{slice_path, BakeManifest, BakedData};
use crate::geometry::{AssetKind, Shape};
use crate::io::{psnr_from_mse, read_slice, FormatError, TrainingSlice};
use crate::math::Aabb;
use crate::neural::{
    blur_grids, AssetError, AssetMetadata, Architecture, ModelGrad, NeuralAsset, NeuralModel, OutputActivation, PropertyLayout, Real,
    ShadingQuery, OUTPUTS,
};
use crate::sampling::stream_rng;
use crate::shading::ShadingFrame;

/// Samples per parallel work unit inside one batch. Partial gradients are
/// summed in chunk order, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 256;

const STREAM_INIT: u64 = 0x1417;
const STREAM_SHUFFLE: u64 = 0x5eed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset has no training samples")]
    EmptyDataset,
    #[error("model layout {model:?} cannot be trained on {data:?} data")]
    LayoutMismatch { model: PropertyLayout, data: AssetKind },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: bad manifest: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

fn io_err(path: &Path, source: std::io::Error) -> TrainError {
    TrainError::Io { path: path.display().to_string(), source }
}

/// One covered pixel of a slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub pixel: u32,
    pub query: ShadingQuery,
    pub target: [f64; 3],
    pub visible: bool,
}

/// Covered (alpha = 1) pixels of a slice as training samples.
pub fn samples_from_slice(slice: &TrainingSlice) -> Vec<Sample> {
    (0..slice.pixel_count())
        .filter(|&p| slice.covered(p))
        .map(|p| {
            let frame = match slice.kind {
                AssetKind::Surface => ShadingFrame::Surface { normal: slice.get_vec3("normal", p) },
                AssetKind::Fiber => ShadingFrame::Fiber { tangent: slice.get_vec3("tangent", p), h: slice.get1("h", p) as f64 },
            };
            Sample {
                pixel: p as u32,
                query: ShadingQuery {
                    position: slice.get_vec3("position", p),
                    wo: slice.get_vec3("view_dir", p),
                    wi: slice.get_vec3("light_dir", p),
                    frame,
                },
                target: slice.radiance(p).0,
                visible: slice.get1("visibility", p) > 0.5,
            }
        })
        .collect()
}

/// Per-slice sample lists ready for training.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: AssetKind,
    pub bounds: Aabb,
    pub geometry: Shape,
    pub train: Vec<Vec<Sample>>,
    pub validation: Vec<Vec<Sample>>,
}

impl Dataset {
    pub fn from_slices(manifest: &BakeManifest, train: &[TrainingSlice], validation: &[TrainingSlice]) -> Dataset {
        Dataset {
            kind: manifest.kind,
            bounds: manifest.bounds,
            geometry: manifest.geometry.clone(),
            train: train.iter().map(samples_from_slice).collect(),
            validation: validation.iter().map(samples_from_slice).collect(),
        }
    }

    pub fn from_baked(data: &BakedData) -> Dataset {
        Dataset::from_slices(&data.manifest, &data.train, &data.validation)
    }

    /// Reads a bake directory written by [`crate::datagen::bake`].
    pub fn load(dir: &Path) -> Result<Dataset, TrainError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let manifest: BakeManifest =
            serde_json::from_str(&text).map_err(|e| TrainError::Manifest { path: path.display().to_string(), message: e.to_string() })?;
        let read = |validation: bool, n: usize| -> Result<Vec<TrainingSlice>, TrainError> {
            (0..n).map(|i| Ok(read_slice(&slice_path(dir, validation, i), Some(manifest.kind))?)).collect()
        };
        let train = read(false, manifest.train_cameras.len())?;
        let validation = read(true, manifest.validation_cameras.len())?;
        Ok(Dataset::from_slices(&manifest, &train, &validation))
    }

    pub fn train_sample_count(&self) -> usize {
        self.train.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u32,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0 }
    }
}

/// Bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "adam: parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "adam: state length mismatch");
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (a1, a2) = (T::of(1.0 - cfg.beta1), T::of(1.0 - cfg.beta2));
    let (c1, c2, lr, eps) = (T::of(c1), T::of(c2), T::of(lr), T::of(cfg.eps));
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + a1 * g;
        *v = b2 * *v + a2 * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// Input layout; `None` uses the default for the dataset's kind.
    #[serde(default)]
    pub layout: Option<PropertyLayout>,
    pub epochs: usize,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_halving")]
    pub lr_halving_period: usize,
    #[serde(default = "default_blur_start")]
    pub blur_start: f64,
    /// Epoch at which the blur reaches one pixel; `None` is 20% of `epochs`.
    #[serde(default)]
    pub blur_end_epoch: Option<usize>,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_keep_best")]
    pub keep_best: usize,
    #[serde(default)]
    pub seed: u64,
    /// `false` trains a single head without the visibility hint.
    #[serde(default = "default_true")]
    pub dual_output: bool,
    /// Peak of the validation PSNR, in radiance per unit irradiance.
    #[serde(default = "default_peak")]
    pub psnr_peak: f64,
}

fn default_lr0() -> f64 {
    1e-3
}
fn default_halving() -> usize {
    50
}
fn default_blur_start() -> f64 {
    4.0
}
fn default_keep_best() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_peak() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture {
                resolution: 512,
                channels: 8,
                hidden_layers: 4,
                width: 512,
                output_activation: OutputActivation::Softplus,
            },
            layout: None,
            epochs: 250,
            lr0: default_lr0(),
            lr_halving_period: default_halving(),
            blur_start: default_blur_start(),
            blur_end_epoch: None,
            adam: AdamConfig::default(),
            keep_best: default_keep_best(),
            seed: 0,
            dual_output: true,
            psnr_peak: default_peak(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr0 > 0.0) {
            return bad("lr0 must be positive");
        }
        if self.lr_halving_period == 0 {
            return bad("lr_halving_period must be at least 1");
        }
        if !(self.blur_start >= 1.0) {
            return bad("blur_start must be at least 1 pixel");
        }
        if !(self.psnr_peak > 0.0) {
            return bad("psnr_peak must be positive");
        }
        let a = &self.architecture;
        if a.resolution < 2 || a.channels == 0 || (a.hidden_layers > 0 && a.width == 0) {
            return bad("architecture dimensions are too small");
        }
        Ok(())
    }

    pub fn blur_end(&self) -> usize {
        self.blur_end_epoch.unwrap_or(self.epochs / 5)
    }
}

pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    config.lr0 * 0.5f64.powi((epoch / config.lr_halving_period) as i32)
}

/// Blur footprint decaying linearly from `start` at iteration 0 to one pixel
/// at `end`, then constant.
pub fn blur_schedule(iteration: usize, end: usize, start: f64) -> f64 {
    if iteration >= end {
        1.0
    } else {
        start + (1.0 - start) * iteration as f64 / end as f64
    }
}

/// Default schedule: 4 px decaying to 1 px over the first 20% of iterations.
pub fn blur_footprint_at(iteration: usize, total_schedule_iters: usize) -> f64 {
    blur_schedule(iteration, total_schedule_iters / 5, 4.0)
}

/// Per-sample loss and its gradient with respect to the six outputs. Only
/// the head selected by `visible` receives gradient.
pub fn loss<T: Real>(lit: [T; 3], shadowed: [T; 3], target: [T; 3], visible: bool) -> (T, [T; OUTPUTS]) {
    let (pred, offset) = if visible { (lit, 0) } else { (shadowed, 3) };
    let mut grad = [T::zero(); OUTPUTS];
    let mut sum = T::zero();
    let third = T::of(1.0 / 3.0);
    for c in 0..3 {
        assert!(target[c] >= T::zero(), "loss target must be non-negative");
        let d = pred[c].ln_1p() - target[c].ln_1p();
        sum = sum + d * d;
        grad[offset + c] = T::of(2.0) * third * d / (T::one() + pred[c]);
    }
    (sum * third, grad)
}

/// Which target a sample trains and which output predicts it.
fn selects_lit(dual: bool, visible: bool) -> bool {
    !dual || visible
}

/// Mean loss over `samples` with its gradient accumulated into `grad`;
/// `None` when the model layout does not fit the samples.
pub fn batch_gradient<T: Real>(model: &NeuralModel<T>, samples: &[Sample], dual: bool, grad: &mut ModelGrad<T>) -> Option<f64> {
    if samples.is_empty() {
        return Some(0.0);
    }
    let inv_n = T::of(1.0 / samples.len() as f64);
    let parts: Vec<_> = samples
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let queries: Vec<ShadingQuery> = chunk.iter().map(|s| s.query).collect();
            let fwd = model.forward_batch(&queries)?;
            let mut upstream = vec![T::zero(); chunk.len() * OUTPUTS];
            let mut loss_sum = 0.0;
            for (i, s) in chunk.iter().enumerate() {
                let o = &fwd.cache.out[i * OUTPUTS..(i + 1) * OUTPUTS];
                let target = s.target.map(T::of);
                let (l, g) = loss([o[0], o[1], o[2]], [o[3], o[4], o[5]], target, selects_lit(dual, s.visible));
                loss_sum += l.f64();
                for (u, gk) in upstream[i * OUTPUTS..].iter_mut().zip(g) {
                    *u = gk * inv_n;
                }
            }
            let mut mlp = model.mlp.zero_grad();
            let features = model.backward_batch(&fwd, &upstream, &mut mlp);
            Some((loss_sum, mlp, fwd.footprints, features))
        })
        .collect::<Option<Vec<_>>>()?;
    let mut total = 0.0;
    for (loss_sum, mlp, footprints, features) in parts {
        total += loss_sum;
        grad.mlp.add_assign(&mlp);
        model.scatter_features(&footprints, &features, &mut grad.grid);
    }
    Some(total / samples.len() as f64)
}

/// Predicted radiance per sample, taking the head the visibility selects.
pub fn predict<T: Real>(model: &NeuralModel<T>, samples: &[Sample], dual: bool) -> Option<Vec<[f64; 3]>> {
    let parts: Vec<Vec<[f64; 3]>> = samples
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let queries: Vec<ShadingQuery> = chunk.iter().map(|s| s.query).collect();
            let fwd = model.forward_batch(&queries)?;
            Some(
                chunk
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let base = i * OUTPUTS + if selects_lit(dual, s.visible) { 0 } else { 3 };
                        let o = &fwd.cache.out[base..base + 3];
                        [o[0].f64(), o[1].f64(), o[2].f64()]
                    })
                    .collect(),
            )
        })
        .collect::<Option<_>>()?;
    Some(parts.into_iter().flatten().collect())
}

pub fn mse(pred: &[[f64; 3]], samples: &[Sample]) -> f64 {
    let sum: f64 = pred.iter().zip(samples).map(|(p, s)| (0..3).map(|c| (p[c] - s.target[c]).powi(2)).sum::<f64>()).sum();
    sum / (3 * samples.len().max(1)) as f64
}

/// Mean over slices of the per-slice PSNR on covered pixels; `None` without
/// validation data.
pub fn validation_psnr<T: Real>(model: &NeuralModel<T>, slices: &[Vec<Sample>], dual: bool, peak: f64) -> Option<f64> {
    let values: Vec<f64> = slices
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| Some(psnr_from_mse(mse(&predict(model, s, dual)?, s), peak)))
        .collect::<Option<_>>()?;
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub psnr: Option<f64>,
    pub asset: NeuralAsset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub psnr: Option<f64>,
    pub lr: f64,
    /// Footprint after the epoch's last step.
    pub blur: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochLog>,
    /// Best checkpoints by validation PSNR, highest first.
    pub best: Vec<Checkpoint>,
    pub last: Checkpoint,
    pub steps: usize,
}

impl TrainOutcome {
    /// The highest-PSNR snapshot, or the last one without validation data.
    pub fn best_asset(&self) -> &NeuralAsset {
        self.best.first().map_or(&self.last.asset, |c| &c.asset)
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,loss,val_psnr,lr,blur\n");
        for e in &self.history {
            let psnr = e.psnr.map_or(String::new(), |p| format!("{p:.6}"));
            s.push_str(&format!("{},{:.9e},{},{:e},{:.6}\n", e.epoch, e.loss, psnr, e.lr, e.blur));
        }
        s
    }

    /// Writes the best snapshot to `asset`, and next to it
    /// `<stem>_checkpoints/epoch_NNNN.rna` for the retained set,
    /// `<stem>_train_log.csv` and `<stem>_train_config.json`.
    pub fn write(&self, config: &TrainConfig, asset: &Path) -> Result<(), TrainError> {
        let stem = asset.with_extension("").display().to_string();
        let ck = Path::new(&format!("{stem}_checkpoints")).to_path_buf();
        fs::create_dir_all(&ck).map_err(|e| io_err(&ck, e))?;
        crate::neural::save_asset(self.best_asset(), asset)?;
        for c in self.best.iter().chain(std::iter::once(&self.last)) {
            crate::neural::save_asset(&c.asset, &ck.join(format!("epoch_{:04}.rna", c.epoch)))?;
        }
        let log = Path::new(&format!("{stem}_train_log.csv")).to_path_buf();
        fs::write(&log, self.log_csv()).map_err(|e| io_err(&log, e))?;
        let cfg = Path::new(&format!("{stem}_train_config.json")).to_path_buf();
        fs::write(&cfg, serde_json::to_string_pretty(config).expect("config serializes")).map_err(|e| io_err(&cfg, e))
    }
}

/// Fresh model for `dataset` with the configured architecture and seed.
///
/// The output layer starts with weights scaled down by [`OUTPUT_INIT_SCALE`]
/// and biases at the mean training target of each head. A He-initialized
/// output starts near 1 while baked radiance is usually far dimmer, and the
/// first Adam steps spent pulling it down can leave every hidden unit of a
/// wide decoder dead.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> NeuralModel<f32> {
    let layout = config.layout.unwrap_or(PropertyLayout::default_for(dataset.kind));
    let mut model = NeuralModel::new(&config.architecture, layout, dataset.bounds, &mut stream_rng(config.seed, STREAM_INIT, 0));
    let means = head_means(dataset, config.dual_output);
    let act = model.mlp.output;
    let last = model.mlp.layers.last_mut().expect("decoder has layers");
    for w in last.weights.iter_mut() {
        *w *= OUTPUT_INIT_SCALE;
    }
    for (b, m) in last.biases.iter_mut().zip(means) {
        *b = act.inverse(m) as f32;
    }
    model
}

pub const OUTPUT_INIT_SCALE: f32 = 0.1;

/// Mean target per output: lit head over visible samples, shadowed head over
/// the rest (all samples train the lit head without the hint).
fn head_means(dataset: &Dataset, dual: bool) -> [f64; OUTPUTS] {
    let mut sum = [0.0; OUTPUTS];
    let mut count = [0usize; 2];
    for s in dataset.train.iter().flatten() {
        let head = usize::from(!selects_lit(dual, s.visible));
        count[head] += 1;
        for c in 0..3 {
            sum[3 * head + c] += s.target[c];
        }
    }
    let mut out = [0.0; OUTPUTS];
    for k in 0..OUTPUTS {
        let n = count[k / 3];
        out[k] = if n > 0 { sum[k] / n as f64 } else { 0.0 };
    }
    if count[1] == 0 {
        // no shadowed samples: start the idle head like the lit one
        out.copy_within(0..3, 3);
    }
    out
}

pub fn train(dataset: &Dataset, model: NeuralModel<f32>, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with_progress(dataset, model, config, |_| {})
}

/// Runs `config.epochs` epochs, one optimizer step per non-empty slice.
pub fn train_with_progress(
    dataset: &Dataset,
    mut model: NeuralModel<f32>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if model.layout.kind() != dataset.kind {
        return Err(TrainError::LayoutMismatch { model: model.layout, data: dataset.kind });
    }
    let slices: Vec<usize> = (0..dataset.train.len()).filter(|&i| !dataset.train[i].is_empty()).collect();
    if slices.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let blur_end = config.blur_end() * slices.len();
    let mut grad = model.zero_grad();
    let mut states: Vec<AdamState<f32>> = param_lengths(&model).into_iter().map(AdamState::new).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Vec<Checkpoint> = Vec::new();
    let mut last = None;
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        let lr = lr_at(epoch, config);
        let mut order = slices.clone();
        order.shuffle(&mut stream_rng(config.seed, STREAM_SHUFFLE, epoch as u64));
        let (mut loss_sum, mut count) = (0.0, 0usize);
        let mut footprint = 1.0;
        for &i in &order {
            let samples = &dataset.train[i];
            zero(&mut grad);
            let l = batch_gradient(&model, samples, config.dual_output, &mut grad)
                .ok_or(TrainError::LayoutMismatch { model: model.layout, data: dataset.kind })?;
            loss_sum += l * samples.len() as f64;
            count += samples.len();
            apply_adam(&mut model, &grad, &mut states, lr, &config.adam);
            footprint = blur_schedule(step, blur_end, config.blur_start);
            if footprint > 1.0 {
                blur_grids(&mut model.grid, footprint);
            }
            step += 1;
        }
        let psnr = validation_psnr(&model, &dataset.validation, config.dual_output, config.psnr_peak);
        let entry = EpochLog { epoch, loss: loss_sum / count as f64, psnr, lr, blur: footprint };
        log::info!("epoch {epoch}: loss {:.6e} psnr {:?}", entry.loss, psnr);
        on_epoch(&entry);
        history.push(entry);
        let snapshot = Checkpoint {
            epoch,
            psnr,
            asset: NeuralAsset {
                geometry: dataset.geometry.clone(),
                model: model.clone(),
                metadata: AssetMetadata {
                    seed: config.seed,
                    epochs: epoch + 1,
                    final_loss: entry.loss,
                    validation_psnr: psnr,
                    dual_output: config.dual_output,
                },
            },
        };
        if let Some(p) = psnr {
            // stable: earlier epochs win ties
            let at = best.iter().position(|c| c.psnr.is_some_and(|q| p > q)).unwrap_or(best.len());
            if at < config.keep_best {
                best.insert(at, snapshot.clone());
                best.truncate(config.keep_best);
            }
        }
        last = Some(snapshot);
    }
    Ok(TrainOutcome { history, best, last: last.expect("at least one epoch"), steps: step })
}

fn zero<T: Real>(g: &mut ModelGrad<T>) {
    for v in g.grid.iter_mut().chain(g.mlp.weights.iter_mut()).chain(g.mlp.biases.iter_mut()) {
        v.fill(T::zero());
    }
}

/// Parameter tensor lengths in optimizer order: planes, then per layer
/// weights and biases.
fn param_lengths<T: Real>(model: &NeuralModel<T>) -> Vec<usize> {
    let mut v: Vec<usize> = model.grid.planes().iter().map(Vec::len).collect();
    for l in &model.mlp.layers {
        v.push(l.weights.len());
        v.push(l.biases.len());
    }
    v
}

fn apply_adam<T: Real>(model: &mut NeuralModel<T>, grad: &ModelGrad<T>, states: &mut [AdamState<T>], lr: f64, cfg: &AdamConfig) {
    let mut params: Vec<&mut [T]> = model.grid.planes_mut().iter_mut().map(|p| p.as_mut_slice()).collect();
    for l in &mut model.mlp.layers {
        params.push(&mut l.weights);
        params.push(&mut l.biases);
    }
    let mut grads: Vec<&[T]> = grad.grid.iter().map(Vec::as_slice).collect();
    for (w, b) in grad.mlp.weights.iter().zip(&grad.mlp.biases) {
        grads.push(w);
        grads.push(b);
    }
    params
        .into_par_iter()
        .zip(grads.into_par_iter())
        .zip(states.par_iter_mut())
        .for_each(|((p, g), s)| adam_step(p, g, s, lr, cfg));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    #[test]
    fn loss_closed_forms_and_masking() {
        let t = [0.3, 0.1, 2.0];
        assert_eq!(loss(t, [5.0; 3], t, true).0, 0.0);
        let e1 = std::f64::consts::E - 1.0;
        let (l, g) = loss([9.0; 3], [e1; 3], [0.0; 3], false);
        assert!((l - 1.0).abs() < 1e-15);
        assert_eq!(&g[..3], &[0.0; 3]);
        let (_, g) = loss([e1; 3], [9.0; 3], [0.0; 3], true);
        assert_eq!(&g[3..], &[0.0; 3]);
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn negative_target_is_rejected() {
        loss([0.0; 3], [0.0; 3], [-1.0, 0.0, 0.0], true);
    }

    #[test]
    fn schedules() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(0, &c), 1e-3);
        assert_eq!(lr_at(49, &c), 1e-3);
        assert_eq!(lr_at(50, &c), 5e-4);
        assert!((lr_at(249, &c) - 6.25e-5).abs() < 1e-18);
        assert_eq!(blur_footprint_at(0, 1000), 4.0);
        assert_eq!(blur_footprint_at(100, 1000), 2.5);
        assert_eq!(blur_footprint_at(200, 1000), 1.0);
        assert_eq!(blur_footprint_at(900, 1000), 1.0);
        assert_eq!(c.blur_end(), 50);
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut p = [0.0f64];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 1e-3, &AdamConfig::default());
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
        let mut q = [0.25f64, -3.0];
        let mut s = AdamState::new(2);
        adam_step(&mut q, &[0.0, 0.0], &mut s, 1e-3, &AdamConfig::default());
        assert_eq!(q, [0.25, -3.0]);
    }

    fn toy_dataset() -> Dataset {
        let bounds = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
        let mk = |k: u32| Sample {
            pixel: k,
            query: ShadingQuery {
                position: Vec3::new(0.1 * k as f64 - 0.5, 0.2, -0.3),
                wo: Vec3::Z,
                wi: Vec3::new(0.0, 0.6, 0.8),
                frame: ShadingFrame::Surface { normal: Vec3::Z },
            },
            target: [0.2, 0.1 * (k % 3) as f64, 0.05],
            visible: k % 2 == 0,
        };
        Dataset {
            kind: AssetKind::Surface,
            bounds,
            geometry: Shape::Sphere { center: Vec3::ZERO, radius: 1.0 },
            train: vec![(0..10).map(mk).collect(), (10..16).map(mk).collect()],
            validation: vec![(0..6).map(mk).collect()],
        }
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            architecture: Architecture { resolution: 8, channels: 4, hidden_layers: 2, width: 16, output_activation: OutputActivation::Softplus },
            epochs: 3,
            keep_best: 2,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn counts_steps_and_is_deterministic() {
        let ds = toy_dataset();
        let cfg = tiny_config();
        let a = train(&ds, init_model(&ds, &cfg), &cfg).unwrap();
        let b = train(&ds, init_model(&ds, &cfg), &cfg).unwrap();
        assert_eq!(a.steps, 6);
        assert_eq!(a.history.len(), 3);
        let bits = |o: &TrainOutcome| o.history.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.last.asset, b.last.asset);
        assert!(a.best.len() <= 2);
        let best = a.history.iter().filter_map(|e| e.psnr).fold(f64::MIN, f64::max);
        assert_eq!(a.best[0].psnr, Some(best));
    }

    #[test]
    fn layout_mismatch_is_reported_before_training() {
        let ds = toy_dataset();
        let cfg = TrainConfig { layout: Some(PropertyLayout::Fiber), ..tiny_config() };
        match train(&ds, init_model(&ds, &cfg), &cfg) {
            Err(TrainError::LayoutMismatch { model: PropertyLayout::Fiber, data: AssetKind::Surface }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
