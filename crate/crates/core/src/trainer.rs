//! Mini-batch Adam with validation-based early stopping, shared by every
//! model family through the [`Trainable`] trait.

use std::fmt;
use std::time::Instant;

use crate::candidates::Dataset;
use crate::error::{Error, Result};
use crate::grbfnn::{GrbfnnCache, GrbfnnModel};
use crate::io::fmt_f64;
use crate::linalg::Matrix;
use crate::mlp::{MlpCache, MlpModel};
use crate::rng::Rng;
use crate::sgnn::{ForwardCache, SgnnModel};

/// A model with a flat parameter vector and an analytic gradient.
pub trait Trainable {
    type Cache;

    fn input_dim(&self) -> usize;
    fn param_count(&self) -> usize;
    fn param_vector(&self) -> Vec<f64>;
    /// Loads parameters, applying any projection the model needs (width
    /// clamping).
    fn load_params(&mut self, params: &[f64]) -> Result<()>;
    fn forward_cached(&self, batch: &Matrix) -> Result<(Vec<f64>, Self::Cache)>;
    /// Gradient of `Σ_b output_grad[b] · f(x_b)`, in `param_vector` order.
    fn backward_flat(&self, cache: &Self::Cache, output_grad: &[f64]) -> Result<Vec<f64>>;

    fn predict_batch(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.forward_cached(batch).map(|(o, _)| o)
    }
}

impl Trainable for SgnnModel {
    type Cache = ForwardCache;

    fn input_dim(&self) -> usize {
        self.dim()
    }
    fn param_count(&self) -> usize {
        SgnnModel::param_count(self)
    }
    fn param_vector(&self) -> Vec<f64> {
        SgnnModel::param_vector(self)
    }
    fn load_params(&mut self, params: &[f64]) -> Result<()> {
        SgnnModel::load_params(self, params)
    }
    fn forward_cached(&self, batch: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward(batch)
    }
    fn backward_flat(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backward(cache, output_grad).map(|g| g.to_flat())
    }
}

impl Trainable for GrbfnnModel {
    type Cache = GrbfnnCache;

    fn input_dim(&self) -> usize {
        crate::grbfnn::GaussianUnits::dim(self)
    }
    fn param_count(&self) -> usize {
        GrbfnnModel::param_count(self)
    }
    fn param_vector(&self) -> Vec<f64> {
        GrbfnnModel::param_vector(self)
    }
    fn load_params(&mut self, params: &[f64]) -> Result<()> {
        GrbfnnModel::load_params(self, params)
    }
    fn forward_cached(&self, batch: &Matrix) -> Result<(Vec<f64>, GrbfnnCache)> {
        self.forward(batch)
    }
    fn backward_flat(&self, cache: &GrbfnnCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backward(cache, output_grad).map(|g| g.to_flat())
    }
}

impl Trainable for MlpModel {
    type Cache = MlpCache;

    fn input_dim(&self) -> usize {
        self.dim()
    }
    fn param_count(&self) -> usize {
        MlpModel::param_count(self)
    }
    fn param_vector(&self) -> Vec<f64> {
        MlpModel::param_vector(self)
    }
    fn load_params(&mut self, params: &[f64]) -> Result<()> {
        MlpModel::load_params(self, params)
    }
    fn forward_cached(&self, batch: &Matrix) -> Result<(Vec<f64>, MlpCache)> {
        self.forward(batch)
    }
    fn backward_flat(&self, cache: &MlpCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backward(cache, output_grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Mean squared error; what training minimises.
    Mse,
    /// `√Σ (f - f̄)²`
    RootSumSquared,
}

pub fn compute_loss(pred: &[f64], target: &[f64], kind: LossKind) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dims(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    let sse: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(match kind {
        LossKind::Mse => sse / pred.len() as f64,
        LossKind::RootSumSquared => sse.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without a strictly lower validation loss before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
    pub loss_kind: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 4,
            max_epochs: 2000,
            seed: 0,
            loss_kind: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid("Adam betas must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return Err(Error::invalid("learning rate and epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::dims(format!(
            "adam: {n} params, {} grads, {} moments",
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 / (1.0 - b1.powi(t));
    let c2 = 1.0 / (1.0 - b2.powi(t));
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] * c1;
        let v_hat = state.v[i] * c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Patience rule: stop once `patience` consecutive epochs fail to produce a
/// loss strictly below the best seen so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epochs: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs: 0,
            since_best: 0,
        }
    }

    /// Records one epoch's loss. Returns `(improved, should_stop)`.
    pub fn observe(&mut self, loss: f64) -> (bool, bool) {
        self.epochs += 1;
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = self.epochs;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        (improved, self.since_best >= self.patience)
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// 1-based; 0 before any improvement.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Epoch at which the patience rule stops a run with this loss history, if
/// it does.
pub fn stopping_epoch(history: &[f64], patience: usize) -> Option<usize> {
    let mut es = EarlyStopping::new(patience);
    history.iter().position(|&l| es.observe(l).1).map(|i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean over the epoch's mini-batches of the batch MSE, weighted by
    /// batch size.
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
    pub val_rss: Vec<f64>,
    pub seconds: Vec<f64>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub best_val_loss: f64,
    /// 1-based epoch of `best_val_loss`; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_params: Vec<f64>,
}

impl TrainReport {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_mse.last().copied()
    }

    pub fn sec_per_epoch(&self) -> Option<f64> {
        measure_epoch_time(self).ok()
    }

    /// `epoch,train_mse,val_mse,val_rss,seconds`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse,val_rss,seconds\n");
        for e in 0..self.epochs_run {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                e + 1,
                fmt_f64(self.train_mse[e]),
                fmt_f64(self.val_mse[e]),
                fmt_f64(self.val_rss[e]),
                fmt_f64(self.seconds[e])
            ));
        }
        s
    }
}

/// Mean wall-clock seconds per epoch, skipping the first (warm-up) epoch.
pub fn measure_epoch_time(report: &TrainReport) -> Result<f64> {
    mean_epoch_seconds(&report.seconds[..report.epochs_run.min(report.seconds.len())])
}

pub fn mean_epoch_seconds(seconds: &[f64]) -> Result<f64> {
    if seconds.len() < 2 {
        return Err(Error::invalid(format!(
            "epoch timing needs at least two epochs, got {}",
            seconds.len()
        )));
    }
    let rest = &seconds[1..];
    Ok(rest.iter().sum::<f64>() / rest.len() as f64)
}

/// Trains `model` in place on `dataset`'s training rows.
///
/// Each epoch shuffles the training indices, walks them in mini-batches
/// (keeping the last partial batch), and takes one Adam step per batch on
/// the MSE. The validation split is scored after the epoch. The model ends
/// with its last-epoch parameters; the best-validation parameters are kept
/// in the report.
pub fn train<M: Trainable>(
    model: &mut M,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.dim() != model.input_dim() {
        return Err(Error::dims(format!(
            "model expects d = {}, dataset has d = {}",
            model.input_dim(),
            dataset.dim()
        )));
    }
    if dataset.train_idx.is_empty() || dataset.val_idx.is_empty() {
        return Err(Error::invalid(
            "dataset needs non-empty train and validation splits",
        ));
    }
    let (train_x, train_y) = dataset.train();
    let (val_x, val_y) = dataset.validation();
    let n_train = train_y.len();

    let mut rng = Rng::new(cfg.seed);
    let mut state = AdamState::new(model.param_count());
    let mut params = model.param_vector();
    let mut stopper = EarlyStopping::new(cfg.patience);

    let mut report = TrainReport {
        train_mse: Vec::new(),
        val_mse: Vec::new(),
        val_rss: Vec::new(),
        seconds: Vec::new(),
        epochs_run: 0,
        stop_reason: StopReason::MaxEpochs,
        best_val_loss: f64::INFINITY,
        best_epoch: 0,
        best_params: params.clone(),
    };

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut output_grad = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.max_epochs {
        let start = Instant::now();
        rng.shuffle(&mut order);
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_x.select_rows(chunk);
            let (pred, cache) = model.forward_cached(&batch)?;
            let scale = 2.0 / chunk.len() as f64;
            output_grad.clear();
            for (p, &i) in pred.iter().zip(chunk) {
                let r = p - train_y[i];
                sse += r * r;
                output_grad.push(scale * r);
            }
            let grads = model.backward_flat(&cache, &output_grad)?;
            adam_step(&mut params, &grads, &mut state, cfg)?;
            model.load_params(&params)?;
            params = model.param_vector();
        }
        let val_pred = model.predict_batch(&val_x)?;
        let val_mse = compute_loss(&val_pred, &val_y, LossKind::Mse)?;
        let val_rss = compute_loss(&val_pred, &val_y, LossKind::RootSumSquared)?;
        let elapsed = start.elapsed().as_secs_f64();

        report.train_mse.push(sse / n_train as f64);
        report.val_mse.push(val_mse);
        report.val_rss.push(val_rss);
        report.seconds.push(elapsed);
        report.epochs_run += 1;

        let monitored = match cfg.loss_kind {
            LossKind::Mse => val_mse,
            LossKind::RootSumSquared => val_rss,
        };
        let (improved, stop) = stopper.observe(monitored);
        if improved {
            report.best_val_loss = val_mse;
            report.best_epoch = report.epochs_run;
            report.best_params.clone_from(&params);
        }
        if stop {
            report.stop_reason = StopReason::Patience;
            break;
        }
    }
    Ok(report)
}
