//! One seeded training run, shared by every training command.

use std::fmt;

use clap::ValueEnum;
use sgnn_core::candidates::{make_candidate, sample_dataset, Dataset};
use sgnn_core::grbfnn::{GrbfnnModel, DEFAULT_UNIT_CAP};
use sgnn_core::io::AnyModel;
use sgnn_core::mlp::{mlp_sizes, Activation, MlpModel};
use sgnn_core::rng::Rng;
use sgnn_core::sgnn::SgnnModel;
use sgnn_core::trainer::{train, TrainConfig, TrainReport, Trainable};

use crate::error::{LabError, LabResult};

pub const DOMAIN: (f64, f64) = (-8.0, 8.0);
pub const TRAIN_SPLIT: f64 = 0.8;

const DATA_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum ModelArg {
    Sgnn,
    Grbfnn,
    Relu,
    Sigmoid,
}

impl fmt::Display for ModelArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelArg::Sgnn => "sgnn",
            ModelArg::Grbfnn => "grbfnn",
            ModelArg::Relu => "relu",
            ModelArg::Sigmoid => "sigmoid",
        })
    }
}

/// Everything that determines a run. The dataset depends only on
/// `(seed, rep, fn_id, dim, data)`, so different models in the same
/// repetition see the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub model: ModelArg,
    pub fn_id: u8,
    pub dim: usize,
    /// Neurons per layer (SGNN, MLP) or per dimension (GRBFNN, `K = N^d`).
    pub neurons: usize,
    /// Hidden layers of an MLP; ignored otherwise.
    pub layers: usize,
    pub data: usize,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub rep: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub params: usize,
    pub report: TrainReport,
    pub model: AnyModel,
}

impl RunResult {
    pub fn final_loss(&self) -> f64 {
        self.report.final_val_loss().unwrap_or(f64::NAN)
    }

    pub fn best_loss(&self) -> f64 {
        self.report.best_val_loss
    }

    pub fn sec_per_epoch(&self) -> Option<f64> {
        self.report.sec_per_epoch()
    }
}

/// Walks `path` down a chain of forks from `Rng::new(seed)`.
pub fn derive_rng(seed: u64, path: &[u64]) -> Rng {
    path.iter().fold(Rng::new(seed), |mut rng, &s| rng.fork(s))
}

pub fn build_dataset(spec: &RunSpec) -> LabResult<Dataset> {
    let f = make_candidate(spec.fn_id, spec.dim)?;
    let mut rng = derive_rng(
        spec.seed,
        &[spec.rep, DATA_STREAM, spec.fn_id as u64, spec.dim as u64],
    );
    Ok(sample_dataset(
        &f,
        spec.data,
        DOMAIN.0,
        DOMAIN.1,
        TRAIN_SPLIT,
        &mut rng,
    )?)
}

fn model_stream(model: ModelArg) -> u64 {
    match model {
        ModelArg::Sgnn => 0,
        ModelArg::Grbfnn => 1,
        ModelArg::Relu => 2,
        ModelArg::Sigmoid => 3,
    }
}

pub fn grbfnn_units(dim: usize, neurons: usize) -> LabResult<usize> {
    u32::try_from(dim)
        .ok()
        .and_then(|d| neurons.checked_pow(d))
        .filter(|&k| k <= DEFAULT_UNIT_CAP)
        .ok_or_else(|| {
            LabError::usage(format!(
                "GRBFNN with {neurons}^{dim} units exceeds the cap of {DEFAULT_UNIT_CAP}"
            ))
        })
}

fn fit<M: Trainable>(model: &mut M, ds: &Dataset, cfg: &TrainConfig) -> LabResult<TrainReport> {
    Ok(train(model, ds, cfg)?)
}

pub fn run_once(spec: &RunSpec) -> LabResult<RunResult> {
    if spec.neurons == 0 {
        return Err(LabError::usage("--neurons must be >= 1"));
    }
    let ds = build_dataset(spec)?;
    let mut init = derive_rng(
        spec.seed,
        &[spec.rep, INIT_STREAM, model_stream(spec.model)],
    );
    let cfg = TrainConfig {
        batch_size: spec.batch,
        max_epochs: spec.max_epochs,
        patience: spec.patience,
        seed: derive_rng(spec.seed, &[spec.rep, SHUFFLE_STREAM]).next_u64(),
        ..TrainConfig::default()
    };
    let (lo, hi) = DOMAIN;
    let (report, model, params) = match spec.model {
        ModelArg::Sgnn => {
            let mut m = SgnnModel::init(spec.dim, spec.neurons, lo, hi, &mut init)?;
            let r = fit(&mut m, &ds, &cfg)?;
            let p = m.param_count();
            (r, AnyModel::Sgnn(m), p)
        }
        ModelArg::Grbfnn => {
            let k = grbfnn_units(spec.dim, spec.neurons)?;
            let mut m = GrbfnnModel::init(spec.dim, k, lo, hi, &mut init)?;
            let r = fit(&mut m, &ds, &cfg)?;
            let p = m.param_count();
            (r, AnyModel::Grbfnn(m), p)
        }
        ModelArg::Relu | ModelArg::Sigmoid => {
            let act = if spec.model == ModelArg::Relu {
                Activation::Relu
            } else {
                Activation::Sigmoid
            };
            if spec.layers == 0 {
                return Err(LabError::usage("an MLP needs --layers >= 1"));
            }
            let sizes = mlp_sizes(spec.dim, spec.layers, spec.neurons);
            let mut m = MlpModel::init(&sizes, act, &mut init)?;
            let r = fit(&mut m, &ds, &cfg)?;
            let p = m.param_count();
            (r, AnyModel::Mlp(m), p)
        }
    };
    Ok(RunResult {
        spec: spec.clone(),
        params,
        report,
        model,
    })
}
