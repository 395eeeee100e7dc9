//! Verification front-ends: finite-difference gradients, SGNN → GRBFNN
//! equivalence and the projected-Hessian algebra.

use std::fmt;

use sgnn_core::analysis::{
    dominance_report, grbfnn_weight_hessian, mapping_jacobian, projected_hessian, DominanceReport,
    HessianBundle, HESSIAN_UNIT_CAP,
};
use sgnn_core::candidates::uniform_points;
use sgnn_core::grbfnn::{sgnn_to_grbfnn, GrbfnnModel, DEFAULT_UNIT_CAP};
use sgnn_core::linalg::matmul;
use sgnn_core::mlp::{mlp_sizes, Activation, MlpModel};
use sgnn_core::rng::Rng;
use sgnn_core::sgnn::SgnnModel;
use sgnn_core::trainer::Trainable;
use sgnn_core::verify::{check_equivalence, check_gradient};
use sgnn_core::Matrix;

use crate::error::{LabError, LabResult};
use crate::runs::derive_rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-5;
/// Denominator floor for relative gradient errors.
pub const GRAD_FLOOR: f64 = 1e-3;
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;
pub const TRIPLE_PRODUCT_TOLERANCE: f64 = 1e-10;
pub const SPLIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradFailure {
    pub model: usize,
    pub description: String,
    pub parameter: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCheck {
    pub family: &'static str,
    pub models: usize,
    pub max_rel_error: f64,
    pub worst: Option<GradFailure>,
}

impl FamilyCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRAD_TOLERANCE
    }
}

impl fmt::Display for FamilyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<8} models={:<3} max_rel_error={:.3e}",
            self.family, self.models, self.max_rel_error
        )?;
        if let (false, Some(w)) = (self.passed(), &self.worst) {
            write!(
                f,
                " worst: model #{} {} param {} analytic {:e} numeric {:e}",
                w.model, w.description, w.parameter, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

struct Tracker {
    check: FamilyCheck,
}

impl Tracker {
    fn new(family: &'static str) -> Self {
        Self {
            check: FamilyCheck {
                family,
                models: 0,
                max_rel_error: 0.0,
                worst: None,
            },
        }
    }

    fn record<M: Trainable + Clone>(
        &mut self,
        model: &M,
        batch: &Matrix,
        rng: &mut Rng,
        description: String,
    ) -> LabResult<()> {
        let g: Vec<f64> = (0..batch.rows()).map(|_| rng.normal()).collect();
        let c = check_gradient(model, batch, &g, FD_STEP, GRAD_FLOOR)?;
        if c.max_rel_error > self.check.max_rel_error || c.max_rel_error.is_nan() {
            self.check.max_rel_error = c.max_rel_error;
            self.check.worst = Some(GradFailure {
                model: self.check.models,
                description,
                parameter: c.worst_index,
                analytic: c.analytic[c.worst_index],
                numeric: c.numeric[c.worst_index],
            });
        }
        self.check.models += 1;
        Ok(())
    }
}

fn min_relu_margin(model: &MlpModel, batch: &Matrix) -> LabResult<f64> {
    let (_, cache) = model.forward(batch)?;
    let hidden = model.weights().len() - 1;
    Ok(cache.pre[..hidden]
        .iter()
        .flat_map(|z| z.as_slice().iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

/// Central-difference check of every analytic gradient on `models` random
/// small networks per family: SGNN, GRBFNN, sigmoid MLP and ReLU MLP (the
/// latter resampled until no pre-activation lies within 1e-3 of a kink).
pub fn gradcheck_suite(seed: u64, models: usize) -> LabResult<Vec<FamilyCheck>> {
    if models == 0 {
        return Err(LabError::usage(
            "gradcheck needs at least one model per family",
        ));
    }
    let mut out = Vec::new();

    let mut rng = derive_rng(seed, &[0]);
    let mut t = Tracker::new("sgnn");
    for case in 0..models {
        let d = 1 + case % 4;
        let widths: Vec<usize> = (0..d).map(|_| 1 + rng.below(4)).collect();
        let mut m = SgnnModel::init_layers(&widths, -3.0, 3.0, &mut rng)?;
        let mut p = m.param_vector();
        for v in &mut p {
            *v *= rng.uniform(0.8, 1.2)?;
        }
        m.load_params(&p)?;
        let x = uniform_points(6, d, -3.0, 3.0, &mut rng)?;
        t.record(&m, &x, &mut rng, format!("widths {widths:?}"))?;
    }
    out.push(t.check);

    let mut rng = derive_rng(seed, &[1]);
    let mut t = Tracker::new("grbfnn");
    for case in 0..models {
        let d = 1 + case % 3;
        let k = 1 + rng.below(6);
        let m = GrbfnnModel::init(d, k, -2.0, 2.0, &mut rng)?;
        let x = uniform_points(6, d, -2.0, 2.0, &mut rng)?;
        t.record(&m, &x, &mut rng, format!("d={d} K={k}"))?;
    }
    out.push(t.check);

    let mut rng = derive_rng(seed, &[2]);
    let mut t = Tracker::new("sigmoid");
    for case in 0..models {
        let d = 1 + case % 4;
        let sizes = mlp_sizes(d, 1 + case % 3, 2 + rng.below(5));
        let m = MlpModel::init(&sizes, Activation::Sigmoid, &mut rng)?;
        let x = uniform_points(6, d, -2.0, 2.0, &mut rng)?;
        t.record(&m, &x, &mut rng, format!("sizes {sizes:?}"))?;
    }
    out.push(t.check);

    let mut rng = derive_rng(seed, &[3]);
    let mut t = Tracker::new("relu");
    let mut case = 0;
    while t.check.models < models {
        let d = 1 + case % 3;
        case += 1;
        let sizes = mlp_sizes(d, 1 + case % 3, 4);
        let m = MlpModel::init(&sizes, Activation::Relu, &mut rng)?;
        let x = uniform_points(5, d, -2.0, 2.0, &mut rng)?;
        if min_relu_margin(&m, &x)? < 1e-3 {
            continue;
        }
        t.record(&m, &x, &mut rng, format!("sizes {sizes:?}"))?;
    }
    out.push(t.check);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSummary {
    pub models: usize,
    pub points: usize,
    pub max_rel_error: f64,
    /// Layer widths of the worst model.
    pub worst_widths: Vec<usize>,
}

impl EquivalenceSummary {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= EQUIVALENCE_TOLERANCE
    }
}

/// Compares SGNN and converted-GRBFNN outputs on `models` random SGNNs.
/// Model `i` has `d = dims[i % dims.len()]` layers, each with a width drawn
/// from `neurons`; centers and widths are jittered off the regular grid.
pub fn equivalence_suite(
    dims: &[usize],
    neurons: &[usize],
    models: usize,
    points: usize,
    seed: u64,
) -> LabResult<EquivalenceSummary> {
    if dims.is_empty() || neurons.is_empty() || models == 0 || points == 0 {
        return Err(LabError::usage(
            "equivalence needs dims, neurons, models and points",
        ));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(LabError::usage("equivalence needs --dim >= 2"));
    }
    let mut rng = derive_rng(seed, &[]);
    let (lo, hi) = crate::runs::DOMAIN;
    let mut summary = EquivalenceSummary {
        models,
        points,
        max_rel_error: 0.0,
        worst_widths: Vec::new(),
    };
    for i in 0..models {
        let d = dims[i % dims.len()];
        let widths: Vec<usize> = (0..d).map(|_| neurons[rng.below(neurons.len())]).collect();
        let mut model = SgnnModel::init_layers(&widths, lo, hi, &mut rng)?;
        let mut p = model.param_vector();
        for v in &mut p[model.weight_count()..] {
            *v *= rng.uniform(0.7, 1.3)?;
        }
        model.load_params(&p)?;
        let x = uniform_points(points, d, lo, hi, &mut rng)?;
        let c = check_equivalence(&model, &x, DEFAULT_UNIT_CAP)?;
        if c.max_rel_error > summary.max_rel_error || summary.worst_widths.is_empty() {
            summary.max_rel_error = summary.max_rel_error.max(c.max_rel_error);
            summary.worst_widths = widths;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct HessianStudy {
    pub bundle: HessianBundle,
    /// `‖JᵀH̃J (dense) - H‖_F / ‖JᵀH̃J‖_F`
    pub triple_product_residual: f64,
    pub split_residual: f64,
    /// `λ_min(H) / λ_max(H)`
    pub min_eigen_ratio: f64,
    pub dominance: DominanceReport,
}

impl HessianStudy {
    pub fn psd(&self) -> bool {
        self.min_eigen_ratio >= -TRIPLE_PRODUCT_TOLERANCE
    }

    pub fn passed(&self) -> bool {
        self.triple_product_residual <= TRIPLE_PRODUCT_TOLERANCE
            && self.split_residual <= SPLIT_TOLERANCE
            && self.psd()
    }
}

/// The `d`-layer, `N`-neuron SGNN with evenly spaced centers (widths equal
/// to the spacing) and seeded weights, evaluated on `points` uniform samples.
pub fn hessian_study(
    dim: usize,
    neurons: usize,
    points: usize,
    seed: u64,
) -> LabResult<HessianStudy> {
    if dim < 2 {
        return Err(LabError::usage("hessian needs --dim >= 2"));
    }
    if points == 0 {
        return Err(LabError::usage("hessian needs --data >= 1"));
    }
    let (lo, hi) = crate::runs::DOMAIN;
    let mut rng = derive_rng(seed, &[]);
    let model = SgnnModel::init(dim, neurons, lo, hi, &mut rng)?;
    let x = uniform_points(points, dim, lo, hi, &mut rng)?;
    let g = sgnn_to_grbfnn(&model, HESSIAN_UNIT_CAP)?;
    let source = grbfnn_weight_hessian(&g, &x)?;
    let jac = mapping_jacobian(&model, HESSIAN_UNIT_CAP)?;
    let bundle = projected_hessian(&source, &jac, None)?;

    let jd = jac.to_dense();
    let dense = matmul(&matmul(&jd.transpose(), &source)?, &jd)?;
    let norm = dense.frobenius_norm();
    let diff = dense.sub(&bundle.projected)?.frobenius_norm();
    let triple_product_residual = if norm == 0.0 { diff } else { diff / norm };

    let ev = &bundle.projected_eigenvalues;
    let max = ev.first().copied().unwrap_or(0.0);
    let min = ev.last().copied().unwrap_or(0.0);
    let min_eigen_ratio = if max > 0.0 { min / max } else { min };
    let dominance = dominance_report(&bundle, bundle.dominant_rows)?;
    Ok(HessianStudy {
        split_residual: bundle.split_residual(),
        bundle,
        triple_product_residual,
        min_eigen_ratio,
        dominance,
    })
}
