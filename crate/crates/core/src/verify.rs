//! Independent checks used by the test suites and the `gradcheck` /
//! `equivalence` commands.

use crate::error::{Error, Result};
use crate::grbfnn::{sgnn_to_grbfnn, GaussianUnits};
use crate::linalg::Matrix;
use crate::sgnn::SgnnModel;
use crate::trainer::Trainable;

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(floor)
}

/// SGNN output at `x` by explicit summation over every neuron path:
/// `Σ_{i_0..i_{d-1}} Π_ℓ φˡ_{i_ℓ}(x_ℓ) · Π_{ℓ≥1} Wˡ[i_ℓ, i_{ℓ-1}]`.
///
/// Cost is `Π N_ℓ` terms; meant for small models only.
pub fn brute_force_sgnn(model: &SgnnModel, x: &[f64]) -> f64 {
    fn phi(model: &SgnnModel, l: usize, i: usize, x: f64) -> f64 {
        let z = (x - model.centers()[l][i]) / model.sigmas()[l][i];
        (-0.5 * z * z).exp()
    }
    fn walk(model: &SgnnModel, x: &[f64], l: usize, prev: usize, acc: f64) -> f64 {
        if l == model.dim() {
            return acc;
        }
        (0..model.widths()[l])
            .map(|i| {
                let w = model.weights()[l - 1][(i, prev)];
                walk(model, x, l + 1, i, acc * w * phi(model, l, i, x[l]))
            })
            .sum()
    }
    match model.output_weights() {
        Some(ow) => ow
            .iter()
            .enumerate()
            .map(|(i, w)| w * phi(model, 0, i, x[0]))
            .sum(),
        None => (0..model.widths()[0])
            .map(|i| walk(model, x, 1, i, phi(model, 0, i, x[0])))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCheck {
    pub points: usize,
    pub units: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Compares the SGNN forward pass with its converted GRBFNN on `points`.
pub fn check_equivalence(
    model: &SgnnModel,
    points: &Matrix,
    unit_cap: usize,
) -> Result<EquivalenceCheck> {
    let g = sgnn_to_grbfnn(model, unit_cap)?;
    let a = model.predict(points)?;
    let b = g.predict(points)?;
    let mut rel: f64 = 0.0;
    let mut abs: f64 = 0.0;
    for (x, y) in a.iter().zip(&b) {
        rel = rel.max(relative_error(*x, *y, f64::MIN_POSITIVE));
        abs = abs.max((x - y).abs());
    }
    Ok(EquivalenceCheck {
        points: points.rows(),
        units: g.unit_count(),
        max_rel_error: rel,
        max_abs_error: abs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Gradient of `L(θ) = Σ_i g_i f(x_i; θ)` by central differences.
pub fn finite_difference_gradient<M: Trainable + Clone>(
    model: &M,
    batch: &Matrix,
    output_grad: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if output_grad.len() != batch.rows() {
        return Err(Error::dims("one output gradient per batch row"));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    let base = model.param_vector();
    let mut probe = model.clone();
    let mut loss = |p: &[f64]| -> Result<f64> {
        probe.load_params(p)?;
        let pred = probe.predict_batch(batch)?;
        Ok(pred.iter().zip(output_grad).map(|(f, g)| f * g).sum())
    };
    let mut params = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        params[i] = base[i] + h;
        let up = loss(&params)?;
        params[i] = base[i] - h;
        let down = loss(&params)?;
        params[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Analytic backward pass against central differences with step `h`.
///
/// Relative errors use a floor of `floor` in the denominator so that
/// components that vanish analytically are compared absolutely.
pub fn check_gradient<M: Trainable + Clone>(
    model: &M,
    batch: &Matrix,
    output_grad: &[f64],
    h: f64,
    floor: f64,
) -> Result<GradCheck> {
    let (_, cache) = model.forward_cached(batch)?;
    let analytic = model.backward_flat(&cache, output_grad)?;
    let numeric = finite_difference_gradient(model, batch, output_grad, h)?;
    let mut worst = (0.0, 0);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(*a, *n, floor);
        if e > worst.0 || e.is_nan() {
            worst = (e, i);
        }
    }
    Ok(GradCheck {
        analytic,
        numeric,
        max_rel_error: worst.0,
        worst_index: worst.1,
    })
}
