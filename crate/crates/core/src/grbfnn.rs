//! Gaussian radial-basis-function network and the map that turns an SGNN
//! into one.
//!
//! The isotropic model `f(x) = Σ_k W_k exp(-‖x - μ_k‖² / (2σ_k²))` is the
//! trainable baseline. The anisotropic variant carries one width per unit
//! and dimension; it is the exact image of an SGNN under
//! [`sgnn_to_grbfnn`].

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::sgnn::SgnnModel;
use crate::SIGMA_MIN;

/// Default limit on the number of units [`sgnn_to_grbfnn`] will emit.
pub const DEFAULT_UNIT_CAP: usize = 100_000;

/// Shared view over both GRBFNN flavours.
pub trait GaussianUnits {
    fn dim(&self) -> usize;
    fn unit_count(&self) -> usize;
    fn out_weights(&self) -> &[f64];
    /// Response of unit `k` at `x`, in `(0, 1]`.
    fn unit_response(&self, k: usize, x: &[f64]) -> f64;

    /// `m × K` matrix of unit responses; `forward = design · W`.
    fn design_matrix(&self, batch: &Matrix) -> Result<Matrix> {
        check_cols(batch, self.dim())?;
        let k = self.unit_count();
        let mut d = Matrix::zeros(batch.rows(), k);
        for r in 0..batch.rows() {
            let x = batch.row(r);
            for (u, slot) in d.row_mut(r).iter_mut().enumerate() {
                *slot = self.unit_response(u, x);
            }
        }
        Ok(d)
    }

    fn predict(&self, batch: &Matrix) -> Result<Vec<f64>> {
        check_cols(batch, self.dim())?;
        let w = self.out_weights();
        Ok((0..batch.rows())
            .map(|r| {
                let x = batch.row(r);
                w.iter()
                    .enumerate()
                    .map(|(k, wk)| wk * self.unit_response(k, x))
                    .sum()
            })
            .collect())
    }
}

fn check_cols(batch: &Matrix, d: usize) -> Result<()> {
    if batch.cols() != d {
        return Err(Error::dims(format!(
            "GRBFNN with d = {d} got a batch with {} columns",
            batch.cols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrbfnnModel {
    centers: Matrix,
    widths: Vec<f64>,
    out_weights: Vec<f64>,
    sigma_min: f64,
}

impl GrbfnnModel {
    /// `k` units with centers drawn uniformly over `[lo, hi)^d`, widths
    /// `(hi - lo) / k^{1/d}` and weights uniform on `±1/√k`.
    pub fn init(d: usize, k: usize, lo: f64, hi: f64, rng: &mut Rng) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::invalid("GRBFNN needs d >= 1 and at least one unit"));
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty domain [{lo}, {hi}]")));
        }
        let centers = Matrix::from_fn(k, d, |_, _| rng.uniform_unchecked(lo, hi));
        let width = (hi - lo) / (k as f64).powf(1.0 / d as f64);
        let bound = 1.0 / (k as f64).sqrt();
        let out_weights = (0..k)
            .map(|_| rng.uniform_unchecked(-bound, bound))
            .collect();
        Ok(Self {
            centers,
            widths: vec![width.max(SIGMA_MIN); k],
            out_weights,
            sigma_min: SIGMA_MIN,
        })
    }

    pub fn from_parts(centers: Matrix, widths: Vec<f64>, out_weights: Vec<f64>) -> Result<Self> {
        let k = centers.rows();
        if k == 0 || centers.cols() == 0 {
            return Err(Error::invalid("GRBFNN needs d >= 1 and at least one unit"));
        }
        if widths.len() != k || out_weights.len() != k {
            return Err(Error::dims(format!(
                "{k} centers, {} widths, {} weights",
                widths.len(),
                out_weights.len()
            )));
        }
        if widths.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("widths must be positive"));
        }
        Ok(Self {
            centers,
            widths,
            out_weights,
            sigma_min: SIGMA_MIN,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn out_weights_mut(&mut self) -> &mut [f64] {
        &mut self.out_weights
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// Weights, then centers (unit-major), then widths.
    pub fn param_count(&self) -> usize {
        self.unit_count() * (self.dim() + 2)
    }

    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.out_weights);
        v.extend_from_slice(self.centers.as_slice());
        v.extend_from_slice(&self.widths);
        v
    }

    /// Inverse of [`GrbfnnModel::param_vector`]; widths are clamped to
    /// `sigma_min`.
    pub fn load_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dims(format!(
                "parameter vector has length {}, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let k = self.unit_count();
        let kd = k * self.dim();
        self.out_weights.copy_from_slice(&params[..k]);
        self.centers
            .as_mut_slice()
            .copy_from_slice(&params[k..k + kd]);
        let floor = self.sigma_min;
        for (s, &p) in self.widths.iter_mut().zip(&params[k + kd..]) {
            *s = p.max(floor);
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Vec<f64>, GrbfnnCache)> {
        let design = self.design_matrix(batch)?;
        let output = (0..batch.rows())
            .map(|r| crate::linalg::dot(design.row(r), &self.out_weights))
            .collect();
        Ok((
            output,
            GrbfnnCache {
                inputs: batch.clone(),
                design,
            },
        ))
    }

    /// Gradient of `Σ_b output_grad[b] · f(x_b)`.
    pub fn backward(&self, cache: &GrbfnnCache, output_grad: &[f64]) -> Result<GrbfnnGradients> {
        let (rows, k) = cache.design.shape();
        let d = self.dim();
        if k != self.unit_count() || cache.inputs.shape() != (rows, d) {
            return Err(Error::dims("forward cache does not match this model"));
        }
        if output_grad.len() != rows {
            return Err(Error::dims(format!(
                "output gradient has length {}, batch has {rows} rows",
                output_grad.len()
            )));
        }
        let mut grads = GrbfnnGradients {
            out_weights: vec![0.0; k],
            centers: Matrix::zeros(k, d),
            widths: vec![0.0; k],
        };
        let inv_s2: Vec<f64> = self.widths.iter().map(|s| 1.0 / (s * s)).collect();
        for (b, &g) in output_grad.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let x = cache.inputs.row(b);
            let resp = cache.design.row(b);
            for u in 0..k {
                let gu = resp[u];
                grads.out_weights[u] += g * gu;
                let t = g * self.out_weights[u] * gu * inv_s2[u];
                let mu = self.centers.row(u);
                let dmu = grads.centers.row_mut(u);
                let mut r2 = 0.0;
                for ((dm, &xi), &mi) in dmu.iter_mut().zip(x).zip(mu) {
                    let dx = xi - mi;
                    r2 += dx * dx;
                    *dm += t * dx;
                }
                grads.widths[u] += t * r2 / self.widths[u];
            }
        }
        Ok(grads)
    }
}

impl GaussianUnits for GrbfnnModel {
    fn dim(&self) -> usize {
        self.centers.cols()
    }

    fn unit_count(&self) -> usize {
        self.centers.rows()
    }

    fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    #[inline]
    fn unit_response(&self, k: usize, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(self.centers.row(k))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let s = self.widths[k];
        (-0.5 * r2 / (s * s)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct GrbfnnCache {
    pub inputs: Matrix,
    pub design: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrbfnnGradients {
    pub out_weights: Vec<f64>,
    pub centers: Matrix,
    pub widths: Vec<f64>,
}

impl GrbfnnGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.out_weights.clone();
        v.extend_from_slice(self.centers.as_slice());
        v.extend_from_slice(&self.widths);
        v
    }
}

/// GRBFNN whose units have one width per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropicGrbfnn {
    centers: Matrix,
    widths: Matrix,
    out_weights: Vec<f64>,
}

impl AnisotropicGrbfnn {
    pub fn from_parts(centers: Matrix, widths: Matrix, out_weights: Vec<f64>) -> Result<Self> {
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(Error::invalid("GRBFNN needs d >= 1 and at least one unit"));
        }
        if widths.shape() != centers.shape() || out_weights.len() != centers.rows() {
            return Err(Error::dims("anisotropic GRBFNN shapes do not agree"));
        }
        if widths.as_slice().iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("widths must be positive"));
        }
        Ok(Self {
            centers,
            widths,
            out_weights,
        })
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn widths(&self) -> &Matrix {
        &self.widths
    }
}

impl GaussianUnits for AnisotropicGrbfnn {
    fn dim(&self) -> usize {
        self.centers.cols()
    }

    fn unit_count(&self) -> usize {
        self.centers.rows()
    }

    fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    #[inline]
    fn unit_response(&self, k: usize, x: &[f64]) -> f64 {
        let e: f64 = x
            .iter()
            .zip(self.centers.row(k))
            .zip(self.widths.row(k))
            .map(|((a, m), s)| {
                let z = (a - m) / s;
                z * z
            })
            .sum();
        (-0.5 * e).exp()
    }
}

/// Flat unit index of a neuron tuple: `j = i_0 + i_1·N_0 + i_2·N_0·N_1 + …`.
///
/// This is the 0-based form of the mixed-radix index; with 1-based
/// neuron numbers and uniform widths it reads `j = i_1 + i_2 N + … + i_d N^{d-1}`.
pub fn flat_index(tuple: &[usize], widths: &[usize]) -> usize {
    let mut j = 0;
    let mut stride = 1;
    for (&i, &n) in tuple.iter().zip(widths) {
        j += i * stride;
        stride *= n;
    }
    j
}

/// Inverse of [`flat_index`].
pub fn unit_tuple(mut j: usize, widths: &[usize]) -> Vec<usize> {
    widths
        .iter()
        .map(|&n| {
            let i = j % n;
            j /= n;
            i
        })
        .collect()
}

/// Number of GRBFNN units an SGNN expands into, `Π N_ℓ`.
pub fn expanded_unit_count(widths: &[usize]) -> Option<usize> {
    widths.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
}

/// Expands an SGNN into the equivalent anisotropic GRBFNN.
///
/// Unit `j = flat_index(i_0..i_{d-1})` has center `(μ⁰_{i_0}, …)`, widths
/// `(σ⁰_{i_0}, …)` and output weight `Π_ℓ Wˡ[i_ℓ, i_{ℓ-1}]`, the product of
/// the weights along the path through the chosen neurons.
pub fn sgnn_to_grbfnn(model: &SgnnModel, unit_cap: usize) -> Result<AnisotropicGrbfnn> {
    let d = model.dim();
    if d < 2 {
        return Err(Error::invalid("conversion needs an SGNN with d >= 2"));
    }
    let widths = model.widths();
    let k = expanded_unit_count(widths).ok_or(Error::Overflow("SGNN unit count"))?;
    if k > unit_cap {
        return Err(Error::CapExceeded {
            what: "GRBFNN units",
            requested: k as u128,
            cap: unit_cap as u128,
        });
    }
    let mut centers = Matrix::zeros(k, d);
    let mut sig = Matrix::zeros(k, d);
    let mut out = vec![0.0; k];
    for (j, slot) in out.iter_mut().enumerate() {
        let t = unit_tuple(j, widths);
        for l in 0..d {
            centers[(j, l)] = model.centers()[l][t[l]];
            sig[(j, l)] = model.sigmas()[l][t[l]];
        }
        *slot = (1..d)
            .map(|l| model.weights()[l - 1][(t[l], t[l - 1])])
            .product();
    }
    AnisotropicGrbfnn::from_parts(centers, sig, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_peak() {
        let m = GrbfnnModel::from_parts(
            Matrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap(),
            vec![0.7],
            vec![1.0],
        )
        .unwrap();
        let x = Matrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![1.0]);
        assert_eq!(m.design_matrix(&x).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let centers = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let pair = GrbfnnModel::from_parts(centers, vec![1.2, 1.2], vec![0.3, 0.3]).unwrap();
        let single = GrbfnnModel::from_parts(
            Matrix::from_vec(1, 2, vec![-1.0, 0.0]).unwrap(),
            vec![1.2],
            vec![0.3],
        )
        .unwrap();
        let mid = Matrix::zeros(1, 2);
        let p = pair.predict(&mid).unwrap()[0];
        let s = single.predict(&mid).unwrap()[0];
        assert!((p - 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn backward_edge_cases() {
        let mut rng = Rng::new(3);
        let m = GrbfnnModel::init(2, 4, -8.0, 8.0, &mut rng).unwrap();
        let x = Matrix::from_fn(3, 2, |r, c| (r + c) as f64);
        let (_, cache) = m.forward(&x).unwrap();
        let g = m.backward(&cache, &[0.0; 3]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));

        let at_center = m.centers().select_rows(&[2]);
        let (_, cache) = m.forward(&at_center).unwrap();
        let g = m.backward(&cache, &[1.0]).unwrap();
        assert_eq!(g.centers.row(2), &[0.0, 0.0]);
        assert!(m.backward(&cache, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn init_rules() {
        let m = GrbfnnModel::init(3, 1000, -8.0, 8.0, &mut Rng::new(1)).unwrap();
        assert!(m.widths().iter().all(|&s| (s - 1.6).abs() < 1e-12));
        let bound = 1.0 / 1000f64.sqrt();
        assert!(m.out_weights().iter().all(|w| w.abs() <= bound));
        assert!(m
            .centers()
            .as_slice()
            .iter()
            .all(|c| (-8.0..8.0).contains(c)));
        assert_eq!(m.param_count(), 5000);
    }

    #[test]
    fn param_round_trip() {
        let mut m = GrbfnnModel::init(2, 5, -8.0, 8.0, &mut Rng::new(8)).unwrap();
        let before = m.clone();
        m.load_params(&before.param_vector()).unwrap();
        assert_eq!(m, before);
        assert!(m.load_params(&[0.0; 3]).is_err());
    }

    #[test]
    fn mixed_radix_index() {
        let w = [2, 2, 2];
        assert_eq!(flat_index(&[0, 0, 0], &w), 0);
        assert_eq!(flat_index(&[1, 1, 1], &w), 7);
        assert_eq!(flat_index(&[1, 0, 1], &w), 5);
        for j in 0..24 {
            assert_eq!(flat_index(&unit_tuple(j, &[2, 3, 4]), &[2, 3, 4]), j);
        }
    }

    #[test]
    fn unit_weights_multiply_to_one() {
        let mut m = SgnnModel::init(2, 2, -8.0, 8.0, &mut Rng::new(1)).unwrap();
        m.weights_mut()[0].as_mut_slice().fill(1.0);
        let g = sgnn_to_grbfnn(&m, DEFAULT_UNIT_CAP).unwrap();
        assert_eq!(g.out_weights(), &[1.0; 4]);
    }

    #[test]
    fn two_layer_weights_are_copied() {
        let m = SgnnModel::init(2, 4, -8.0, 8.0, &mut Rng::new(12)).unwrap();
        let g = sgnn_to_grbfnn(&m, DEFAULT_UNIT_CAP).unwrap();
        assert_eq!(g.out_weights(), m.weights()[0].as_slice());
    }

    #[test]
    fn conversion_limits() {
        let m = SgnnModel::init(3, 5, -8.0, 8.0, &mut Rng::new(1)).unwrap();
        assert!(matches!(
            sgnn_to_grbfnn(&m, 100),
            Err(Error::CapExceeded { requested: 125, .. })
        ));
        let m1 = SgnnModel::init(1, 5, -8.0, 8.0, &mut Rng::new(1)).unwrap();
        assert!(sgnn_to_grbfnn(&m1, DEFAULT_UNIT_CAP).is_err());
    }
}
