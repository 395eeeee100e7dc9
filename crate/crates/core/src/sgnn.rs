//! Separable Gaussian neural network.
//!
//! Layer `ℓ` (0-based) holds `N_ℓ` univariate Gaussians that read only input
//! coordinate `x_ℓ`. The first layer emits its activations directly; every
//! later layer multiplies its activations by a weighted sum of the previous
//! layer's outputs:
//!
//! ```text
//! out⁰_i = φ⁰_i(x_0)
//! outˡ_i = φˡ_i(x_ℓ) · Σ_j Wˡ_ij · outˡ⁻¹_j          ℓ = 1..d-1
//! f(x)   = Σ_i outᵈ⁻¹_i
//! ```
//!
//! `weights[ℓ-1]` is the `N_ℓ × N_{ℓ-1}` matrix feeding layer `ℓ`. Output
//! weights are fixed at one, except for `d = 1` where the model would
//! otherwise have no weights at all; there a trainable output vector of
//! length `N_0` is used.
//!
//! Flat parameter order (for optimizers and Hessians) is layer-major:
//! all weight matrices row-major (or the output vector when `d = 1`), then
//! every layer's centers, then every layer's widths.

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng::Rng;
use crate::SIGMA_MIN;

/// `exp(-(x-μ)²/(2σ²))`
pub fn gaussian_activation(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let z = (x - mu) / sigma;
    Ok((-0.5 * z * z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnnModel {
    widths: Vec<usize>,
    centers: Vec<Vec<f64>>,
    sigmas: Vec<Vec<f64>>,
    weights: Vec<Matrix>,
    output_weights: Option<Vec<f64>>,
    sigma_min: f64,
}

/// Evenly spaced centers on `[lo, hi]` with width equal to the spacing.
/// A single neuron sits at the midpoint with width `(hi - lo) / 2`.
fn even_layer(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.5 * (lo + hi)], vec![0.5 * (hi - lo)]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    let centers = (0..n).map(|k| lo + k as f64 * step).collect();
    (centers, vec![step; n])
}

impl SgnnModel {
    /// `d` layers of `n` neurons each; see [`SgnnModel::init_layers`].
    pub fn init(d: usize, n: usize, lo: f64, hi: f64, rng: &mut Rng) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("SGNN needs at least one layer"));
        }
        Self::init_layers(&vec![n; d], lo, hi, rng)
    }

    /// Centers evenly spread over `[lo, hi]` in every layer, widths equal to
    /// the center spacing, weights uniform on `±1/√fan_in`.
    pub fn init_layers(widths: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::invalid(format!(
                "layer widths must be non-empty and positive, got {widths:?}"
            )));
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty domain [{lo}, {hi}]")));
        }
        let (centers, sigmas): (Vec<_>, Vec<_>) =
            widths.iter().map(|&n| even_layer(n, lo, hi)).unzip();
        let weights = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Matrix::from_fn(w[1], w[0], |_, _| rng.uniform_unchecked(-bound, bound))
            })
            .collect();
        let output_weights = (widths.len() == 1).then(|| {
            let bound = 1.0 / (widths[0] as f64).sqrt();
            (0..widths[0])
                .map(|_| rng.uniform_unchecked(-bound, bound))
                .collect()
        });
        let mut model = Self {
            widths: widths.to_vec(),
            centers,
            sigmas,
            weights,
            output_weights,
            sigma_min: SIGMA_MIN,
        };
        model.clamp_sigmas();
        Ok(model)
    }

    /// Assembles a model from explicit parameters, validating every shape.
    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        sigmas: Vec<Vec<f64>>,
        weights: Vec<Matrix>,
        output_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let widths: Vec<usize> = centers.iter().map(Vec::len).collect();
        let d = widths.len();
        if d == 0 || widths.contains(&0) {
            return Err(Error::invalid("every layer needs at least one neuron"));
        }
        if sigmas.len() != d || sigmas.iter().zip(&widths).any(|(s, &n)| s.len() != n) {
            return Err(Error::dims("sigma shapes do not match centers"));
        }
        if sigmas.iter().flatten().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("sigmas must be positive"));
        }
        if weights.len() != d - 1 {
            return Err(Error::dims(format!(
                "{d} layers need {} weight matrices, got {}",
                d - 1,
                weights.len()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.shape() != (widths[l + 1], widths[l]) {
                return Err(Error::dims(format!(
                    "weight matrix {l} is {:?}, expected {:?}",
                    w.shape(),
                    (widths[l + 1], widths[l])
                )));
            }
        }
        match (&output_weights, d) {
            (Some(v), 1) if v.len() == widths[0] => {}
            (None, d) if d >= 2 => {}
            _ => {
                return Err(Error::dims(
                    "output weights are required for d = 1 (length N) and absent otherwise",
                ))
            }
        }
        Ok(Self {
            widths,
            centers,
            sigmas,
            weights,
            output_weights,
            sigma_min: SIGMA_MIN,
        })
    }

    pub fn dim(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn sigmas(&self) -> &[Vec<f64>] {
        &self.sigmas
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn output_weights(&self) -> Option<&[f64]> {
        self.output_weights.as_deref()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn set_sigma_min(&mut self, sigma_min: f64) {
        self.sigma_min = sigma_min;
        self.clamp_sigmas();
    }

    pub fn neuron_count(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn weight_count(&self) -> usize {
        match &self.output_weights {
            Some(v) => v.len(),
            None => self.weights.iter().map(|w| w.rows() * w.cols()).sum(),
        }
    }

    /// Weights plus one center and one width per neuron.
    pub fn param_count(&self) -> usize {
        self.weight_count() + 2 * self.neuron_count()
    }

    fn clamp_sigmas(&mut self) {
        let floor = self.sigma_min;
        self.sigmas
            .iter_mut()
            .flatten()
            .for_each(|s| *s = s.max(floor));
    }

    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        match &self.output_weights {
            Some(ow) => v.extend_from_slice(ow),
            None => self
                .weights
                .iter()
                .for_each(|w| v.extend_from_slice(w.as_slice())),
        }
        self.centers.iter().for_each(|c| v.extend_from_slice(c));
        self.sigmas.iter().for_each(|s| v.extend_from_slice(s));
        v
    }

    /// Inverse of [`SgnnModel::param_vector`]. Widths below `sigma_min` are
    /// clamped up to it.
    pub fn load_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dims(format!(
                "parameter vector has length {}, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut rest = params;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head
        };
        match &mut self.output_weights {
            Some(ow) => {
                let n = ow.len();
                ow.copy_from_slice(take(n));
            }
            None => {
                for w in &mut self.weights {
                    let n = w.rows() * w.cols();
                    w.as_mut_slice().copy_from_slice(take(n));
                }
            }
        }
        for c in &mut self.centers {
            let n = c.len();
            c.copy_from_slice(take(n));
        }
        for s in &mut self.sigmas {
            let n = s.len();
            s.copy_from_slice(take(n));
        }
        self.clamp_sigmas();
        Ok(())
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.dim() {
            return Err(Error::dims(format!(
                "SGNN with d = {} got a batch with {} columns",
                self.dim(),
                batch.cols()
            )));
        }
        Ok(())
    }

    fn layer_activations(&self, batch: &Matrix, l: usize) -> Matrix {
        let n = self.widths[l];
        let mu = &self.centers[l];
        let neg_half_prec: Vec<f64> = self.sigmas[l].iter().map(|s| -0.5 / (s * s)).collect();
        let mut phi = Matrix::zeros(batch.rows(), n);
        for b in 0..batch.rows() {
            let x = batch[(b, l)];
            for ((p, &m), &k) in phi.row_mut(b).iter_mut().zip(mu).zip(&neg_half_prec) {
                let dx = x - m;
                *p = (k * dx * dx).exp();
            }
        }
        phi
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_batch(batch)?;
        let d = self.dim();
        let rows = batch.rows();
        let mut phi = Vec::with_capacity(d);
        let mut mixed = Vec::with_capacity(d.saturating_sub(1));
        let mut outs: Vec<Matrix> = Vec::with_capacity(d);

        phi.push(self.layer_activations(batch, 0));
        outs.push(phi[0].clone());
        for l in 1..d {
            let w = &self.weights[l - 1];
            // columns of W become contiguous rows so the mix is a sequence of axpys
            let wt = w.transpose();
            let prev = &outs[l - 1];
            let mut s = Matrix::zeros(rows, self.widths[l]);
            for b in 0..rows {
                let s_row = s.row_mut(b);
                for (j, &pj) in prev.row(b).iter().enumerate() {
                    axpy(pj, wt.row(j), s_row);
                }
            }
            let p = self.layer_activations(batch, l);
            let mut o = s.clone();
            o.as_mut_slice()
                .iter_mut()
                .zip(p.as_slice())
                .for_each(|(o, p)| *o *= p);
            phi.push(p);
            mixed.push(s);
            outs.push(o);
        }

        let last = &outs[d - 1];
        let output: Vec<f64> = match &self.output_weights {
            Some(ow) => (0..rows)
                .map(|b| crate::linalg::dot(last.row(b), ow))
                .collect(),
            None => (0..rows).map(|b| last.row(b).iter().sum()).collect(),
        };
        let cache = ForwardCache {
            inputs: batch.clone(),
            phi,
            mixed,
            outs,
            output: output.clone(),
        };
        Ok((output, cache))
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.forward(batch).map(|(o, _)| o)
    }

    /// Gradient of `Σ_b output_grad[b] · f(x_b)` with respect to every
    /// parameter.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<SgnnGradients> {
        let d = self.dim();
        let rows = cache.inputs.rows();
        let consistent = cache.phi.len() == d
            && cache.mixed.len() + 1 == d
            && cache.inputs.cols() == d
            && cache
                .phi
                .iter()
                .zip(&self.widths)
                .all(|(p, &n)| p.shape() == (rows, n));
        if !consistent {
            return Err(Error::dims("forward cache does not match this model"));
        }
        if output_grad.len() != rows {
            return Err(Error::dims(format!(
                "output gradient has length {}, batch has {rows} rows",
                output_grad.len()
            )));
        }

        let mut grads = SgnnGradients::zeros_like(self);
        let last = self.widths[d - 1];
        let mut g_out = Matrix::zeros(rows, last);
        match &self.output_weights {
            Some(ow) => {
                let dv = grads.output_weights.as_mut().expect("d = 1 gradient slot");
                for (b, &g) in output_grad.iter().enumerate() {
                    axpy(g, cache.outs[0].row(b), dv);
                    for (go, &w) in g_out.row_mut(b).iter_mut().zip(ow) {
                        *go = g * w;
                    }
                }
            }
            None => {
                for (b, &g) in output_grad.iter().enumerate() {
                    g_out.row_mut(b).fill(g);
                }
            }
        }

        for l in (0..d).rev() {
            let phi = &cache.phi[l];
            let n = self.widths[l];
            let mut g_phi = g_out.clone();
            if l > 0 {
                let s = &cache.mixed[l - 1];
                let mut g_s = g_out;
                g_s.as_mut_slice()
                    .iter_mut()
                    .zip(phi.as_slice())
                    .for_each(|(g, p)| *g *= p);
                g_phi
                    .as_mut_slice()
                    .iter_mut()
                    .zip(s.as_slice())
                    .for_each(|(g, s)| *g *= s);

                let w = &self.weights[l - 1];
                let prev = &cache.outs[l - 1];
                let dw = &mut grads.weights[l - 1];
                let mut g_prev = Matrix::zeros(rows, self.widths[l - 1]);
                for b in 0..rows {
                    let prev_row = prev.row(b);
                    let gp_row = g_prev.row_mut(b);
                    for (i, &gsi) in g_s.row(b).iter().enumerate() {
                        if gsi != 0.0 {
                            axpy(gsi, prev_row, dw.row_mut(i));
                            axpy(gsi, w.row(i), gp_row);
                        }
                    }
                }
                g_out = g_prev;
            } else {
                g_out = Matrix::zeros(0, 0);
            }

            let mu = &self.centers[l];
            let sig = &self.sigmas[l];
            let dmu = &mut grads.centers[l];
            let dsig = &mut grads.sigmas[l];
            for b in 0..rows {
                let x = cache.inputs[(b, l)];
                let gp = g_phi.row(b);
                let p = phi.row(b);
                for i in 0..n {
                    let t = gp[i] * p[i];
                    let dx = x - mu[i];
                    let inv_s2 = 1.0 / (sig[i] * sig[i]);
                    dmu[i] += t * dx * inv_s2;
                    dsig[i] += t * dx * dx * inv_s2 / sig[i];
                }
            }
        }
        Ok(grads)
    }
}

/// Intermediate values recorded by [`SgnnModel::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Matrix,
    /// Gaussian activations per layer, `batch × N_ℓ`.
    pub phi: Vec<Matrix>,
    /// Weighted sums `Σ_j Wˡ_ij outˡ⁻¹_j` for layers `1..d`.
    pub mixed: Vec<Matrix>,
    /// Layer outputs after mixing (`outs[0] == phi[0]`).
    pub outs: Vec<Matrix>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnnGradients {
    pub weights: Vec<Matrix>,
    pub output_weights: Option<Vec<f64>>,
    pub centers: Vec<Vec<f64>>,
    pub sigmas: Vec<Vec<f64>>,
}

impl SgnnGradients {
    fn zeros_like(model: &SgnnModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            output_weights: model.output_weights.as_ref().map(|v| vec![0.0; v.len()]),
            centers: model.widths.iter().map(|&n| vec![0.0; n]).collect(),
            sigmas: model.widths.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Same ordering as [`SgnnModel::param_vector`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        match &self.output_weights {
            Some(ow) => v.extend_from_slice(ow),
            None => self
                .weights
                .iter()
                .for_each(|w| v.extend_from_slice(w.as_slice())),
        }
        self.centers.iter().for_each(|c| v.extend_from_slice(c));
        self.sigmas.iter().for_each(|s| v.extend_from_slice(s));
        v
    }
}
