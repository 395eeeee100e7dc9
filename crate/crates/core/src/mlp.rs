//! Dense feed-forward baselines with ReLU or Sigmoid hidden activations and
//! a linear scalar output.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output
    /// `a = apply(z)`. ReLU uses 0 at the kink.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    /// `weights[l]` is `sizes[l+1] × sizes[l]`.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// Parameter count of a dense net with the given layer sizes.
pub fn mlp_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `[d, width × hidden_layers, 1]`
pub fn mlp_sizes(d: usize, hidden_layers: usize, width: usize) -> Vec<usize> {
    let mut sizes = vec![d];
    sizes.extend(std::iter::repeat_n(width, hidden_layers));
    sizes.push(1);
    sizes
}

impl MlpModel {
    /// Hidden layers get He-normal weights (`std = √(2/fan_in)`) for ReLU or
    /// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`) for Sigmoid; the
    /// linear output layer is Glorot-uniform in both cases. Biases start at
    /// zero.
    pub fn init(sizes: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::invalid(format!(
                "an MLP needs input, at least one hidden layer and output, got sizes {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "layer sizes must be positive: {sizes:?}"
            )));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::invalid("MLP output must be scalar"));
        }
        let n_layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let hidden = l + 1 < n_layers;
            let m = if hidden && activation == Activation::Relu {
                let std = (2.0 / fan_in as f64).sqrt();
                Matrix::from_fn(fan_out, fan_in, |_, _| std * rng.normal())
            } else {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform_unchecked(-bound, bound))
            };
            weights.push(m);
        }
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn from_parts(
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() < 2 || weights.len() != biases.len() {
            return Err(Error::dims(
                "an MLP needs >= 2 weight layers and one bias per layer",
            ));
        }
        let mut sizes = vec![weights[0].cols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.cols() != *sizes.last().unwrap() || b.len() != w.rows() {
                return Err(Error::dims("MLP layer shapes do not chain"));
            }
            sizes.push(w.rows());
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::invalid("MLP output must be scalar"));
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            activation,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn hidden_layers(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn param_count(&self) -> usize {
        mlp_param_count(&self.sizes)
    }

    /// Per layer: weights row-major, then bias.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w.as_slice());
            v.extend_from_slice(b);
        }
        v
    }

    pub fn load_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dims(format!(
                "parameter vector has length {}, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&params[off..off + n]);
            off += n;
            let nb = b.len();
            b.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Vec<f64>, MlpCache)> {
        if batch.cols() != self.dim() {
            return Err(Error::dims(format!(
                "MLP with input {} got a batch with {} columns",
                self.dim(),
                batch.cols()
            )));
        }
        let rows = batch.rows();
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(batch.clone());
        for (l, (w, bias)) in self.weights.iter().zip(&self.biases).enumerate() {
            let wt = w.transpose();
            let input = &acts[l];
            let mut z = Matrix::zeros(rows, w.rows());
            for r in 0..rows {
                let zr = z.row_mut(r);
                zr.copy_from_slice(bias);
                for (j, &a) in input.row(r).iter().enumerate() {
                    if a != 0.0 {
                        axpy(a, wt.row(j), zr);
                    }
                }
            }
            let a = if l + 1 < n_layers {
                let mut a = z.clone();
                a.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
                a
            } else {
                z.clone()
            };
            pre.push(z);
            acts.push(a);
        }
        let output = acts[n_layers].as_slice().to_vec();
        Ok((output, MlpCache { pre, acts }))
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.forward(batch).map(|(o, _)| o)
    }

    /// Gradient of `Σ_b output_grad[b] · f(x_b)`, flattened like
    /// [`MlpModel::param_vector`].
    pub fn backward(&self, cache: &MlpCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        let n_layers = self.weights.len();
        let rows = output_grad.len();
        let consistent = cache.pre.len() == n_layers
            && cache.acts.len() == n_layers + 1
            && cache
                .pre
                .iter()
                .zip(&self.sizes[1..])
                .all(|(z, &n)| z.shape() == (rows, n));
        if !consistent {
            return Err(Error::dims(
                "forward cache does not match this model or gradient",
            ));
        }
        let mut d_w: Vec<Matrix> = self
            .weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        let mut d_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        let mut delta = Matrix::from_vec(rows, 1, output_grad.to_vec())?;
        for l in (0..n_layers).rev() {
            let input = &cache.acts[l];
            let w = &self.weights[l];
            let mut g_in = Matrix::zeros(rows, w.cols());
            for r in 0..rows {
                let in_row = input.row(r);
                let gi = g_in.row_mut(r);
                for (i, &di) in delta.row(r).iter().enumerate() {
                    if di == 0.0 {
                        continue;
                    }
                    d_b[l][i] += di;
                    axpy(di, in_row, d_w[l].row_mut(i));
                    if l > 0 {
                        axpy(di, w.row(i), gi);
                    }
                }
            }
            if l > 0 {
                let z = &cache.pre[l - 1];
                let a = &cache.acts[l];
                for ((g, &zv), &av) in g_in
                    .as_mut_slice()
                    .iter_mut()
                    .zip(z.as_slice())
                    .zip(a.as_slice())
                {
                    *g *= self.activation.derivative(zv, av);
                }
                delta = g_in;
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in d_w.iter().zip(&d_b) {
            flat.extend_from_slice(w.as_slice());
            flat.extend_from_slice(b);
        }
        Ok(flat)
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Pre-activations per layer.
    pub pre: Vec<Matrix>,
    /// `acts[0]` is the input batch, `acts[l+1]` the output of layer `l`.
    pub acts: Vec<Matrix>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameter_counts() {
        let cases = [
            (4, 20, 1381),
            (4, 40, 5161),
            (7, 40, 10081),
            (10, 40, 15001),
            (10, 50, 23251),
            (10, 60, 33301),
            (10, 70, 45151),
            (10, 80, 58801),
        ];
        for (layers, width, want) in cases {
            assert_eq!(mlp_param_count(&mlp_sizes(4, layers, width)), want);
        }
        let m = MlpModel::init(&mlp_sizes(4, 4, 20), Activation::Relu, &mut Rng::new(1)).unwrap();
        assert_eq!(m.param_vector().len(), 1381);
    }

    #[test]
    fn init_rules() {
        let a = MlpModel::init(&mlp_sizes(3, 2, 8), Activation::Sigmoid, &mut Rng::new(4)).unwrap();
        let b = MlpModel::init(&mlp_sizes(3, 2, 8), Activation::Sigmoid, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.biases().iter().flatten().all(|&v| v == 0.0));
        let bound = (6.0f64 / 11.0).sqrt();
        assert!(a.weights()[0].as_slice().iter().all(|w| w.abs() <= bound));
        assert!(MlpModel::init(&[], Activation::Relu, &mut Rng::new(1)).is_err());
        assert!(MlpModel::init(&[3, 1], Activation::Relu, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn zero_weights_emit_output_bias() {
        let mut m =
            MlpModel::init(&mlp_sizes(2, 2, 3), Activation::Relu, &mut Rng::new(1)).unwrap();
        let mut p = vec![0.0; m.param_count()];
        let last = p.len() - 1;
        p[last] = 0.75;
        m.load_params(&p).unwrap();
        let x = Matrix::from_fn(4, 2, |r, c| (r * 3 + c) as f64 - 2.0);
        assert_eq!(m.predict(&x).unwrap(), vec![0.75; 4]);
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Relu.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.derivative(0.0, 0.0), 0.0);
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn backward_rejects_mismatch() {
        let m = MlpModel::init(&mlp_sizes(2, 1, 3), Activation::Relu, &mut Rng::new(1)).unwrap();
        let (_, cache) = m.forward(&Matrix::zeros(3, 2)).unwrap();
        assert!(m.backward(&cache, &[1.0; 2]).is_err());
        assert!(m.forward(&Matrix::zeros(3, 4)).is_err());
    }
}
