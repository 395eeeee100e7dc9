//! The ten synthetic benchmark functions and the uniform sampler used to
//! build training sets from them.
//!
//! Dimension indices are 1-based in the formulas below and 0-based in code.
//! Where a formula references `x_{j+1}` the index wraps so that `x_{d+1}`
//! is `x_1`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

pub const NUM_CANDIDATES: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateFunction {
    id: u8,
    dim: usize,
}

/// Builds candidate `id` (1..=10) in `dim` dimensions.
///
/// `dim = 1` is rejected: the saddle and exponential-sinusoid sums couple
/// neighbouring coordinates and have no one-dimensional form.
pub fn make_candidate(id: u8, dim: usize) -> Result<CandidateFunction> {
    if !(1..=NUM_CANDIDATES).contains(&id) {
        return Err(Error::invalid(format!(
            "candidate id must be in 1..=10, got {id}"
        )));
    }
    if dim < 2 {
        return Err(Error::invalid(format!(
            "candidate functions need dim >= 2, got {dim}"
        )));
    }
    Ok(CandidateFunction { id, dim })
}

impl CandidateFunction {
    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.id {
            1 => "root sum squared",
            2 => "second-degree polynomial",
            3 => "exponential-square sum",
            4 => "exponential-sinusoid sum",
            5 => "polynomial-sinusoid sum",
            6 => "inverse-exponential-square sum",
            7 => "sigmoidal",
            8 => "gaussian",
            9 => "linear",
            _ => "constant",
        }
    }

    /// Evaluates the function at `x` (length `dim`).
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        let next = |j: usize| x[(j + 1) % d];
        match self.id {
            1 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            2 => (0..d).map(|j| x[j] * x[j] * next(j)).sum::<f64>() / 50.0,
            3 => x.iter().map(|v| (v * v / 50.0).exp()).sum::<f64>() / 5.0,
            4 => {
                (0..d)
                    .map(|j| (x[j] * x[j] / 50.0).exp() * next(j).sin())
                    .sum::<f64>()
                    / 5.0
            }
            5 => {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * v * (((j + 1) as f64) * v).cos())
                    .sum::<f64>()
                    / 50.0
            }
            6 => 10.0 / x.iter().map(|v| (v * v / 25.0).exp()).sum::<f64>(),
            7 => 10.0 / (1.0 + (-x.iter().sum::<f64>() / 5.0).exp()),
            8 => 10.0 * (-x.iter().map(|v| v * v).sum::<f64>() / 100.0).exp(),
            9 => x.iter().sum(),
            _ => 1.0,
        }
    }

    pub fn eval_rows(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        if inputs.cols() != self.dim {
            return Err(Error::dims(format!(
                "f{} expects {} columns, got {}",
                self.id,
                self.dim,
                inputs.cols()
            )));
        }
        Ok((0..inputs.rows())
            .map(|r| self.eval(inputs.row(r)))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
}

impl Dataset {
    /// Wraps existing samples and splits them with a seeded shuffle;
    /// `round(split · m)` rows go to training.
    pub fn from_samples(
        inputs: Matrix,
        targets: Vec<f64>,
        split: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let m = inputs.rows();
        if targets.len() != m {
            return Err(Error::dims(format!(
                "{m} input rows but {} targets",
                targets.len()
            )));
        }
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::invalid(format!(
                "split must be in (0, 1), got {split}"
            )));
        }
        let n_train = (split * m as f64).round() as usize;
        if n_train == 0 || n_train == m {
            return Err(Error::invalid(format!(
                "split {split} of {m} samples leaves an empty partition"
            )));
        }
        let mut order: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut order);
        let mut train_idx = order[..n_train].to_vec();
        let mut val_idx = order[n_train..].to_vec();
        train_idx.sort_unstable();
        val_idx.sort_unstable();
        Ok(Self {
            inputs,
            targets,
            train_idx,
            val_idx,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn train(&self) -> (Matrix, Vec<f64>) {
        self.subset(&self.train_idx)
    }

    pub fn validation(&self) -> (Matrix, Vec<f64>) {
        self.subset(&self.val_idx)
    }

    pub fn subset(&self, idx: &[usize]) -> (Matrix, Vec<f64>) {
        (
            self.inputs.select_rows(idx),
            idx.iter().map(|&i| self.targets[i]).collect(),
        )
    }
}

/// Draws `m` points i.i.d. uniform on `[lo, hi)^d`, evaluates `f`, and
/// splits the rows into training and validation sets.
pub fn sample_dataset(
    f: &CandidateFunction,
    m: usize,
    lo: f64,
    hi: f64,
    split: f64,
    rng: &mut Rng,
) -> Result<Dataset> {
    if m < 10 {
        return Err(Error::invalid(format!("need at least 10 samples, got {m}")));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty sampling range [{lo}, {hi})")));
    }
    let inputs = uniform_points(m, f.dim(), lo, hi, rng)?;
    let targets = f.eval_rows(&inputs)?;
    Dataset::from_samples(inputs, targets, split, rng)
}

/// `m × d` matrix of i.i.d. uniform draws on `[lo, hi)`.
pub fn uniform_points(m: usize, d: usize, lo: f64, hi: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("empty sampling range [{lo}, {hi})")));
    }
    let data = (0..m * d).map(|_| rng.uniform_unchecked(lo, hi)).collect();
    Matrix::from_vec(m, d, data)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn grid_points(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
        .collect()
}

/// Evaluates `f` on an `n × n` grid over `(x1, x2) ∈ [lo, hi]²` with all
/// other coordinates held at zero. Entry `(r, c)` is `f` at
/// `x1 = grid[c]`, `x2 = grid[r]`.
pub fn grid_slice(f: &CandidateFunction, n: usize, lo: f64, hi: f64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs n >= 2, got {n}")));
    }
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty grid range [{lo}, {hi}]")));
    }
    let g = grid_points(n, lo, hi);
    let mut x = vec![0.0; f.dim()];
    Ok(Matrix::from_fn(n, n, |r, c| {
        x[0] = g[c];
        x[1] = g[r];
        f.eval(&x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn f(id: u8, d: usize) -> CandidateFunction {
        make_candidate(id, d).unwrap()
    }

    #[test]
    fn spot_values() {
        assert_eq!(f(1, 2).eval(&[3.0, 4.0]), 5.0);
        assert_eq!(f(7, 4).eval(&[0.0; 4]), 5.0);
        assert!((f(3, 2).eval(&[0.0, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(f(10, 3).eval(&[1.0, -7.0, 2.5]), 1.0);
    }

    #[test]
    fn cyclic_neighbour_terms() {
        // f2 at (1,2,3): (1·2 + 4·3 + 9·1)/50
        assert!((f(2, 3).eval(&[1.0, 2.0, 3.0]) - 23.0 / 50.0).abs() < 1e-15);
        // f4 at (a,b): (e^{a²/50} sin b + e^{b²/50} sin a)/5
        let (a, b) = (1.5f64, -2.0f64);
        let want = ((a * a / 50.0).exp() * b.sin() + (b * b / 50.0).exp() * a.sin()) / 5.0;
        assert!((f(4, 2).eval(&[a, b]) - want).abs() < 1e-15);
    }

    #[test]
    fn one_based_frequency_in_f5() {
        let x = [0.7, 0.7, 0.7];
        let want = 0.49 * (0.7f64.cos() + 1.4f64.cos() + 2.1f64.cos()) / 50.0;
        assert!((f(5, 3).eval(&x) - want).abs() < 1e-15);
    }

    #[test]
    fn invalid_requests() {
        assert!(make_candidate(0, 2).is_err());
        assert!(make_candidate(11, 2).is_err());
        assert!(make_candidate(3, 1).is_err());
    }

    #[test]
    fn dataset_split_sizes() {
        let mut rng = Rng::new(1);
        let ds = sample_dataset(&f(3, 2), 1000, -8.0, 8.0, 0.8, &mut rng).unwrap();
        assert_eq!(ds.train_idx.len(), 800);
        assert_eq!(ds.val_idx.len(), 200);
        let mut all: Vec<usize> = ds.train_idx.iter().chain(&ds.val_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(ds.inputs.as_slice().iter().all(|v| (-8.0..8.0).contains(v)));
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = sample_dataset(&f(5, 3), 100, -8.0, 8.0, 0.8, &mut Rng::new(9)).unwrap();
        let b = sample_dataset(&f(5, 3), 100, -8.0, 8.0, 0.8, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_rejects_tiny() {
        assert!(sample_dataset(&f(1, 2), 9, -8.0, 8.0, 0.8, &mut Rng::new(1)).is_err());
        assert!(sample_dataset(&f(1, 2), 100, 8.0, -8.0, 0.8, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn grid_constant_and_linear() {
        let ones = grid_slice(&f(10, 5), 7, -8.0, 8.0).unwrap();
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));

        let g = grid_points(9, -8.0, 8.0);
        let lin = grid_slice(&f(9, 2), 9, -8.0, 8.0).unwrap();
        assert_eq!(g[4], 0.0);
        assert_eq!(lin.row(4), g.as_slice());
    }

    #[test]
    fn grid_corner_of_f5() {
        let s = grid_slice(&f(5, 2), 2, -8.0, 8.0).unwrap();
        // value from direct evaluation: (64 cos 8 + 64 cos 16) / 50
        assert!((s[(1, 1)] - (-1.412_044_178_088_957_7)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn positivity_and_minimum(x in proptest::collection::vec(-8.0f64..8.0, 2..6)) {
            let d = x.len();
            prop_assert!(f(6, d).eval(&x) > 0.0);
            prop_assert!(f(8, d).eval(&x) > 0.0);
            prop_assert!(f(3, d).eval(&x) >= d as f64 / 5.0);
            prop_assert_eq!(f(1, d).eval(&x), norm2(&x));
        }

        #[test]
        fn symmetric_sums_ignore_order(x in proptest::collection::vec(-8.0f64..8.0, 2..6)) {
            let d = x.len();
            let mut rev = x.clone();
            rev.reverse();
            for id in [1u8, 3, 6, 7, 8, 9, 10] {
                let a = f(id, d).eval(&x);
                let b = f(id, d).eval(&rev);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "f{} {} vs {}", id, a, b);
            }
        }
    }
}
