//! Complexity accounting and the weight-space Hessian projection.
//!
//! With centers and widths frozen, a GRBFNN is linear in its output weights
//! `w̃`, so the sum-of-squares loss `L(w̃) = Σ_i (y_i - D_i·w̃)²` has the exact
//! Hessian `H̃ = 2 DᵀD` (`D` is the design matrix). An SGNN reaches `w̃`
//! through the product map `w̃ = g(θ)`; pulling `H̃` back through the
//! Jacobian `J = ∂g/∂θ` gives `H = Jᵀ H̃ J`. Writing `H̃ = Pᵀ Λ P` and
//! `Q = P J`, the projected Hessian splits into a dominant and a residual
//! part, `H = Q_dᵀ Λ_d Q_d + Q_sᵀ Λ_s Q_s`.

use crate::error::{Error, Result};
use crate::grbfnn::{expanded_unit_count, sgnn_to_grbfnn, unit_tuple, GaussianUnits};
use crate::io::fmt_f64;
use crate::linalg::{sym_eigen, Matrix, SymEigen};
use crate::sgnn::SgnnModel;

/// Largest unit count for which dense Hessians are built.
pub const HESSIAN_UNIT_CAP: usize = 2000;

/// Trainable variables of an SGNN with `n` neurons per layer, counting one
/// center and one width per neuron. A single layer keeps `n` output
/// weights; deeper nets have `(d-1)` weight matrices of `n × n`.
pub fn sgnn_trainable_count(d: u64, n: u64) -> u64 {
    match d {
        0 => 0,
        1 => n + 2 * n,
        _ => (d - 1) * n * n + 2 * d * n,
    }
}

/// `(N^d, N^d · (d + 2))`: output weights only, and weights plus a
/// `d`-vector center and a width per unit.
pub fn grbfnn_counts(d: u32, n: u64) -> Result<(u64, u64)> {
    let units = n.checked_pow(d).ok_or(Error::Overflow("N^d"))?;
    let full = units
        .checked_mul(d as u64 + 2)
        .ok_or(Error::Overflow("N^d (d + 2)"))?;
    Ok((units, full))
}

/// Forward and backward FLOP of an SGNN on `m` samples.
///
/// Forward: `6mN` for the first layer, `m(2N² + 6N)` for each of the other
/// `d - 1` layers and `mN` for the output sum. Backward: `m(3N² + 2N)` per
/// layer plus `mN` for the output layer.
pub fn sgnn_flops(d: u64, n: u64, m: u64) -> Result<(u128, u128)> {
    if d < 2 {
        return Err(Error::invalid(format!(
            "FLOP formulas need d >= 2, got {d}"
        )));
    }
    let (d, n, m) = (d as u128, n as u128, m as u128);
    let forward = m * (6 * n + (d - 1) * (2 * n * n + 6 * n) + n);
    let backward = m * d * (3 * n * n + 2 * n) + m * n;
    Ok((forward, backward))
}

/// Leading-order FLOP estimate for an isotropic GRBFNN with `N^d` units on
/// `m` samples: `3d` for the squared distance, 6 for the Gaussian and 2 for
/// the weighted sum per unit forward; the backward pass touches the same
/// terms once more per trainable (`d + 2` per unit).
pub fn grbfnn_flops(d: u32, n: u64, m: u64) -> Result<(u128, u128)> {
    let (units, _) = grbfnn_counts(d, n)?;
    let per_unit_fwd = 3 * d as u128 + 8;
    let per_unit_bwd = 3 * (d as u128 + 2);
    Ok((
        m as u128 * units as u128 * per_unit_fwd,
        m as u128 * units as u128 * per_unit_bwd,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sgnn,
    Grbfnn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexityReport {
    pub kind: ModelKind,
    pub neurons: u64,
    pub trainable_weights: u64,
    pub trainable_with_gaussians: u64,
    pub forward_flops: u128,
    pub backward_flops: u128,
    pub samples: u64,
}

pub fn complexity_report(kind: ModelKind, d: u32, n: u64, m: u64) -> Result<ComplexityReport> {
    if d < 2 || n == 0 {
        return Err(Error::invalid("complexity report needs d >= 2 and N >= 1"));
    }
    Ok(match kind {
        ModelKind::Sgnn => {
            let (fwd, bwd) = sgnn_flops(d as u64, n, m)?;
            let with = sgnn_trainable_count(d as u64, n);
            ComplexityReport {
                kind,
                neurons: d as u64 * n,
                trainable_weights: with - 2 * d as u64 * n,
                trainable_with_gaussians: with,
                forward_flops: fwd,
                backward_flops: bwd,
                samples: m,
            }
        }
        ModelKind::Grbfnn => {
            let (units, full) = grbfnn_counts(d, n)?;
            let (fwd, bwd) = grbfnn_flops(d, n, m)?;
            ComplexityReport {
                kind,
                neurons: units,
                trainable_weights: units,
                trainable_with_gaussians: full,
                forward_flops: fwd,
                backward_flops: bwd,
                samples: m,
            }
        }
    })
}

/// `H̃ = 2 DᵀD`, the Hessian of `Σ_i (y_i - Σ_k w̃_k G_k(x_i))²` in the output
/// weights. Targets drop out because the loss is quadratic in `w̃`.
pub fn grbfnn_weight_hessian<G: GaussianUnits>(model: &G, inputs: &Matrix) -> Result<Matrix> {
    let k = model.unit_count();
    if k > HESSIAN_UNIT_CAP {
        return Err(Error::CapExceeded {
            what: "Hessian units",
            requested: k as u128,
            cap: HESSIAN_UNIT_CAP as u128,
        });
    }
    let design = model.design_matrix(inputs)?;
    let mut h = Matrix::zeros(k, k);
    for r in 0..design.rows() {
        let row = design.row(r);
        for a in 0..k {
            let ra = 2.0 * row[a];
            if ra == 0.0 {
                continue;
            }
            let h_row = h.row_mut(a);
            for b in a..k {
                h_row[b] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    Ok(h)
}

/// Coordinate-format sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)`, unique positions.
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn row_nnz(&self, row: usize) -> usize {
        self.entries.iter().filter(|e| e.0 == row).count()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest squared singular value, `λ_max(JᵀJ)`.
    pub fn max_singular_value_sq(&self) -> Result<f64> {
        let jtj = self.gram();
        Ok(sym_eigen(&jtj)?.values.first().copied().unwrap_or(0.0))
    }

    fn gram(&self) -> Matrix {
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            by_row[r].push((c, v));
        }
        let mut g = Matrix::zeros(self.cols, self.cols);
        for row in &by_row {
            for &(a, va) in row {
                for &(b, vb) in row {
                    g[(a, b)] += va * vb;
                }
            }
        }
        g
    }
}

/// Jacobian of the SGNN → GRBFNN weight map with respect to the SGNN weight
/// matrices (flattened in `param_vector` order).
///
/// Row `j` belongs to unit `(i_0, …, i_{d-1})`; its only nonzeros sit at the
/// `d - 1` weights `Wˡ[i_ℓ, i_{ℓ-1}]` on that unit's path, each holding the
/// product of the other `d - 2` path weights.
pub fn mapping_jacobian(model: &SgnnModel, unit_cap: usize) -> Result<SparseMatrix> {
    let d = model.dim();
    if d < 2 {
        return Err(Error::invalid("mapping Jacobian needs d >= 2"));
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
    let offsets: Vec<usize> = model
        .weights()
        .iter()
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w.rows() * w.cols();
            Some(o)
        })
        .collect();
    let cols = model.weight_count();
    let mut entries = Vec::with_capacity(k * (d - 1));
    let mut factors = vec![0.0; d - 1];
    for j in 0..k {
        let t = unit_tuple(j, widths);
        for l in 1..d {
            factors[l - 1] = model.weights()[l - 1][(t[l], t[l - 1])];
        }
        for l in 1..d {
            let w = &model.weights()[l - 1];
            let col = offsets[l - 1] + t[l] * w.cols() + t[l - 1];
            let others: f64 = factors
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != l - 1)
                .map(|(_, f)| f)
                .product();
            entries.push((j, col, others));
        }
    }
    Ok(SparseMatrix {
        rows: k,
        cols,
        entries,
    })
}

/// The weight map `g(θ)` itself: the converted GRBFNN output weights.
pub fn mapped_weights(model: &SgnnModel, unit_cap: usize) -> Result<Vec<f64>> {
    Ok(sgnn_to_grbfnn(model, unit_cap)?.out_weights().to_vec())
}

#[derive(Debug, Clone)]
pub struct HessianBundle {
    /// `H̃`, `K × K`.
    pub source: Matrix,
    pub jacobian: SparseMatrix,
    /// `H = Jᵀ H̃ J`, `P × P`.
    pub projected: Matrix,
    /// Eigenpairs of `H̃`, descending; `P` in the text is `vectorsᵀ`.
    pub source_eigen: SymEigen,
    /// Eigenvalues of `H`, descending.
    pub projected_eigenvalues: Vec<f64>,
    /// `Q = P J`, `K × P`; row `k` pairs with `source_eigen.values[k]`.
    pub q: Matrix,
    /// Rows of `Q` in the dominant block `Q_d`.
    pub dominant_rows: usize,
}

/// Builds `H = Jᵀ H̃ J` from the sparse Jacobian, eigen-decomposes both
/// Hessians and forms `Q = P J`. The first `dominant_rows` rows of `Q`
/// make up `Q_d`; `None` uses the number of SGNN weights (capped at `K`).
pub fn projected_hessian(
    source: &Matrix,
    jacobian: &SparseMatrix,
    dominant_rows: Option<usize>,
) -> Result<HessianBundle> {
    let k = source.rows();
    if source.cols() != k || jacobian.rows != k {
        return Err(Error::dims(format!(
            "H̃ is {:?} but J has {} rows",
            source.shape(),
            jacobian.rows
        )));
    }
    let p = jacobian.cols;
    let dominant = dominant_rows.unwrap_or(p).min(k);

    // H̃ J, column by column from the sparse entries
    let mut hj = Matrix::zeros(k, p);
    for &(r, c, v) in &jacobian.entries {
        for a in 0..k {
            hj[(a, c)] += source[(a, r)] * v;
        }
    }
    let mut projected = Matrix::zeros(p, p);
    for &(r, c, v) in &jacobian.entries {
        crate::linalg::axpy(v, hj.row(r), projected.row_mut(c));
    }
    for a in 0..p {
        for b in 0..a {
            let avg = 0.5 * (projected[(a, b)] + projected[(b, a)]);
            projected[(a, b)] = avg;
            projected[(b, a)] = avg;
        }
    }

    let source_eigen = sym_eigen(source)?;
    let projected_eigenvalues = sym_eigen(&projected)?.values;

    let mut q = Matrix::zeros(k, p);
    for &(r, c, v) in &jacobian.entries {
        for e in 0..k {
            q[(e, c)] += source_eigen.vectors[(r, e)] * v;
        }
    }
    Ok(HessianBundle {
        source: source.clone(),
        jacobian: jacobian.clone(),
        projected,
        source_eigen,
        projected_eigenvalues,
        q,
        dominant_rows: dominant,
    })
}

impl HessianBundle {
    /// `Σ_{e ∈ rows} λ_e q_eᵀ q_e`
    fn partial_sum(&self, rows: std::ops::Range<usize>) -> Matrix {
        let p = self.q.cols();
        let mut out = Matrix::zeros(p, p);
        for e in rows {
            let lambda = self.source_eigen.values[e];
            let qe = self.q.row(e);
            for a in 0..p {
                let s = lambda * qe[a];
                if s != 0.0 {
                    crate::linalg::axpy(s, qe, out.row_mut(a));
                }
            }
        }
        out
    }

    /// `(Q_dᵀ Λ_d Q_d, Q_sᵀ Λ_s Q_s)`
    pub fn split(&self) -> (Matrix, Matrix) {
        let k = self.q.rows();
        (
            self.partial_sum(0..self.dominant_rows),
            self.partial_sum(self.dominant_rows..k),
        )
    }

    /// `‖H - (H_d + H_s)‖_F / ‖H‖_F`
    pub fn split_residual(&self) -> f64 {
        let (hd, hs) = self.split();
        let recon = hd.add(&hs).expect("split blocks share a shape");
        let norm = self.projected.frobenius_norm();
        let err = recon
            .sub(&self.projected)
            .expect("same shape")
            .frobenius_norm();
        if norm == 0.0 {
            err
        } else {
            err / norm
        }
    }

    /// `source,projected` eigenvalues side by side; the shorter list is
    /// padded with empty cells. Header `rank,eigenvalue_source,eigenvalue_projected`.
    pub fn spectrum_csv(&self) -> String {
        let a = &self.source_eigen.values;
        let b = &self.projected_eigenvalues;
        let mut s = String::from("rank,eigenvalue_source,eigenvalue_projected\n");
        for r in 0..a.len().max(b.len()) {
            let cell = |v: Option<&f64>| v.map(|x| fmt_f64(*x)).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{}\n",
                r + 1,
                cell(a.get(r)),
                cell(b.get(r))
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub k: usize,
    /// `‖Q_dᵀ Λ_d Q_d‖_F / ‖H‖_F` with `Q_d` the top-`k` rows.
    pub fraction: f64,
    pub source_histogram: Vec<HistogramBin>,
    pub projected_histogram: Vec<HistogramBin>,
}

/// Share of the projected Hessian carried by the top-`k` eigenpairs of `H̃`.
pub fn dominance_report(bundle: &HessianBundle, k: usize) -> Result<DominanceReport> {
    let units = bundle.q.rows();
    if k > units {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {units} eigenpairs of H̃"
        )));
    }
    let top = bundle.partial_sum(0..k);
    let norm = bundle.projected.frobenius_norm();
    let fraction = if norm == 0.0 {
        1.0
    } else {
        top.frobenius_norm() / norm
    };
    Ok(DominanceReport {
        k,
        fraction,
        source_histogram: log_histogram(&bundle.source_eigen.values, 12),
        projected_histogram: log_histogram(&bundle.projected_eigenvalues, 12),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    /// Bin edges in `log10 |λ|`.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Histogram of `log10 |λ|` over `bins` equal-width bins; eigenvalues below
/// `1e-12 · max|λ|` are collected in a leading bin with `lo = -∞`.
pub fn log_histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || bins == 0 {
        return vec![HistogramBin {
            lo: f64::NEG_INFINITY,
            hi: f64::NEG_INFINITY,
            count: values.len(),
        }];
    }
    let top = max.log10();
    let floor = top - 12.0;
    let width = (top - floor) / bins as f64;
    let mut out = vec![HistogramBin {
        lo: f64::NEG_INFINITY,
        hi: floor,
        count: 0,
    }];
    out.extend((0..bins).map(|b| HistogramBin {
        lo: floor + b as f64 * width,
        hi: floor + (b + 1) as f64 * width,
        count: 0,
    }));
    for v in values {
        let a = v.abs();
        if a == 0.0 || a.log10() < floor {
            out[0].count += 1;
        } else {
            let b = (((a.log10() - floor) / width) as usize).min(bins - 1);
            out[b + 1].count += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grbfnn::{GrbfnnModel, DEFAULT_UNIT_CAP};
    use crate::rng::Rng;

    #[test]
    fn sgnn_counts() {
        assert_eq!(sgnn_trainable_count(1, 7), 21);
        assert_eq!(sgnn_trainable_count(5, 20), 1800);
        assert_eq!(sgnn_trainable_count(2, 10), 140);
        assert_eq!(sgnn_trainable_count(4, 20), 1360);
        assert_eq!(sgnn_trainable_count(4, 40), 5120);
    }

    #[test]
    fn grbfnn_count_conventions() {
        assert_eq!(grbfnn_counts(3, 10).unwrap(), (1000, 5000));
        assert_eq!(grbfnn_counts(2, 2).unwrap(), (4, 16));
        assert_eq!(grbfnn_counts(1, 5).unwrap(), (5, 15));
        assert!(matches!(grbfnn_counts(64, 10), Err(Error::Overflow(_))));
    }

    #[test]
    fn flop_spot_values() {
        assert_eq!(sgnn_flops(3, 10, 1).unwrap().0, 590);
        let (f1, b1) = sgnn_flops(4, 7, 3).unwrap();
        let (f10, b10) = sgnn_flops(4, 7, 30).unwrap();
        assert_eq!((f10, b10), (10 * f1, 10 * b1));
        let (f5, _) = sgnn_flops(5, 7, 3).unwrap();
        assert_eq!(f5 - f1, 3 * (2 * 49 + 6 * 7));
        assert!(sgnn_flops(1, 10, 1).is_err());
    }

    #[test]
    fn scalar_hessian() {
        let m = GrbfnnModel::from_parts(
            Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap(),
            vec![1.0],
            vec![0.4],
        )
        .unwrap();
        let x = Matrix::from_vec(1, 2, vec![0.5, -0.5]).unwrap();
        let g = (-0.25f64).exp();
        let h = grbfnn_weight_hessian(&m, &x).unwrap();
        assert!((h[(0, 0)] - 2.0 * g * g).abs() < 1e-15);
    }

    #[test]
    fn hessian_cap() {
        let m = GrbfnnModel::init(2, 2001, -8.0, 8.0, &mut Rng::new(1)).unwrap();
        assert!(matches!(
            grbfnn_weight_hessian(&m, &Matrix::zeros(1, 2)),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn two_layer_jacobian_is_identity() {
        let m = SgnnModel::init(2, 3, -8.0, 8.0, &mut Rng::new(3)).unwrap();
        let j = mapping_jacobian(&m, DEFAULT_UNIT_CAP).unwrap();
        assert_eq!(j.to_dense(), Matrix::identity(9));
    }

    #[test]
    fn three_layer_rows_have_two_entries() {
        let m = SgnnModel::init(3, 2, -8.0, 8.0, &mut Rng::new(3)).unwrap();
        let j = mapping_jacobian(&m, DEFAULT_UNIT_CAP).unwrap();
        assert_eq!((j.rows, j.cols), (8, 8));
        for r in 0..8 {
            assert_eq!(j.row_nnz(r), 2);
        }
    }

    #[test]
    fn identity_jacobian_keeps_hessian() {
        let mut rng = Rng::new(2);
        let a = Matrix::from_fn(4, 4, |_, _| rng.uniform(-1.0, 1.0).unwrap());
        let h = crate::linalg::matmul(&a.transpose(), &a).unwrap();
        let j = SparseMatrix {
            rows: 4,
            cols: 4,
            entries: (0..4).map(|i| (i, i, 1.0)).collect(),
        };
        let b = projected_hessian(&h, &j, None).unwrap();
        assert!(b.projected.sub(&h).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn dominance_edge_cases() {
        let h = Matrix::diag(&[3.0, 1.0, 0.0]);
        let j = SparseMatrix {
            rows: 3,
            cols: 2,
            entries: vec![(0, 0, 1.0), (1, 1, 2.0), (2, 1, 1.0)],
        };
        let b = projected_hessian(&h, &j, Some(2)).unwrap();
        // λ_s = 0, so the top-2 block carries everything
        assert!((dominance_report(&b, 2).unwrap().fraction - 1.0).abs() < 1e-14);
        assert!((dominance_report(&b, 3).unwrap().fraction - 1.0).abs() < 1e-14);
        assert!(dominance_report(&b, 4).is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let vals = [10.0, 1.0, 1e-3, 1e-20, 0.0, -2.0];
        let h = log_histogram(&vals, 6);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), vals.len());
        assert_eq!(h[0].count, 2);
    }
}
