use sgnn_core::analysis::{
    dominance_report, grbfnn_weight_hessian, mapped_weights, mapping_jacobian, projected_hessian,
    HESSIAN_UNIT_CAP,
};
use sgnn_core::candidates::uniform_points;
use sgnn_core::grbfnn::{sgnn_to_grbfnn, AnisotropicGrbfnn, GaussianUnits};
use sgnn_core::linalg::{matmul, sym_eigen};
use sgnn_core::rng::Rng;
use sgnn_core::sgnn::SgnnModel;
use sgnn_core::Matrix;

/// d = 3, N = 3 with fixed centers and widths and seeded weights.
fn toy(seed: u64) -> SgnnModel {
    let centers = vec![
        vec![-1.0, 0.0, 1.0],
        vec![-0.5, 0.25, 1.5],
        vec![-1.5, 0.0, 0.75],
    ];
    let sigmas = vec![
        vec![0.8, 1.0, 0.9],
        vec![1.1, 0.7, 1.0],
        vec![0.6, 0.9, 1.2],
    ];
    let mut rng = Rng::new(seed);
    let weights = (0..2)
        .map(|_| Matrix::from_fn(3, 3, |_, _| rng.uniform(-1.0, 1.0).unwrap()))
        .collect();
    SgnnModel::from_parts(centers, sigmas, weights, None).unwrap()
}

fn sum_sq(model: &SgnnModel, x: &Matrix, y: &[f64]) -> f64 {
    model
        .predict(x)
        .unwrap()
        .iter()
        .zip(y)
        .map(|(p, t)| (t - p) * (t - p))
        .sum()
}

#[test]
fn source_hessian_matches_second_differences() {
    // three isotropic units in 2-D; the loss is quadratic so the central
    // second difference is exact up to rounding
    let centers = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, -0.5], vec![-0.7, 0.9]]).unwrap();
    let widths = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.8, 0.8], vec![1.3, 1.3]]).unwrap();
    let mut rng = Rng::new(3);
    let x = uniform_points(15, 2, -2.0, 2.0, &mut rng).unwrap();
    let y: Vec<f64> = (0..15).map(|_| rng.normal()).collect();
    let loss = |w: &[f64]| {
        let g = AnisotropicGrbfnn::from_parts(centers.clone(), widths.clone(), w.to_vec()).unwrap();
        g.predict(&x)
            .unwrap()
            .iter()
            .zip(&y)
            .map(|(p, t)| (t - p) * (t - p))
            .sum::<f64>()
    };
    let w0 = vec![0.3, -0.2, 0.5];
    let g = AnisotropicGrbfnn::from_parts(centers.clone(), widths.clone(), w0.clone()).unwrap();
    let h = grbfnn_weight_hessian(&g, &x).unwrap();
    let step = 1e-3;
    for a in 0..3 {
        for b in 0..3 {
            let at = |da: f64, db: f64| {
                let mut w = w0.clone();
                w[a] += da;
                w[b] += db;
                loss(&w)
            };
            let fd = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step))
                / (4.0 * step * step);
            assert!(
                (fd - h[(a, b)]).abs() <= 1e-6 * h[(a, b)].abs().max(1.0),
                "({a},{b}) {fd} vs {}",
                h[(a, b)]
            );
        }
    }
}

#[test]
fn jacobian_matches_differences_of_the_weight_map() {
    for (seed, widths) in [
        (1u64, vec![3usize, 3, 3]),
        (2, vec![2, 3, 2, 2]),
        (3, vec![4, 2]),
    ] {
        let mut rng = Rng::new(seed);
        let model = SgnnModel::init_layers(&widths, -2.0, 2.0, &mut rng).unwrap();
        let j = mapping_jacobian(&model, HESSIAN_UNIT_CAP)
            .unwrap()
            .to_dense();
        let p0 = model.param_vector();
        let h = 1e-6;
        for c in 0..model.weight_count() {
            let shifted = |dv: f64| {
                let mut m = model.clone();
                let mut p = p0.clone();
                p[c] += dv;
                m.load_params(&p).unwrap();
                mapped_weights(&m, HESSIAN_UNIT_CAP).unwrap()
            };
            let (up, down) = (shifted(h), shifted(-h));
            for r in 0..j.rows() {
                let fd = (up[r] - down[r]) / (2.0 * h);
                assert!(
                    (fd - j[(r, c)]).abs() <= 1e-7,
                    "{widths:?} ({r},{c}) {fd} vs {}",
                    j[(r, c)]
                );
            }
        }
    }
}

#[test]
fn projected_hessian_matches_dense_triple_product() {
    let model = toy(21);
    let mut rng = Rng::new(22);
    let x = uniform_points(200, 3, -2.0, 2.0, &mut rng).unwrap();
    let g = sgnn_to_grbfnn(&model, HESSIAN_UNIT_CAP).unwrap();
    let source = grbfnn_weight_hessian(&g, &x).unwrap();
    let jac = mapping_jacobian(&model, HESSIAN_UNIT_CAP).unwrap();
    let bundle = projected_hessian(&source, &jac, None).unwrap();

    let jd = jac.to_dense();
    let dense = matmul(&matmul(&jd.transpose(), &source).unwrap(), &jd).unwrap();
    let err = dense.sub(&bundle.projected).unwrap().frobenius_norm();
    assert!(err <= 1e-10 * dense.frobenius_norm(), "{err}");

    assert!(bundle.split_residual() <= 1e-8);
    assert_eq!(bundle.dominant_rows, 18);

    let hmax = bundle.projected_eigenvalues[0];
    for &l in &bundle.projected_eigenvalues {
        assert!(l >= -1e-10 * hmax, "negative eigenvalue {l}");
    }
    // λ_max(H) ≤ λ_max(H̃) · σ_max(J)²
    let bound = bundle.source_eigen.values[0] * jac.max_singular_value_sq().unwrap();
    assert!(hmax <= bound * (1.0 + 1e-10));

    let full = dominance_report(&bundle, 27).unwrap();
    assert!((full.fraction - 1.0).abs() <= 1e-8);
    let total: usize = full.source_histogram.iter().map(|b| b.count).sum();
    assert_eq!(total, 27);
}

#[test]
fn projected_hessian_is_the_loss_hessian_at_zero_residual() {
    // with targets equal to the current predictions the second-order term
    // of the weight map drops out, so JᵀH̃J is the exact Hessian
    let model = toy(31);
    let mut rng = Rng::new(32);
    let x = uniform_points(60, 3, -2.0, 2.0, &mut rng).unwrap();
    let y = model.predict(&x).unwrap();
    let g = sgnn_to_grbfnn(&model, HESSIAN_UNIT_CAP).unwrap();
    let source = grbfnn_weight_hessian(&g, &x).unwrap();
    let jac = mapping_jacobian(&model, HESSIAN_UNIT_CAP).unwrap();
    let h = projected_hessian(&source, &jac, None).unwrap().projected;

    let p0 = model.param_vector();
    let step = 1e-4;
    let scale = h.max_abs();
    for a in (0..18).step_by(5) {
        for b in (0..18).step_by(4) {
            let at = |da: f64, db: f64| {
                let mut m = model.clone();
                let mut p = p0.clone();
                p[a] += da;
                p[b] += db;
                m.load_params(&p).unwrap();
                sum_sq(&m, &x, &y)
            };
            let fd = (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step))
                / (4.0 * step * step);
            assert!(
                (fd - h[(a, b)]).abs() <= 1e-5 * scale,
                "({a},{b}) {fd} vs {}",
                h[(a, b)]
            );
        }
    }
}

#[test]
fn eigenvalues_of_the_source_hessian_are_nonnegative() {
    let model = toy(41);
    let mut rng = Rng::new(42);
    let x = uniform_points(10, 3, -2.0, 2.0, &mut rng).unwrap();
    let g = sgnn_to_grbfnn(&model, HESSIAN_UNIT_CAP).unwrap();
    let source = grbfnn_weight_hessian(&g, &x).unwrap();
    let eig = sym_eigen(&source).unwrap();
    // rank ≤ 10 < 27 units
    assert!(eig.values[0] > 0.0);
    for &l in &eig.values {
        assert!(l >= -1e-12 * eig.values[0]);
    }
    assert!(eig.values[10..]
        .iter()
        .all(|l| l.abs() <= 1e-10 * eig.values[0]));
}
