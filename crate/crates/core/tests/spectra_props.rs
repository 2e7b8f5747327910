use gafhole::gaf::truncation_degree;
use gafhole::spectra::{
    circulant_eigenvalues, covariance_matrix, hermitian_eigenvalues, principal_minor_min_eigen, sigma_g1_gap,
    split_coefficients,
};
use gafhole::{CoefficientModel, GaussianSource};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Covariance of `(F(r ωʲ))_j` by direct summation of `a_n² r^{2n} ω^{n(j-k)}`.
fn direct_covariance(model: &CoefficientModel, r: f64, n: usize) -> DMatrix<Complex64> {
    let terms = 4000;
    let a = model.coefficients_to(terms);
    DMatrix::from_fn(n, n, |j, k| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, ai) in a.iter().enumerate() {
            let phase = 2.0 * PI * (i as f64) * (j as f64 - k as f64) / n as f64;
            acc += Complex64::from_polar(ai * ai * r.powi(2 * i as i32), phase);
        }
        acc
    })
}

fn fourier_vector(n: usize, m: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |j, _| Complex64::from_polar(1.0 / (n as f64).sqrt(), 2.0 * PI * (j * m) as f64 / n as f64))
}

#[test]
fn fourier_vectors_are_eigenvectors() {
    for &l in &[0.5, 1.0, 2.0] {
        for &n in &[1usize, 5, 16, 64] {
            let model = CoefficientModel::hyperbolic(l).unwrap();
            let r = 0.8;
            let spec = circulant_eigenvalues(&model, r, n).unwrap();
            let sigma = direct_covariance(&model, r, n);
            let top = spec.lambda_max;
            for m in 0..n {
                let u = fourier_vector(n, m);
                let resid = (&sigma * &u - &u * Complex64::new(spec.lambdas[m], 0.0)).norm();
                assert!(resid <= 1e-9 * top, "L={l} N={n} m={m}: {resid}");
            }
            let trace: f64 = (0..n).map(|j| sigma[(j, j)].re).sum();
            let sum: f64 = spec.lambdas.iter().sum();
            assert!((trace - sum).abs() <= 1e-10 * trace, "{trace} vs {sum}");
        }
    }
}

#[test]
fn unit_intensity_eigenvalues_are_explicit() {
    let model = CoefficientModel::hyperbolic(1.0).unwrap();
    let (r, n) = (0.9f64, 32usize);
    let spec = circulant_eigenvalues(&model, r, n).unwrap();
    for (m, lam) in spec.lambdas.iter().enumerate() {
        let want = n as f64 * r.powi(2 * m as i32) / (1.0 - r.powi(2 * n as i32));
        assert!((lam - want).abs() <= 1e-12 * want, "{m}: {lam} vs {want}");
    }
    assert!(spec.lambda_min() > 0.0);
}

#[test]
fn eigenvalues_cross_check_dense_solver() {
    for &n in &[2usize, 8, 33, 64] {
        let model = CoefficientModel::hyperbolic(2.5).unwrap();
        let spec = circulant_eigenvalues(&model, 0.7, n).unwrap();
        let mut dense = hermitian_eigenvalues(&covariance_matrix(&model, 0.7, n).unwrap());
        let mut circ = spec.lambdas.clone();
        dense.sort_by(f64::total_cmp);
        circ.sort_by(f64::total_cmp);
        for (a, b) in circ.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-9 * spec.lambda_max, "N={n}: {a} vs {b}");
        }
        let log_det: f64 = spec.lambdas.iter().map(|l| l.ln()).sum();
        assert!((log_det - spec.log_det).abs() < 1e-9 * log_det.abs().max(1.0));
    }
}

#[test]
fn split_of_increasing_model_is_refused() {
    let model = CoefficientModel::hyperbolic(2.0).unwrap();
    assert!(split_coefficients(&model, 0.9, 8).is_err());
}

#[test]
fn split_values_at_roots_are_uncorrelated() {
    let model = CoefficientModel::hyperbolic(0.5).unwrap();
    let (r0, n) = (0.9, 16usize);
    let split = split_coefficients(&model, r0, n).unwrap();
    let n_t = truncation_degree(&model, r0, 1e-12).unwrap();
    let samples = 6000u64;
    let mut cov = DMatrix::<Complex64>::zeros(n, n);
    for t in 0..samples {
        let s = split.sample(5, t, n_t, GaussianSource::BoxMuller);
        let v = s.g1.circle_values(r0, n);
        let col = DVector::from_vec(v);
        cov += &col * col.adjoint();
    }
    cov /= Complex64::new(samples as f64, 0.0);
    let tol_corr = 4.0 / (samples as f64).sqrt();
    for j in 0..n {
        let d = cov[(j, j)].re;
        assert!((d / split.sigma_g1_sq - 1.0).abs() < 0.08, "diag {j}: {d} vs {}", split.sigma_g1_sq);
        for k in 0..j {
            let corr = cov[(j, k)].norm() / (cov[(j, j)].re * cov[(k, k)].re).sqrt();
            assert!(corr <= tol_corr, "({j},{k}) corr {corr}");
        }
    }
}

#[test]
fn coupled_split_sums_to_full_function() {
    let model = CoefficientModel::hyperbolic(0.7).unwrap();
    let split = split_coefficients(&model, 0.8, 10).unwrap();
    let s = split.sample(1, 2, 50, GaussianSource::BoxMuller);
    for i in 0..=50 {
        let sum = s.g1.coeffs()[i] + s.g2.coeffs()[i];
        assert!((sum - s.g.coeffs()[i]).norm() < 1e-14);
    }
    assert_eq!(s.g.coeffs()[0], Complex64::new(0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn split_decomposes_coefficients(l in 0.05f64..1.0, r0 in 0.3f64..0.98, n in 2usize..40) {
        let model = CoefficientModel::hyperbolic(l).unwrap();
        let split = split_coefficients(&model, r0, n).unwrap();
        prop_assert!(split.clamp_warnings.is_empty());
        for i in 1..n {
            prop_assert!(split.b[i] <= split.a[i] * (1.0 + 1e-12));
            let resid = split.a[i].powi(2) - split.b[i].powi(2) - split.d[i].powi(2);
            prop_assert!(resid.abs() <= 1e-12 * split.a[i].powi(2));
        }
        // The values of G_1 at the roots have a flat spectrum N·S_0.
        let g1 = CoefficientModel::explicit((0..4000).map(|i| split.b_at(i).unwrap()).collect()).unwrap();
        let spec = circulant_eigenvalues(&g1, r0, n).unwrap();
        for lam in &spec.lambdas {
            prop_assert!((lam - split.sigma_g1_sq).abs() <= 1e-9 * split.sigma_g1_sq, "{lam} vs {}", split.sigma_g1_sq);
        }
    }

    #[test]
    fn sigma_gap_is_bounded_by_leading_block(l in 0.05f64..1.0, r0 in 0.3f64..0.98, n in 1usize..40) {
        let model = CoefficientModel::hyperbolic(l).unwrap();
        let gap = sigma_g1_gap(&model, r0, n).unwrap();
        prop_assert!(gap.gap >= 0.0);
        prop_assert!(gap.gap <= gap.comparison * (1.0 + 1e-12));
        let split = split_coefficients(&model, r0, n).unwrap();
        let total = model.sigma_sq(r0).unwrap();
        prop_assert!((total - split.sigma_g1_sq - gap.gap).abs() <= 1e-9 * total);
    }

    #[test]
    fn minors_interlace(l in 0.2f64..3.0, r in 0.2f64..0.9, n in 2usize..24, mask in any::<u32>()) {
        let model = CoefficientModel::hyperbolic(l).unwrap();
        let sigma = covariance_matrix(&model, r, n).unwrap();
        let subset: Vec<usize> = (0..n).filter(|i| mask >> (i % 32) & 1 == 1).collect();
        prop_assume!(!subset.is_empty());
        let minor = principal_minor_min_eigen(&sigma, &subset).unwrap();
        let lmin = circulant_eigenvalues(&model, r, n).unwrap().lambda_min();
        prop_assert!(minor >= lmin * (1.0 - 1e-8) - 1e-12 * sigma[(0, 0)].re);
    }

    #[test]
    fn eigenvalues_are_positive_and_sum_to_trace(l in 0.1f64..4.0, r in 0.1f64..0.95, n in 1usize..64) {
        let model = CoefficientModel::hyperbolic(l).unwrap();
        let spec = circulant_eigenvalues(&model, r, n).unwrap();
        prop_assert!(spec.lambdas.iter().all(|&x| x > 0.0));
        let sum: f64 = spec.lambdas.iter().sum();
        let trace = n as f64 * model.sigma_sq(r).unwrap();
        prop_assert!((sum - trace).abs() <= 1e-10 * trace);
    }
}
