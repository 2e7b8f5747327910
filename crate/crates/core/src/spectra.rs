//! Covariance structure of GAF values at the scaled roots of unity `r ωʲ`,
//! `ω = e(1/N)`, and the splitting `G = G_1 + G_2` that makes those values
//! independent for `G_1`.

use crate::coeffs::{CoefficientModel, DEFAULT_TERM_CAP, SERIES_REL_TOL};
use crate::error::{Error, Result};
use crate::gaf::{standard_gaussians, GafSample, GaussianSource};
use crate::numeric::NeumaierSum;
use crate::rng::{LANE_SPLIT_G1, LANE_SPLIT_G2};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Write as _;

/// Largest `N` for which a dense covariance matrix is built.
pub const DENSE_SIZE_CAP: usize = 1024;

fn check_r(r: f64) -> Result<f64> {
    if r.is_finite() && r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(Error::InvalidRadius(r))
    }
}

fn check_n(n: usize) -> Result<usize> {
    if n == 0 {
        Err(Error::Domain("N must be at least 1".into()))
    } else {
        Ok(n)
    }
}

/// Terms `a_n² x^n` up to the first index where `stop(n, majorant of the
/// remaining tail)` holds. Explicit sequences are returned in full.
fn sq_terms(model: &CoefficientModel, x: f64, mut stop: impl FnMut(usize, f64, &[f64]) -> bool) -> Result<Vec<f64>> {
    let log_x = x.ln();
    let mut terms = Vec::new();
    for (n, log_sq) in model.log_sq_iter().enumerate() {
        let term = (log_sq + n as f64 * log_x).exp();
        if n > 0 {
            if let Some(m) = model.sq_tail_majorant(n, term, x) {
                if stop(n, m, &terms) {
                    break;
                }
            }
        }
        terms.push(term);
        if n > 4 * DEFAULT_TERM_CAP {
            return Err(Error::NoConvergence { cap: 4 * DEFAULT_TERM_CAP });
        }
    }
    Ok(terms)
}

/// Residue sums `B_m = Σ_{n≡m (N)} a_n² r^{2n}`, each to relative tail `1e-14`.
fn residue_sums(model: &CoefficientModel, r: f64, n_pts: usize) -> Result<Vec<f64>> {
    // Bucket m holds at least t_m, so min_{m<N} t_m bounds every bucket from below.
    let mut floor = f64::INFINITY;
    let terms = sq_terms(model, r * r, |n, majorant, terms| {
        if n < n_pts {
            return false;
        }
        if n == n_pts || floor.is_infinite() {
            floor = terms[..n_pts].iter().copied().fold(f64::INFINITY, f64::min);
        }
        majorant <= SERIES_REL_TOL * floor || majorant < f64::MIN_POSITIVE
    })?;
    let mut buckets = vec![NeumaierSum::default(); n_pts];
    for (i, t) in terms.iter().enumerate() {
        buckets[i % n_pts].add(*t);
    }
    Ok(buckets.into_iter().map(|b| b.value()).collect())
}

/// Eigenvalues of the covariance matrix of `(F(r ωʲ))_{0≤j<N}`.
///
/// The canonical normalization is `λ_m = N·Σ_{n≡m (N)} a_n² r^{2n}`; `per_point`
/// marks the `Γ = Σ/N` view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpectrum {
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub log_det: f64,
    #[serde(rename = "Lambda_max")]
    pub lambda_max: f64,
    pub per_point: bool,
}

impl CirculantSpectrum {
    fn from_lambdas(r: f64, n: usize, lambdas: Vec<f64>, per_point: bool) -> Self {
        let log_det = lambdas.iter().map(|l| l.ln()).collect::<NeumaierSum>().value();
        let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        CirculantSpectrum { r, n, lambdas, log_det, lambda_max, per_point }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The same spectrum divided by `N`.
    pub fn per_point_view(&self) -> CirculantSpectrum {
        if self.per_point {
            return self.clone();
        }
        let n = self.n as f64;
        Self::from_lambdas(self.r, self.n, self.lambdas.iter().map(|l| l / n).collect(), true)
    }

    /// CSV with columns `m,lambda_m,cumulative_log_det`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,lambda_m,cumulative_log_det\n");
        let mut acc = NeumaierSum::default();
        for (m, l) in self.lambdas.iter().enumerate() {
            acc.add(l.ln());
            writeln!(out, "{m},{l:e},{:e}", acc.value()).unwrap();
        }
        out
    }
}

pub fn circulant_eigenvalues(model: &CoefficientModel, r: f64, n: usize) -> Result<CirculantSpectrum> {
    check_r(r)?;
    check_n(n)?;
    let scale = n as f64;
    let lambdas = residue_sums(model, r, n)?.into_iter().map(|b| scale * b).collect();
    Ok(CirculantSpectrum::from_lambdas(r, n, lambdas, false))
}

/// `Σ_{jk} = Σ_n a_n² r^{2n} e((j-k)n/N)`, built from the residue sums.
pub fn covariance_matrix(model: &CoefficientModel, r: f64, n: usize) -> Result<DMatrix<Complex64>> {
    check_r(r)?;
    check_n(n)?;
    if n > DENSE_SIZE_CAP {
        return Err(Error::SizeCap { size: n, cap: DENSE_SIZE_CAP });
    }
    let sums = residue_sums(model, r, n)?;
    // Entry depends on d = (j - k) mod N only.
    let by_offset: Vec<Complex64> = (0..n)
        .map(|d| {
            let (mut re, mut im) = (NeumaierSum::default(), NeumaierSum::default());
            for (m, s) in sums.iter().enumerate() {
                let phase = TAU * ((d * m) % n) as f64 / n as f64;
                re.add(s * phase.cos());
                im.add(s * phase.sin());
            }
            Complex64::new(re.value(), im.value())
        })
        .collect();
    let mut sigma = DMatrix::from_fn(n, n, |j, k| by_offset[(j + n - k) % n]);
    for j in 0..n {
        sigma[(j, j)].im = 0.0;
    }
    Ok(sigma)
}

/// Real eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Minimal eigenvalue of the principal submatrix indexed by `subset`.
pub fn principal_minor_min_eigen(sigma: &DMatrix<Complex64>, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let len = sigma.nrows();
    if let Some(&bad) = subset.iter().find(|&&i| i >= len) {
        return Err(Error::IndexOutOfRange { index: bad, len });
    }
    let minor = DMatrix::from_fn(subset.len(), subset.len(), |a, b| sigma[(subset[a], subset[b])]);
    Ok(hermitian_eigenvalues(&minor)[0])
}

/// Coefficients of the independent pair `G_1 = Σ_{n≥1} ζ'_n b_n zⁿ`,
/// `G_2 = Σ_{1≤n<N} ζ''_n d_n zⁿ` with `b_n² + d_n² = a_n²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitModel {
    pub model: CoefficientModel,
    pub r0: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// `a_n` for `0 ≤ n < N`.
    pub a: Vec<f64>,
    /// `b_n` for `0 ≤ n < N` (`b_0 = 0`); `b_n = a_n` for `n ≥ N`.
    pub b: Vec<f64>,
    /// `d_n` for `0 ≤ n < N` (`d_0 = 0`).
    pub d: Vec<f64>,
    pub sigma_g1_sq: f64,
    /// Indices where `a_n² - b_n²` was negative by more than `1e-12` relative.
    pub clamp_warnings: Vec<usize>,
}

/// Samples of `G_1`, `G_2` and `G = G_1 + G_2` from shared underlying Gaussians.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSample {
    pub g1: GafSample,
    pub g2: GafSample,
    pub g: GafSample,
}

pub fn split_coefficients(model: &CoefficientModel, r0: f64, n: usize) -> Result<SplitModel> {
    check_r(r0)?;
    check_n(n)?;
    if let Some(i) = model.first_increase() {
        return Err(Error::NotMonotone(i));
    }
    let x = r0 * r0;
    let terms = sq_terms(model, x, |k, majorant, terms| {
        k >= 2 * n && (majorant <= 1e-17 * terms[n] || majorant < f64::MIN_POSITIVE)
    })?;
    let t = |i: usize| terms.get(i).copied().unwrap_or(0.0);
    // b_n² r0^{2n} = Σ_{k≥1} (t_{kN} - t_{kN+n}), every bracket non-negative.
    let blocks = terms.len().div_ceil(n) + 1;
    let mut s0 = NeumaierSum::default();
    for k in 1..blocks {
        s0.add(t(k * n));
    }
    let a = model.coefficients_to(n - 1);
    let mut b = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut clamp_warnings = Vec::new();
    let log_x = x.ln();
    for i in 1..n {
        let mut acc = NeumaierSum::default();
        for k in 1..blocks {
            acc.add(t(k * n) - t(k * n + i));
        }
        let b_sq = acc.value() * (-(i as f64) * log_x).exp();
        let a_sq = a[i] * a[i];
        let excess = b_sq - a_sq;
        if excess > 1e-12 * a_sq {
            clamp_warnings.push(i);
        }
        let b_sq = b_sq.min(a_sq).max(0.0);
        b[i] = b_sq.sqrt();
        d[i] = (a_sq - b_sq).max(0.0).sqrt();
    }
    Ok(SplitModel {
        model: model.clone(),
        r0,
        n,
        a,
        b,
        d,
        sigma_g1_sq: n as f64 * s0.value(),
        clamp_warnings,
    })
}

impl SplitModel {
    /// `b_n` for any `n`.
    pub fn b_at(&self, i: usize) -> Result<f64> {
        if i < self.n {
            Ok(self.b[i])
        } else {
            self.model.coefficient(i)
        }
    }

    /// Coupled draw up to degree `n_t`: `ζ'` and `ζ''` come from two lanes of the
    /// `(seed, stream_id)` stream, and `ζ_n = (b_n ζ'_n + d_n ζ''_n)/a_n`.
    pub fn sample(&self, seed: u64, stream_id: u64, n_t: usize, source: GaussianSource) -> SplitSample {
        let zero = Complex64::new(0.0, 0.0);
        let z1 = standard_gaussians(seed, stream_id, LANE_SPLIT_G1, n_t + 1, source);
        let z2 = standard_gaussians(seed, stream_id, LANE_SPLIT_G2, n_t.min(self.n - 1) + 1, source);
        let tail = if n_t >= self.n { self.model.coefficients_to(n_t) } else { Vec::new() };
        let b_at = |i: usize| if i < self.n { self.b[i] } else { tail[i] };
        let mut c1 = vec![zero; n_t + 1];
        let mut c2 = vec![zero; n_t + 1];
        for i in 1..=n_t {
            c1[i] = z1[i] * b_at(i);
            if i < self.n {
                c2[i] = z2[i] * self.d[i];
            }
        }
        let c: Vec<Complex64> = c1.iter().zip(&c2).map(|(x, y)| x + y).collect();
        let b_seq: Vec<f64> = (0..=n_t).map(b_at).collect();
        let d_seq: Vec<f64> = (0..=n_t).map(|i| if i < self.n { self.d[i] } else { 0.0 }).collect();
        let g_seq: Vec<f64> = (0..=n_t).map(|i| if i == 0 { 0.0 } else if i < self.n { self.a[i] } else { tail[i] }).collect();
        let explicit = |s: Vec<f64>| CoefficientModel::explicit(s).expect("finite non-negative sequence");
        SplitSample {
            g1: GafSample::from_parts(explicit(b_seq), c1, seed, stream_id),
            g2: GafSample::from_parts(explicit(d_seq), c2, seed, stream_id),
            g: GafSample::from_parts(explicit(g_seq), c, seed, stream_id),
        }
    }
}

/// `σ_F(r0)² - σ_{G_1}(r0)²` together with the comparison sum `Σ_{n<N} a_n² r0^{2n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaGap {
    pub gap: f64,
    pub comparison: f64,
}

pub fn sigma_g1_gap(model: &CoefficientModel, r0: f64, n: usize) -> Result<SigmaGap> {
    let split = split_coefficients(model, r0, n)?;
    // gap = a_0² + Σ_{1≤n<N} d_n² r0^{2n}, a sum of non-negative terms.
    let x = r0 * r0;
    let mut gap = NeumaierSum::default();
    let mut comparison = NeumaierSum::default();
    let mut power = 1.0;
    for i in 0..n {
        let a_sq = split.a[i] * split.a[i];
        comparison.add(a_sq * power);
        gap.add(if i == 0 { a_sq } else { split.d[i] * split.d[i] * power });
        power *= x;
    }
    Ok(SigmaGap { gap: gap.value(), comparison: comparison.value() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_point_spectrum_is_variance() {
        let m = CoefficientModel::hyperbolic(1.7).unwrap();
        let s = circulant_eigenvalues(&m, 0.6, 1).unwrap();
        assert_relative_eq!(s.lambdas[0], m.sigma_sq(0.6).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn geometric_closed_form() {
        let (r, n) = (0.7f64, 9usize);
        for m in [CoefficientModel::ConstantUnit, CoefficientModel::hyperbolic(1.0).unwrap()] {
            let s = circulant_eigenvalues(&m, r, n).unwrap();
            for (k, l) in s.lambdas.iter().enumerate() {
                let closed = n as f64 * r.powi(2 * k as i32) / (1.0 - r.powi(2 * n as i32));
                assert_relative_eq!(*l, closed, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn per_point_view_divides_by_n() {
        let s = circulant_eigenvalues(&CoefficientModel::ConstantUnit, 0.5, 4).unwrap();
        let g = s.per_point_view();
        assert!(g.per_point);
        assert_relative_eq!(g.lambdas[2] * 4.0, s.lambdas[2], max_relative = 1e-15);
        assert_relative_eq!(g.log_det, s.log_det - 4.0 * 4f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = circulant_eigenvalues(&CoefficientModel::ConstantUnit, 0.5, 3).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "m,lambda_m,cumulative_log_det");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn size_cap_and_errors() {
        let m = CoefficientModel::ConstantUnit;
        assert!(matches!(covariance_matrix(&m, 0.5, 1025), Err(Error::SizeCap { .. })));
        assert!(matches!(circulant_eigenvalues(&m, 1.0, 4), Err(Error::InvalidRadius(_))));
        let h = CoefficientModel::hyperbolic(2.0).unwrap();
        assert!(matches!(split_coefficients(&h, 0.9, 8), Err(Error::NotMonotone(1))));
        let sigma = covariance_matrix(&m, 0.5, 4).unwrap();
        assert!(matches!(principal_minor_min_eigen(&sigma, &[]), Err(Error::EmptySubset)));
        assert!(matches!(principal_minor_min_eigen(&sigma, &[4]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_point_constant_unit_matrix() {
        let r = 0.6f64;
        let s = covariance_matrix(&CoefficientModel::ConstantUnit, r, 2).unwrap();
        assert_relative_eq!(s[(0, 1)].re, 1.0 / (1.0 + r * r), max_relative = 1e-13);
        assert!(s[(0, 1)].im.abs() < 1e-15);
        assert_relative_eq!(s[(0, 0)].re, 1.0 / (1.0 - r * r), max_relative = 1e-13);
    }

    #[test]
    fn split_constant_unit_closed_form() {
        let (r0, n) = (0.8f64, 6usize);
        let sm = split_coefficients(&CoefficientModel::ConstantUnit, r0, n).unwrap();
        for i in 1..n {
            let lhs = sm.b[i] * sm.b[i] * r0.powi(2 * i as i32);
            let rhs = (1.0 - r0.powi(2 * i as i32)) * r0.powi(2 * n as i32) / (1.0 - r0.powi(2 * n as i32));
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            assert_relative_eq!(sm.b[i].powi(2) + sm.d[i].powi(2), 1.0, max_relative = 1e-14);
        }
        let s0: f64 = (1..200).map(|k| r0.powi(2 * (k * n) as i32)).sum();
        assert_relative_eq!(sm.sigma_g1_sq, n as f64 * s0, max_relative = 1e-12);
        assert!(sm.clamp_warnings.is_empty());
    }

    #[test]
    fn split_sample_shares_randomness() {
        let sm = split_coefficients(&CoefficientModel::hyperbolic(0.5).unwrap(), 0.9, 8).unwrap();
        let s = sm.sample(3, 7, 20, GaussianSource::BoxMuller);
        for i in 0..=20 {
            assert!((s.g.coeffs()[i] - s.g1.coeffs()[i] - s.g2.coeffs()[i]).norm() < 1e-15);
        }
        assert_eq!(s.g.coeffs()[0], Complex64::new(0.0, 0.0));
        assert!(s.g2.coeffs()[8..].iter().all(|c| c.norm() == 0.0));
        assert_eq!(sm.sample(3, 7, 20, GaussianSource::BoxMuller), s);
    }
}
