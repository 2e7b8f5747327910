//! Closed forms and numerical verifiers for the moment lemmas and the Gaussian
//! coupling constructions.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::numeric::{par_mean_se, tanh_sinh};
use crate::rng::{Stream, LANE_COUPLING, LANE_SCALAR, LANE_VECTOR};
use crate::special::{bessel_i0_scaled, exp_integral_e1, gamma, ln_gamma};
use crate::spectra::circulant_eigenvalues;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const LEMMA17_C_SMALL: f64 = 0.4;
pub const LEMMA17_C_LARGE: f64 = 10.0;
pub const LEMMA15_C: f64 = 3.0;
pub const LEMMA6_C: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `measured ≤ bound`
    AtMost,
    /// `measured > bound`
    GreaterThan,
    /// Reported only.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaPoint {
    pub params: BTreeMap<String, f64>,
    pub measured: f64,
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub lemma_id: String,
    pub relation: Relation,
    pub constants: BTreeMap<String, f64>,
    pub points: Vec<LemmaPoint>,
    pub pass: bool,
}

impl LemmaCheckReport {
    fn new(lemma_id: &str, relation: Relation, constants: &[(&str, f64)]) -> Self {
        LemmaCheckReport {
            lemma_id: lemma_id.to_string(),
            relation,
            constants: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            points: Vec::new(),
            pass: true,
        }
    }

    fn push(&mut self, params: &[(&str, f64)], measured: f64, bound: Option<f64>) {
        let pass = match (self.relation, bound) {
            (Relation::AtMost, Some(b)) => measured <= b,
            (Relation::GreaterThan, Some(b)) => measured > b,
            _ => measured.is_finite(),
        };
        self.pass &= pass;
        self.points.push(LemmaPoint {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            measured,
            bound,
            pass,
        });
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && (0.0..2.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("theta must lie in [0, 2), got {theta}")))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("t must be positive, got {t}")))
    }
}

/// `E|ζ|^{-θ} = Γ(1 - θ/2)`.
pub fn neg_moment_exact(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(gamma(1.0 - theta / 2.0))
}

/// `E|w + ζ/t|^{-θ}`.
///
/// The angular integral is done exactly:
/// `E = 2t² ∫_0^∞ s^{1-θ} e^{-t²(s-|w|)²} Ĩ₀(2t² s|w|) ds` with `Ĩ₀(x) = e^{-x} I₀(x)`,
/// and the radial integral by tanh-sinh on `[0, |w|]` and `[|w|, |w| + 9/t]`.
pub fn neg_moment_quadrature(theta: f64, t: f64, w: Complex64) -> Result<f64> {
    check_theta(theta)?;
    check_t(t)?;
    if theta == 0.0 {
        return Ok(1.0);
    }
    let rho = w.norm();
    if !rho.is_finite() {
        return Err(Error::Domain(format!("w must be finite, got {w}")));
    }
    let t2 = t * t;
    let f = |s: f64| s.powf(1.0 - theta) * (-t2 * (s - rho) * (s - rho)).exp() * bessel_i0_scaled(2.0 * t2 * s * rho);
    let upper = rho + 9.0 / t;
    let mut total = tanh_sinh(f, rho, upper, 1e-13, 0.0);
    if rho > 0.0 {
        total += tanh_sinh(f, 0.0, rho, 1e-13, 0.0);
    }
    Ok(2.0 * t2 * total)
}

/// `E log|1 + ζ/t| = ½E₁(t²)`.
pub fn log_abs_moment_exact(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(0.5 * exp_integral_e1(t * t)?)
}

/// `m(t, θ) = E|1 + ζ/t|^{-θ} ≤ 1 - cθ e^{-t²}/(1+t²) + Cθ²` over a grid.
pub fn lemma17_margin(ts: &[f64], thetas: &[f64], c_small: f64, c_large: f64) -> Result<LemmaCheckReport> {
    let mut rep = LemmaCheckReport::new("lemma17", Relation::AtMost, &[("c", c_small), ("C", c_large)]);
    for &t in ts {
        for &theta in thetas {
            if !(0.0..=0.5).contains(&theta) {
                return Err(Error::Domain(format!("theta must lie in [0, 1/2], got {theta}")));
            }
            let m = neg_moment_quadrature(theta, t, Complex64::new(1.0, 0.0))?;
            let bound = 1.0 - c_small * theta * (-t * t).exp() / (1.0 + t * t) + c_large * theta * theta;
            rep.push(&[("t", t), ("theta", theta)], m, Some(bound));
        }
    }
    Ok(rep)
}

/// Monte Carlo check of `E Π_j |η_j|^{-θ} ≤ (1/det Σ)(Λ^{1-θ/2} Γ(1-θ/2))^N` for
/// `η_j = F(r ωʲ)`. The vector is drawn as `η = Σ_m √(λ_m/N) ξ_m e(jm/N)`.
pub fn lemma18_check(
    model: &CoefficientModel,
    r: f64,
    n: usize,
    theta: f64,
    trials: u64,
    seed: u64,
) -> Result<LemmaCheckReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("the Monte Carlo route needs theta in [0, 1], got {theta}")));
    }
    if !(1..=8).contains(&n) {
        return Err(Error::Domain(format!("N must lie in 1..=8, got {n}")));
    }
    if trials < 2 {
        return Err(Error::Domain("at least two trials are required".into()));
    }
    let spec = circulant_eigenvalues(model, r, n)?;
    let scales: Vec<f64> = spec.lambdas.iter().map(|l| (l / n as f64).sqrt()).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let (mean, se) = par_mean_se(trials, |t| {
        let mut s = Stream::new(seed, t, LANE_VECTOR);
        let mut v: Vec<Complex64> = scales.iter().map(|a| s.complex_gaussian() * a).collect();
        fft.process(&mut v);
        v.iter().map(|e| e.norm().powf(-theta)).product()
    });
    let log_bound = -spec.log_det + n as f64 * ((1.0 - theta / 2.0) * spec.lambda_max.ln() + ln_gamma(1.0 - theta / 2.0));
    let bound = log_bound.exp();
    let mut rep = LemmaCheckReport::new("lemma18", Relation::AtMost, &[("se_multiplier", 5.0)]);
    let rel_se = se / mean;
    rep.push(
        &[("r", r), ("N", n as f64), ("theta", theta), ("trials", trials as f64), ("rel_se", rel_se)],
        mean,
        Some(bound * (1.0 + 5.0 * rel_se)),
    );
    Ok(rep)
}

/// `D = log|S(0)| - max_τ (1/k) Σ_{j=1}^k log|S(τωʲ)|` over all `τ` with
/// `τ^{k² n} = 1`, `ω = e(1/k)`, `n = deg S`.
pub fn lemma6_defect(coeffs: &[Complex64], k: usize) -> Result<f64> {
    if k < 4 {
        return Err(Error::Domain(format!("k must be at least 4, got {k}")));
    }
    let deg = coeffs.iter().rposition(|c| c.norm() != 0.0).unwrap_or(0);
    if coeffs.is_empty() || coeffs[0].norm() == 0.0 {
        return Err(Error::ZeroConstantTerm);
    }
    if deg == 0 {
        return Err(Error::Domain("the polynomial must have degree at least 1".into()));
    }
    // All points τωʲ are k²n-th roots of unity: evaluate once on that grid.
    let size = k * k * deg;
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (i, c) in coeffs[..=deg].iter().enumerate() {
        buf[i % size] += c;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(size).process(&mut buf);
    let logs: Vec<f64> = buf.iter().map(|v| v.norm().ln()).collect();
    let step = k * deg;
    let best = (0..size)
        .map(|l| (1..=k).map(|j| logs[(l + j * step) % size]).sum::<f64>() / k as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(coeffs[0].norm().ln() - best)
}

/// `D ≤ C/k²` for each polynomial and each `k`.
pub fn lemma6_report(polys: &[Vec<Complex64>], ks: &[usize], c: f64) -> Result<LemmaCheckReport> {
    let mut rep = LemmaCheckReport::new("lemma6", Relation::AtMost, &[("C", c)]);
    for (i, p) in polys.iter().enumerate() {
        for &k in ks {
            let d = lemma6_defect(p, k)?;
            rep.push(&[("poly", i as f64), ("k", k as f64)], d, Some(c / (k * k) as f64));
        }
    }
    Ok(rep)
}

/// Random polynomials of degree `1..=max_degree` with standard complex Gaussian
/// coefficients (constant term non-zero), followed by the hard case `1 - z`.
pub fn lemma6_test_polys(count: usize, max_degree: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(count + 1);
    for i in 0..count as u64 {
        let mut s = Stream::new(seed, i, LANE_SCALAR);
        let deg = 1 + (s.next_u64() % max_degree.max(1) as u64) as usize;
        let mut p: Vec<Complex64> = (0..=deg).map(|_| s.complex_gaussian()).collect();
        if p[0].norm() == 0.0 {
            p[0] = Complex64::new(1.0, 0.0);
        }
        out.push(p);
    }
    out.push(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
    out
}

/// `sup_w E|w + ζ/t|^{-θ} ≤ t^θ(1 + Cθ)` over a grid of `(θ, t, w)`.
pub fn lemma15_report(thetas: &[f64], ts: &[f64], ws: &[Complex64], c: f64) -> Result<LemmaCheckReport> {
    let mut rep = LemmaCheckReport::new("lemma15", Relation::AtMost, &[("C", c)]);
    for &theta in thetas {
        for &t in ts {
            let mut sup = f64::NEG_INFINITY;
            for &w in ws {
                sup = sup.max(neg_moment_quadrature(theta, t, w)?);
            }
            rep.push(&[("theta", theta), ("t", t)], sup, Some(t.powf(theta) * (1.0 + c * theta)));
        }
    }
    Ok(rep)
}

/// `½E₁(t²) > e^{-t²}/(2(t²+1))` over a grid of `t`.
pub fn lemma16_5_report(ts: &[f64]) -> Result<LemmaCheckReport> {
    let mut rep = LemmaCheckReport::new("lemma16_5", Relation::GreaterThan, &[]);
    for &t in ts {
        let bound = (-t * t).exp() / (2.0 * (t * t + 1.0));
        rep.push(&[("t", t)], log_abs_moment_exact(t)?, Some(bound));
    }
    Ok(rep)
}

/// Monte Carlo estimates of `E|log|1+ζ/t||ⁿ / n!`, reported without a bound.
pub fn lemma16_moment_report(ts: &[f64], max_n: u32, trials: u64, seed: u64) -> Result<LemmaCheckReport> {
    let mut rep = LemmaCheckReport::new("lemma16_moments", Relation::Report, &[]);
    for (ti, &t) in ts.iter().enumerate() {
        check_t(t)?;
        for n in 1..=max_n {
            let fact = gamma(n as f64 + 1.0);
            let (mean, _) = par_mean_se(trials, |i| {
                let mut s = Stream::new(seed, i, LANE_SCALAR + ti as u64);
                let z = s.complex_gaussian();
                (Complex64::new(1.0, 0.0) + z / t).norm().ln().abs().powi(n as i32)
            });
            rep.push(&[("t", t), ("n", n as f64)], mean / fact, None);
        }
    }
    Ok(rep)
}

fn coupling_draw(s: &mut Stream, sigma: f64) -> (Complex64, bool) {
    let s2 = sigma * sigma;
    if s.uniform() < s2 {
        return (s.complex_gaussian() * sigma, true);
    }
    // Residual density ∝ e^{-|z|²} - e^{-|z|²/σ²}: propose a standard Gaussian and
    // accept with probability 1 - e^{-|z|²(1/σ² - 1)}.
    let k = 1.0 / s2 - 1.0;
    loop {
        let z = s.complex_gaussian();
        if s.uniform() < -(-z.norm_sqr() * k).exp_m1() {
            return (z, false);
        }
    }
}

/// A standard complex Gaussian `ζ` together with an event of probability `σ²`
/// on which `ζ` is distributed as `σ` times a standard complex Gaussian.
pub fn gaussian_coupling_sample(sigma: f64, seed: u64, stream: u64) -> Result<(Complex64, bool)> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Domain(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    Ok(coupling_draw(&mut Stream::new(seed, stream, LANE_COUPLING), sigma))
}

/// Coefficients with law `GAF(b_n)` and an event of probability `Π |c_n/b_n|²` on
/// which they have law `GAF(c_n)`.
pub fn gaf_coupling_sample(b: &[f64], c: &[f64], seed: u64, stream: u64) -> Result<(Vec<Complex64>, bool)> {
    if b.len() != c.len() {
        return Err(Error::Domain(format!("b and c lengths differ: {} vs {}", b.len(), c.len())));
    }
    let mut out = Vec::with_capacity(b.len());
    let mut all = true;
    for (i, (&bi, &ci)) in b.iter().zip(c).enumerate() {
        let (bi, ci) = (bi.abs(), ci.abs());
        let ratio = if bi == 0.0 && ci == 0.0 { 1.0 } else { ci / bi };
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::RatioOutOfRange { index: i, ratio });
        }
        let mut s = Stream::new(seed, stream, LANE_COUPLING + i as u64);
        let (z, inside) = coupling_draw(&mut s, ratio);
        out.push(z * bi);
        all &= inside;
    }
    Ok((out, all))
}
