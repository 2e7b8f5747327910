//! Reproducible sampling of truncated Gaussian Taylor series `F(z) = Σ ζ_n a_n zⁿ`,
//! pointwise and circle-grid evaluation, and certified tail bounds.

use crate::coeffs::{CoefficientModel, DEFAULT_TERM_CAP};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::rng::{Stream, LANE_COEFFS};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::sync::Arc;

/// Default per-trial certificate exponent: failure probability `≤ e^{-30}/(1-e^{-1})`.
pub const DEFAULT_FAIL_EXP: f64 = 30.0;
/// Default relative tail standard deviation used to pick the truncation degree.
pub const DEFAULT_TAU_REL: f64 = 1e-8;

/// Source of the standard complex Gaussians. `Zero` is a negative-control hook
/// that forces every `ζ_n` to 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GaussianSource {
    #[default]
    BoxMuller,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GafSample {
    model: CoefficientModel,
    coeffs: Vec<Complex64>,
    seed: u64,
    stream_id: u64,
}

/// Smallest `N` with `Σ_{n>N} a_n² ρ^{2n} ≤ τ² σ_F(ρ)²`.
pub fn truncation_degree(model: &CoefficientModel, rho: f64, tau_rel: f64) -> Result<usize> {
    truncation_degree_capped(model, rho, tau_rel, DEFAULT_TERM_CAP)
}

pub fn truncation_degree_capped(model: &CoefficientModel, rho: f64, tau_rel: f64, cap: usize) -> Result<usize> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidRadius(rho));
    }
    if !(tau_rel > 0.0 && tau_rel <= 1.0) {
        return Err(Error::Domain(format!("tau_rel must lie in (0, 1], got {tau_rel}")));
    }
    let x = rho * rho;
    let log_x = x.ln();
    let target = tau_rel * tau_rel * model.sigma_sq(rho)?;
    let mut terms = Vec::new();
    let mut remainder = 0.0;
    for (n, log_sq) in model.log_sq_iter().enumerate() {
        let term = (log_sq + n as f64 * log_x).exp();
        if n > 0 {
            if let Some(m) = model.sq_tail_majorant(n, term, x) {
                if m <= 1e-3 * target {
                    remainder = m;
                    break;
                }
            }
        }
        terms.push(term);
        if n > cap.saturating_add(1).saturating_mul(4) {
            return Err(Error::NoConvergence { cap });
        }
    }
    // tail(N) = Σ_{n>N} t_n + remainder, non-increasing in N.
    let mut tail = NeumaierSum::default();
    tail.add(remainder);
    let mut degree = terms.len().saturating_sub(1);
    while degree > 0 {
        let with_next = {
            let mut t = tail;
            t.add(terms[degree]);
            t
        };
        // tail(degree - 1) = tail(degree) + t_degree
        if with_next.value() <= target {
            tail = with_next;
            degree -= 1;
        } else {
            break;
        }
    }
    if degree > cap {
        return Err(Error::NoConvergence { cap });
    }
    Ok(degree)
}

/// Upper bound on `max_{|z|=ρ} |Σ_{n>N_t} ζ_n a_n zⁿ|` valid outside an event of
/// probability `exp(log_fail_prob)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub bound: f64,
    pub log_fail_prob: f64,
}

/// `Σ_{n>N_t} a_n ρⁿ √(n - N_t + fail_exp)`.
///
/// `P[|ζ_n| ≥ √(k + fail_exp)] = e^{-(k + fail_exp)}`, and the union over `k ≥ 1`
/// is at most `e^{-fail_exp}/(1 - e^{-1})`.
pub fn tail_high_prob_bound(model: &CoefficientModel, n_t: usize, rho: f64, fail_exp: f64) -> Result<TailBound> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidRadius(rho));
    }
    if !(fail_exp > 0.0 && fail_exp.is_finite()) {
        return Err(Error::Domain(format!("fail_exp must be positive, got {fail_exp}")));
    }
    let log_fail_prob = -fail_exp - (-(-1.0f64).exp()).ln_1p();
    let log_rho = rho.ln();
    let mut sum = NeumaierSum::default();
    let cap = n_t + 4 * DEFAULT_TERM_CAP;
    for (n, log_sq) in model.log_sq_iter().enumerate().skip(n_t + 1) {
        let k = (n - n_t) as f64;
        let term = (0.5 * log_sq + n as f64 * log_rho).exp() * (k + fail_exp).sqrt();
        sum.add(term);
        if model.len().is_none() {
            let q = model.sup_sq_ratio_from(n).sqrt() * rho * ((k + 1.0 + fail_exp) / (k + fail_exp)).sqrt();
            if q < 1.0 {
                let rest = term * q / (1.0 - q);
                if rest <= 1e-16 * sum.value() || rest < 1e-300 {
                    sum.add(rest);
                    break;
                }
            }
        }
        if n > cap {
            return Err(Error::NoConvergence { cap });
        }
    }
    Ok(TailBound { bound: sum.value(), log_fail_prob })
}

/// Draw `ζ_0, …, ζ_{n_t}` for the given `(seed, stream_id)`.
pub fn sample(model: &CoefficientModel, seed: u64, stream_id: u64, n_t: usize) -> GafSample {
    sample_with(model, seed, stream_id, n_t, GaussianSource::BoxMuller)
}

pub fn sample_with(
    model: &CoefficientModel,
    seed: u64,
    stream_id: u64,
    n_t: usize,
    source: GaussianSource,
) -> GafSample {
    let weights = model.coefficients_to(n_t);
    let zetas = standard_gaussians(seed, stream_id, LANE_COEFFS, n_t + 1, source);
    let coeffs = zetas.into_iter().zip(weights).map(|(z, a)| z * a).collect();
    GafSample { model: model.clone(), coeffs, seed, stream_id }
}

/// `count` standard complex Gaussians from one lane of a counter-based stream.
pub fn standard_gaussians(seed: u64, stream_id: u64, lane: u64, count: usize, source: GaussianSource) -> Vec<Complex64> {
    match source {
        GaussianSource::BoxMuller => {
            let mut s = Stream::new(seed, stream_id, lane);
            (0..count).map(|_| s.complex_gaussian()).collect()
        }
        GaussianSource::Zero => vec![Complex64::new(0.0, 0.0); count],
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_fft(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

impl GafSample {
    /// Wrap explicit polynomial coefficients (model `Explicit` with `a_n = |c_n|`).
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidModel("sample needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        let model = CoefficientModel::explicit(coeffs.iter().map(|c| c.norm()).collect())?;
        Ok(GafSample { model, coeffs, seed: 0, stream_id: 0 })
    }

    pub(crate) fn from_parts(model: CoefficientModel, coeffs: Vec<Complex64>, seed: u64, stream_id: u64) -> Self {
        debug_assert!(!coeffs.is_empty());
        GafSample { model, coeffs, seed, stream_id }
    }

    pub fn with_model(mut self, model: CoefficientModel) -> Self {
        self.model = model;
        self
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn trunc_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// `G = F - F(0)`: the same sample with `c_0` set to zero.
    pub fn without_constant(&self) -> GafSample {
        let mut s = self.clone();
        s.coeffs[0] = Complex64::new(0.0, 0.0);
        s
    }

    /// Coefficients rotated as `c_n ← c_n e(n t)`, i.e. `z ↦ F(z e(t))`.
    pub fn rotated(&self, turns: f64) -> GafSample {
        let mut s = self.clone();
        for (n, c) in s.coeffs.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, std::f64::consts::TAU * turns * n as f64);
        }
        s
    }

    /// Horner evaluation of the truncated series at `|z| < 1`.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        if !(z.norm() < 1.0) {
            return Err(Error::InvalidPoint(z));
        }
        Ok(self.horner(z))
    }

    pub(crate) fn horner(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `Σ_{n≥1} n |c_n| ρ^{n-1}`, a bound for `max_{|z|≤ρ} |F'(z)|`.
    pub fn derivative_sup_bound(&self, rho: f64) -> f64 {
        let mut power = 1.0;
        let mut sum = 0.0;
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            sum += n as f64 * c.norm() * power;
            power *= rho;
        }
        sum
    }

    /// Values at `ρ e(j/K)`, `j = 0..K`, by folding the coefficients modulo `K`
    /// and one inverse FFT.
    pub fn circle_values(&self, rho: f64, k: usize) -> Vec<Complex64> {
        assert!(k > 0);
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        let mut power = 1.0;
        for (n, c) in self.coeffs.iter().enumerate() {
            buf[n % k] += c * power;
            power *= rho;
        }
        inverse_fft(k).process(&mut buf);
        buf
    }

    pub fn to_record(&self) -> GafSampleRecord {
        GafSampleRecord {
            model: self.model.clone(),
            seed: self.seed,
            stream_id: self.stream_id,
            n_t: self.trunc_degree(),
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

/// JSONL debug record `{model, seed, stream_id, N_t, coeffs: [[re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GafSampleRecord {
    pub model: CoefficientModel,
    pub seed: u64,
    pub stream_id: u64,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    pub coeffs: Vec<[f64; 2]>,
}

impl TryFrom<GafSampleRecord> for GafSample {
    type Error = Error;

    fn try_from(r: GafSampleRecord) -> Result<Self> {
        if r.coeffs.len() != r.n_t.saturating_add(1) {
            return Err(Error::Parse(format!(
                "N_t = {} but {} coefficients were given",
                r.n_t,
                r.coeffs.len()
            )));
        }
        if r.coeffs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse("non-finite coefficient".into()));
        }
        Ok(GafSample {
            model: r.model,
            coeffs: r.coeffs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
            seed: r.seed,
            stream_id: r.stream_id,
        })
    }
}

/// Parse one JSONL line into a validated sample.
pub fn parse_sample_line(line: &str) -> Result<GafSample> {
    let rec: GafSampleRecord = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
    GafSample::try_from(rec)
}

pub fn sample_to_line(sample: &GafSample) -> String {
    serde_json::to_string(&sample.to_record()).expect("sample records always serialize")
}
