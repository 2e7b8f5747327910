//! Certified hole detection for single samples and Monte Carlo estimators of
//! the hole probability `P[F ≠ 0 on the closed disk of radius r]`.

use crate::coeffs::{CoefficientModel, ModelKind};
use crate::error::{Error, Result};
use crate::gaf::{
    sample_with, standard_gaussians, tail_high_prob_bound, truncation_degree, GafSample, GaussianSource,
    DEFAULT_FAIL_EXP, DEFAULT_TAU_REL,
};
use crate::numeric::NeumaierSum;
use crate::rng::{LANE_COEFFS, LANE_TILT_TAIL};
use crate::stats::wilson;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

pub const DEFAULT_K_INIT: usize = 64;
pub const DEFAULT_K_CAP: usize = 1 << 20;
/// Cap on `trials × (N_t + 1)` for one estimate.
pub const DEFAULT_COMPUTE_CAP: f64 = 1e11;

/// Grid evaluation of a polynomial on `|z| = ρ` with a derivative-based
/// variation bound between grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleScan {
    pub grid_min: f64,
    pub grid_max: f64,
    /// `D·πρ/K`: no point of the circle is farther than `πρ/K` from the grid.
    pub variation: f64,
    pub k_used: usize,
    /// Certified winding number, available when every grid modulus exceeds `D·2πρ/K`.
    pub winding: Option<i64>,
}

impl CircleScan {
    pub fn lower_bound(&self) -> f64 {
        self.grid_min - self.variation
    }

    pub fn upper_bound(&self) -> f64 {
        self.grid_max + self.variation
    }
}

fn scan_once(sample: &GafSample, rho: f64, k: usize, deriv: f64) -> CircleScan {
    let values = sample.circle_values(rho, k);
    let mut grid_min = f64::INFINITY;
    let mut grid_max = 0.0f64;
    for v in &values {
        let m = v.norm();
        grid_min = grid_min.min(m);
        grid_max = grid_max.max(m);
    }
    let variation = deriv * PI * rho / k as f64;
    // Each arc image lies in a disk about f(z_j) of radius D·h < |f(z_j)|, so the
    // principal argument increments sum to the true change of argument.
    let winding = (grid_min > 2.0 * variation && grid_min > 0.0).then(|| {
        let mut total = NeumaierSum::default();
        for j in 0..k {
            let next = values[(j + 1) % k];
            total.add((next / values[j]).arg());
        }
        (total.value() / std::f64::consts::TAU).round() as i64
    });
    CircleScan { grid_min, grid_max, variation, k_used: k, winding }
}

/// Scan with `K = k_init, 2·k_init, …` until `done` accepts the scan, the
/// variation bound vanishes, or the next `K` would exceed `k_cap`.
pub fn scan_circle(
    sample: &GafSample,
    rho: f64,
    k_init: usize,
    k_cap: usize,
    mut done: impl FnMut(&CircleScan) -> bool,
) -> CircleScan {
    let deriv = sample.derivative_sup_bound(rho);
    let mut k = k_init.max(8);
    loop {
        let scan = scan_once(sample, rho, k, deriv);
        if done(&scan) || scan.variation == 0.0 || k.saturating_mul(2) > k_cap.max(k_init) {
            return scan;
        }
        k *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinModulus {
    pub lower_bound: f64,
    pub grid_min: f64,
    pub k_used: usize,
}

/// Certified lower bound for `min_{|z|=ρ} |P(z)|`, refining until the bound
/// exceeds half the grid minimum.
pub fn min_modulus_certified(sample: &GafSample, rho: f64, k_init: usize) -> MinModulus {
    let mut best: Option<MinModulus> = None;
    scan_circle(sample, rho, k_init, DEFAULT_K_CAP, |s| {
        let lb = s.lower_bound();
        if best.is_none_or(|b| lb > b.lower_bound) {
            best = Some(MinModulus { lower_bound: lb, grid_min: s.grid_min, k_used: s.k_used });
        }
        lb > s.grid_min / 2.0
    });
    best.expect("at least one scan runs")
}

/// Number of zeros of the polynomial in `|z| < ρ`, or `None` if the argument
/// increments cannot be certified below `K_cap`.
pub fn winding_number_certified(sample: &GafSample, rho: f64) -> Option<i64> {
    scan_circle(sample, rho, DEFAULT_K_INIT, DEFAULT_K_CAP, |s| s.winding.is_some()).winding
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    /// The certified minimum modulus does not exceed the tail bound.
    MarginNotPositive,
    /// The winding number could not be certified at the grid cap.
    WindingUncertified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleOutcome {
    HoleCertified,
    ZeroCertified(u64),
    Inconclusive(InconclusiveReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleDecision {
    pub outcome: HoleOutcome,
    pub margin: f64,
    pub grid_size_used: usize,
}

/// Decide whether the full series has no zero on the closed disk of radius `r`,
/// given `tail_bound ≥ max_{|z|=r} |F - P|` for the truncated polynomial `P`.
///
/// When the certified minimum of `|P|` exceeds the tail bound, `F` and `P` have
/// the same number of zeros inside (Rouché) and none on the circle.
pub fn hole_decision(sample: &GafSample, r: f64, tail_bound: f64) -> HoleDecision {
    hole_decision_with(sample, r, tail_bound, DEFAULT_K_INIT, DEFAULT_K_CAP)
}

pub fn hole_decision_with(sample: &GafSample, r: f64, tail_bound: f64, k_init: usize, k_cap: usize) -> HoleDecision {
    let scan = scan_circle(sample, r, k_init, k_cap, |s| s.winding.is_some() && s.lower_bound() > tail_bound);
    let margin = scan.lower_bound() - tail_bound;
    let outcome = if !(margin > 0.0) {
        HoleOutcome::Inconclusive(InconclusiveReason::MarginNotPositive)
    } else {
        match scan.winding {
            Some(0) => HoleOutcome::HoleCertified,
            Some(k) if k > 0 => HoleOutcome::ZeroCertified(k as u64),
            _ => HoleOutcome::Inconclusive(InconclusiveReason::WindingUncertified),
        }
    };
    HoleDecision { outcome, margin, grid_size_used: scan.k_used }
}

/// Numerical knobs shared by the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateOptions {
    pub tau_rel: f64,
    pub fail_exp: f64,
    pub k_init: usize,
    pub k_cap: usize,
    pub compute_cap: f64,
    #[serde(skip)]
    pub source: GaussianSource,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            tau_rel: DEFAULT_TAU_REL,
            fail_exp: DEFAULT_FAIL_EXP,
            k_init: DEFAULT_K_INIT,
            k_cap: DEFAULT_K_CAP,
            compute_cap: DEFAULT_COMPUTE_CAP,
            source: GaussianSource::BoxMuller,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Direct,
    ThresholdLower,
    TiltedLower,
}

impl EstimateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateMode::Direct => "direct",
            EstimateMode::ThresholdLower => "threshold_lower",
            EstimateMode::TiltedLower => "tilted_lower",
        }
    }
}

/// One hole-probability estimate. Deterministic given its inputs; timings are
/// kept outside this record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleEstimate {
    pub mode: EstimateMode,
    pub model: CoefficientModel,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub trials: u64,
    pub hits: u64,
    pub inconclusive: u64,
    pub p_low: f64,
    pub p_high: f64,
    /// `ln p_low`; `None` when `p_low = 0` because no trial succeeded.
    pub log_p_low: Option<f64>,
    pub confidence: f64,
    pub seed: u64,
    pub fail_exp: f64,
    pub tau_rel: f64,
    #[serde(rename = "N_t")]
    pub n_t: usize,
    /// Union bound on the probability that some per-trial tail certificate fails.
    pub cert_fail_budget: f64,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl HoleEstimate {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("estimates always serialize")
    }
}

/// Parse and validate one JSONL estimate record.
pub fn parse_estimate_line(line: &str) -> Result<HoleEstimate> {
    let e: HoleEstimate = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !(unit(e.p_low) && unit(e.p_high) && e.p_low <= e.p_high) {
        return Err(Error::Parse(format!("need 0 ≤ p_low ≤ p_high ≤ 1, got {} and {}", e.p_low, e.p_high)));
    }
    if e.hits.checked_add(e.inconclusive).is_none_or(|s| s > e.trials) {
        return Err(Error::Parse("hits + inconclusive exceeds trials".into()));
    }
    if !(e.confidence > 0.0 && e.confidence < 1.0) {
        return Err(Error::Parse(format!("confidence {} outside (0, 1)", e.confidence)));
    }
    Ok(e)
}

/// CSV summary with one row per estimate, keyed by `(L, r, mode)`.
pub fn estimates_to_csv(estimates: &[HoleEstimate]) -> String {
    let mut rows: Vec<&HoleEstimate> = estimates.iter().collect();
    rows.sort_by(|a, b| {
        let la = a.model.intensity().unwrap_or(f64::NAN);
        let lb = b.model.intensity().unwrap_or(f64::NAN);
        la.total_cmp(&lb).then(a.r.total_cmp(&b.r)).then(a.mode.cmp(&b.mode))
    });
    let mut out = String::from("L,r,mode,M,trials,hits,inconclusive,p_low,p_high,log_p_low,confidence\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for e in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{:e},{},{}",
            opt(e.model.intensity()),
            e.r,
            e.mode.as_str(),
            opt(e.m),
            e.trials,
            e.hits,
            e.inconclusive,
            e.p_low,
            e.p_high,
            opt(e.log_p_low),
            e.confidence
        )
        .unwrap();
    }
    out
}

fn check_common(r: f64, trials: u64, confidence: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0 && r < 1.0) {
        return Err(Error::InvalidRadius(r));
    }
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    Ok(())
}

fn check_budget(trials: u64, per_trial: usize, cap: f64) -> Result<()> {
    let requested = trials as f64 * (per_trial as f64 + 1.0);
    if requested > cap {
        return Err(Error::BudgetExceeded { requested, cap });
    }
    Ok(())
}

fn cert_fail_budget(trials: u64, log_fail: f64) -> f64 {
    (trials as f64 * log_fail.exp()).min(1.0)
}

#[derive(Clone, Copy, Default)]
struct Tally {
    hits: u64,
    inconclusive: u64,
}

/// Run `trials` independent trials in parallel; the reduction is a sum of counters
/// and does not depend on scheduling.
fn tally<F>(trials: u64, f: F) -> Tally
where
    F: Fn(u64) -> Option<bool> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| match f(t) {
            Some(true) => Tally { hits: 1, inconclusive: 0 },
            Some(false) => Tally::default(),
            None => Tally { hits: 0, inconclusive: 1 },
        })
        .reduce(Tally::default, |a, b| Tally { hits: a.hits + b.hits, inconclusive: a.inconclusive + b.inconclusive })
}

fn ln_or_none(p: f64) -> Option<f64> {
    (p > 0.0).then(|| p.ln())
}

/// Direct Monte Carlo: a trial is a hit when the sample is certified to have a hole.
pub fn estimate_hole_direct(
    model: &CoefficientModel,
    r: f64,
    trials: u64,
    seed: u64,
    confidence: f64,
    opts: &EstimateOptions,
) -> Result<HoleEstimate> {
    check_common(r, trials, confidence)?;
    let n_t = truncation_degree(model, r, opts.tau_rel)?;
    check_budget(trials, n_t, opts.compute_cap)?;
    let tail = tail_high_prob_bound(model, n_t, r, opts.fail_exp)?;
    let counts = tally(trials, |t| {
        let s = sample_with(model, seed, t, n_t, opts.source);
        match hole_decision_with(&s, r, tail.bound, opts.k_init, opts.k_cap).outcome {
            HoleOutcome::HoleCertified => Some(true),
            HoleOutcome::ZeroCertified(_) => Some(false),
            HoleOutcome::Inconclusive(_) => None,
        }
    });
    let low = wilson(counts.hits, trials, confidence).low;
    let high = wilson(counts.hits + counts.inconclusive, trials, confidence).high;
    Ok(HoleEstimate {
        mode: EstimateMode::Direct,
        model: model.clone(),
        r,
        m: None,
        trials,
        hits: counts.hits,
        inconclusive: counts.inconclusive,
        p_low: low,
        p_high: high,
        log_p_low: ln_or_none(low),
        confidence,
        seed,
        fail_exp: opts.fail_exp,
        tau_rel: opts.tau_rel,
        n_t,
        cert_fail_budget: cert_fail_budget(trials, tail.log_fail_prob),
        diagnostics: BTreeMap::new(),
    })
}

/// Constants of the regime-dependent default threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdParams {
    /// `ε` for `L < 1`.
    pub epsilon: f64,
    /// `B` for `L = 1`.
    pub b: f64,
    /// `α` for `L > 1`.
    pub alpha: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams { epsilon: 0.05, b: 3.0, alpha: 0.75 }
    }
}

/// Default threshold `M` with `δ = 1 - r`:
/// `√(1-L+2ε)(1-r²)^{-L/2}√(ln 1/δ)` for `L < 1`, `B/√δ` for `L = 1`,
/// `δ^{-1/2}(ln 1/δ)^α` for `L > 1`.
pub fn default_threshold(l: f64, r: f64, params: &ThresholdParams) -> Result<f64> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidIntensity(l));
    }
    if !(r.is_finite() && r > 0.0 && r < 1.0) {
        return Err(Error::InvalidRadius(r));
    }
    let delta = 1.0 - r;
    let log_inv = -delta.ln();
    let m = if l < 1.0 {
        (1.0 - l + 2.0 * params.epsilon).sqrt() * (-0.5 * l * (-r * r).ln_1p()).exp() * log_inv.sqrt()
    } else if l == 1.0 {
        params.b / delta.sqrt()
    } else {
        log_inv.powf(params.alpha) / delta.sqrt()
    };
    if m.is_finite() && m > 0.0 {
        Ok(m)
    } else {
        Err(Error::Domain(format!("threshold is not positive at L = {l}, r = {r}")))
    }
}

/// Certified `max_{|z|=ρ} |P| + tail ≤ level`: `Some(true)` if certified below,
/// `Some(false)` if a grid value already exceeds it, `None` if undecided at the cap.
fn certified_max_at_most(p: &GafSample, rho: f64, tail: f64, level: f64, opts: &EstimateOptions) -> Option<bool> {
    let scan = scan_circle(p, rho, opts.k_init, opts.k_cap, |s| s.grid_max > level || s.upper_bound() + tail <= level);
    if scan.upper_bound() + tail <= level {
        Some(true)
    } else if scan.grid_max > level {
        Some(false)
    } else {
        None
    }
}

/// Lower bound `P[Hole(r)] ≥ e^{-M²}·P[max_{|z|=r} |F - F(0)| ≤ M]`, with the
/// second factor replaced by a Wilson lower confidence bound on certified trials.
pub fn estimate_hole_lower_threshold(
    model: &CoefficientModel,
    r: f64,
    m: f64,
    trials: u64,
    seed: u64,
    confidence: f64,
    opts: &EstimateOptions,
) -> Result<HoleEstimate> {
    check_common(r, trials, confidence)?;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("threshold M must be positive, got {m}")));
    }
    let n_t = truncation_degree(model, r, opts.tau_rel)?;
    check_budget(trials, n_t, opts.compute_cap)?;
    let tail = tail_high_prob_bound(model, n_t, r, opts.fail_exp)?;
    let counts = tally(trials, |t| {
        let g = sample_with(model, seed, t, n_t, opts.source).without_constant();
        certified_max_at_most(&g, r, tail.bound, m, opts)
    });
    let q_low = wilson(counts.hits, trials, confidence).low;
    let log_p_low = ln_or_none(q_low).map(|l| l - m * m);
    Ok(HoleEstimate {
        mode: EstimateMode::ThresholdLower,
        model: model.clone(),
        r,
        m: Some(m),
        trials,
        hits: counts.hits,
        inconclusive: counts.inconclusive,
        p_low: log_p_low.map_or(0.0, f64::exp),
        p_high: 1.0,
        log_p_low,
        confidence,
        seed,
        fail_exp: opts.fail_exp,
        tau_rel: opts.tau_rel,
        n_t,
        cert_fail_budget: cert_fail_budget(trials, tail.log_fail_prob),
        diagnostics: BTreeMap::from([("q_low".to_string(), q_low)]),
    })
}

/// Block sizes and tilts of the tilted estimator for `L > 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltPlan {
    pub delta: f64,
    /// `N = ⌊(2L/δ) ln(1/δ)⌋`.
    #[serde(rename = "N")]
    pub n: usize,
    /// `N₁ = ⌊((L-1)/2δ) ln(1/δ)⌋`.
    #[serde(rename = "N1")]
    pub n1: usize,
    /// `r₂ = r + δ²`.
    pub r2: f64,
    pub alpha1: f64,
    /// `q_1, …, q_N`.
    pub tilts: Vec<f64>,
}

fn tilted_intensity(model: &CoefficientModel) -> Result<f64> {
    let l = match model.kind() {
        ModelKind::Hyperbolic => model.intensity().expect("hyperbolic models carry L"),
        _ => return Err(Error::InvalidModel(format!("the tilted estimator needs a hyperbolic model, got {model}"))),
    };
    if l <= 1.0 {
        return Err(Error::IntensityOutOfRange(l));
    }
    Ok(l)
}

/// Tilts `q_n² = α₁/(a_n² r₂^{2n} ln(1/δ))` for `n ≤ N₁` and `α₁ (ln 1/δ)^{-L}`
/// for `N₁ < n ≤ N`.
///
/// With `alpha1 = None`, `α₁` is the largest value keeping every `q_n ≤ 1`, reduced
/// further if needed so that the tilted block variance at `r₂` is at most `1/(4δ)`.
pub fn tilt_plan(model: &CoefficientModel, r: f64, alpha1: Option<f64>) -> Result<TiltPlan> {
    let l = tilted_intensity(model)?;
    if !(r.is_finite() && r > 0.0 && r < 1.0) {
        return Err(Error::InvalidRadius(r));
    }
    let delta = 1.0 - r;
    let log_inv = -delta.ln();
    let n = ((2.0 * l / delta) * log_inv).floor() as usize;
    let n1 = (((l - 1.0) / (2.0 * delta)) * log_inv).floor().min(n as f64) as usize;
    let r2 = r + delta * delta;
    let log_r2 = r2.ln();
    let a = model.coefficients_to(n);
    let log_w: Vec<f64> = (0..=n).map(|i| 2.0 * a[i].ln() + 2.0 * i as f64 * log_r2).collect();
    // log q_n² = ln α₁ + shape_n
    let shape: Vec<f64> = (1..=n)
        .map(|i| if i <= n1 { -log_w[i] - log_inv.ln() } else { -l * log_inv.ln() })
        .collect();
    let alpha1 = match alpha1 {
        Some(v) => {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("alpha1 must be positive, got {v}")));
            }
            v
        }
        None => {
            let max_shape = shape.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut v = if n == 0 { 1.0 } else { (-max_shape).exp() };
            // σ_Q(r₂)² = Σ q_n² a_n² r₂^{2n}, linear in α₁.
            let per_unit: f64 = (1..=n).map(|i| (shape[i - 1] + log_w[i]).exp()).sum();
            let cap = 1.0 / (4.0 * delta);
            if per_unit * v > cap {
                v = cap / per_unit;
            }
            v
        }
    };
    let mut tilts = Vec::with_capacity(n);
    for (i, s) in shape.iter().enumerate() {
        let q = (0.5 * (alpha1.ln() + s)).exp();
        if q > 1.0 + 1e-12 {
            return Err(Error::TiltOutOfRange { index: i + 1, value: q });
        }
        tilts.push(q.min(1.0));
    }
    Ok(TiltPlan { delta, n, n1, r2, alpha1, tilts })
}

/// Tilted lower bound for `L > 1` with threshold `M = δ^{-1/2}(ln 1/δ)^α`.
#[allow(clippy::too_many_arguments)]
pub fn tilted_lower_estimator(
    model: &CoefficientModel,
    r: f64,
    alpha: f64,
    alpha1: Option<f64>,
    trials: u64,
    seed: u64,
    confidence: f64,
    opts: &EstimateOptions,
) -> Result<HoleEstimate> {
    let l = tilted_intensity(model)?;
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (1/2, 1), got {alpha}")));
    }
    let plan = tilt_plan(model, r, alpha1)?;
    let m = default_threshold(l, r, &ThresholdParams { alpha, ..ThresholdParams::default() })?;
    let mut est = tilted_lower_with_tilts(model, r, m, &plan.tilts, trials, seed, confidence, opts)?;
    let delta = plan.delta;
    let log_inv = -delta.ln();
    let asymptotic = -((l - 1.0).powi(2) / 4.0) * log_inv * log_inv / delta;
    est.diagnostics.insert("alpha".into(), alpha);
    est.diagnostics.insert("alpha1".into(), plan.alpha1);
    est.diagnostics.insert("N1".into(), plan.n1 as f64);
    est.diagnostics.insert("log_asymptotic".into(), asymptotic);
    if let Some(lp) = est.log_p_low {
        est.diagnostics.insert("ratio_to_asymptotic".into(), lp / asymptotic);
    }
    Ok(est)
}

/// Tilted lower bound with explicit tilts `q_1..q_N` (`N = tilts.len()`):
///
/// `P[Hole] ≥ e^{-M²} · Π q_n² · P[max |Σ_{n≤N} ζ_n q_n a_n zⁿ| ≤ M/2] · P[max |Σ_{n>N} ζ_n a_n zⁿ| ≤ M/2]`.
///
/// The two probabilities are replaced by Wilson lower bounds, each at
/// confidence `1 - (1 - confidence)/2` so the product holds at `confidence`.
#[allow(clippy::too_many_arguments)]
pub fn tilted_lower_with_tilts(
    model: &CoefficientModel,
    r: f64,
    m: f64,
    tilts: &[f64],
    trials: u64,
    seed: u64,
    confidence: f64,
    opts: &EstimateOptions,
) -> Result<HoleEstimate> {
    check_common(r, trials, confidence)?;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("threshold M must be positive, got {m}")));
    }
    if let Some((i, &q)) = tilts.iter().enumerate().find(|(_, q)| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::TiltOutOfRange { index: i + 1, value: q });
    }
    let n = tilts.len();
    let n_t = truncation_degree(model, r, opts.tau_rel)?.max(n);
    check_budget(trials, n_t, opts.compute_cap)?;
    let tail = tail_high_prob_bound(model, n_t, r, opts.fail_exp)?;
    let a = model.coefficients_to(n_t);
    let mut middle_weights = vec![0.0; n + 1];
    for i in 1..=n {
        middle_weights[i] = tilts[i - 1] * a[i];
    }
    let middle_model = CoefficientModel::explicit(middle_weights.clone())?;
    let mut tail_weights = a.clone();
    tail_weights[..=n].iter_mut().for_each(|w| *w = 0.0);
    let tail_model = CoefficientModel::explicit(tail_weights.clone())?;
    let half = m / 2.0;

    let middle = tally(trials, |t| {
        let z = standard_gaussians(seed, t, LANE_COEFFS, n + 1, opts.source);
        let c: Vec<Complex64> = z.iter().zip(&middle_weights).map(|(z, w)| z * w).collect();
        let p = GafSample::from_parts(middle_model.clone(), c, seed, t);
        certified_max_at_most(&p, r, 0.0, half, opts)
    });
    let tail_block = tally(trials, |t| {
        let z = standard_gaussians(seed, t, LANE_TILT_TAIL, n_t + 1, opts.source);
        let c: Vec<Complex64> = z.iter().zip(&tail_weights).map(|(z, w)| z * w).collect();
        let p = GafSample::from_parts(tail_model.clone(), c, seed, t);
        certified_max_at_most(&p, r, tail.bound, half, opts)
    });
    let each = 1.0 - (1.0 - confidence) / 2.0;
    let w_mid = wilson(middle.hits, trials, each).low;
    let w_tail = wilson(tail_block.hits, trials, each).low;
    let log_q_sq: f64 = tilts.iter().map(|q| 2.0 * q.ln()).sum();
    let log_p_low = (w_mid > 0.0 && w_tail > 0.0).then(|| -m * m + log_q_sq + w_mid.ln() + w_tail.ln());
    let diagnostics = BTreeMap::from([
        ("N".to_string(), n as f64),
        ("log_Q_sq".to_string(), log_q_sq),
        ("middle_hits".to_string(), middle.hits as f64),
        ("middle_inconclusive".to_string(), middle.inconclusive as f64),
        ("middle_low".to_string(), w_mid),
        ("tail_hits".to_string(), tail_block.hits as f64),
        ("tail_inconclusive".to_string(), tail_block.inconclusive as f64),
        ("tail_low".to_string(), w_tail),
    ]);
    Ok(HoleEstimate {
        mode: EstimateMode::TiltedLower,
        model: model.clone(),
        r,
        m: Some(m),
        trials,
        hits: middle.hits.min(tail_block.hits),
        inconclusive: middle.inconclusive.max(tail_block.inconclusive),
        p_low: log_p_low.map_or(0.0, f64::exp),
        p_high: 1.0,
        log_p_low,
        confidence,
        seed,
        fail_exp: opts.fail_exp,
        tau_rel: opts.tau_rel,
        n_t,
        cert_fail_budget: cert_fail_budget(trials, tail.log_fail_prob),
        diagnostics,
    })
}

/// `Π_{k≥1} (1 - r^{2k})`, the hole probability of the `L = 1` function.
pub fn determinantal_oracle(r: f64) -> Result<f64> {
    Ok(log_determinantal_oracle(r)?.exp())
}

/// `Σ_{k≥1} ln(1 - r^{2k})`; stays finite where the product underflows.
pub fn log_determinantal_oracle(r: f64) -> Result<f64> {
    if !(r.is_finite() && (0.0..1.0).contains(&r)) {
        return Err(Error::InvalidRadius(r));
    }
    let x = r * r;
    let mut log = NeumaierSum::default();
    let mut power = x;
    while power >= 1e-16 * (1.0 - x) * 1e-2 && power > 0.0 {
        log.add((-power).ln_1p());
        power *= x;
    }
    // Remaining factors: Σ ln(1 - x^k) ≥ -Σ x^k/(1 - x^k); include the leading estimate.
    log.add(-power / (1.0 - x));
    Ok(log.value())
}
