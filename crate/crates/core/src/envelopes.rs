//! Asymptotic guide curves for `-log P[Hole(r)]`. The `o(1)` terms are dropped,
//! so these are never certificates.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::special::ln_gamma;
use crate::spectra::circulant_eigenvalues;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

pub const THEOREM81_C_SMALL: f64 = 0.1;
pub const THEOREM81_C_LARGE: f64 = 10.0;
pub const ENVELOPE_NOTE: &str = "asymptotic, o(1) omitted";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Sub1,
    Crit,
    Super1,
}

impl Regime {
    pub fn of(l: f64) -> Regime {
        if l < 1.0 {
            Regime::Sub1
        } else if l == 1.0 {
            Regime::Crit
        } else {
            Regime::Super1
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Sub1 => "sub1",
            Regime::Crit => "crit",
            Regime::Super1 => "super1",
        }
    }
}

/// Lower and upper guide values for `-log P[Hole(r)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEnvelope {
    #[serde(rename = "L")]
    pub l: f64,
    pub r: f64,
    pub lower: f64,
    pub upper: f64,
    pub regime: Regime,
    /// `ln(1/(1-r)) < 1`: too far from the boundary for the asymptotics to mean much.
    pub pre_asymptotic: bool,
    pub note: String,
}

fn check_l(l: f64) -> Result<f64> {
    if l.is_finite() && l > 0.0 {
        Ok(l)
    } else {
        Err(Error::InvalidIntensity(l))
    }
}

fn check_r(r: f64) -> Result<f64> {
    if r.is_finite() && r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(Error::InvalidRadius(r))
    }
}

fn envelope(l: f64, r: f64, lower: f64, upper: f64, regime: Regime) -> BoundEnvelope {
    BoundEnvelope {
        l,
        r,
        lower,
        upper,
        regime,
        pre_asymptotic: -(1.0 - r).ln() < 1.0,
        note: ENVELOPE_NOTE.to_string(),
    }
}

/// Leading terms for the hyperbolic family with `δ = 1 - r`:
/// `L < 1`: `(1-L)/2^{L+1} δ^{-L} ln(1/δ)` to twice that;
/// `L = 1`: `(π²/12)/δ`; `L > 1`: `((L-1)²/4) δ^{-1} ln²(1/δ)`.
pub fn theorem1_envelope(l: f64, r: f64) -> Result<BoundEnvelope> {
    check_l(l)?;
    check_r(r)?;
    let delta = 1.0 - r;
    let log_inv = -delta.ln();
    let regime = Regime::of(l);
    let (lower, upper) = match regime {
        Regime::Sub1 => {
            let lo = (1.0 - l) / 2f64.powf(l + 1.0) * delta.powf(-l) * log_inv;
            (lo, 2.0 * lo)
        }
        Regime::Crit => {
            let v = PI * PI / 12.0 / delta;
            (v, v)
        }
        Regime::Super1 => {
            let v = (l - 1.0).powi(2) / 4.0 * log_inv * log_inv / delta;
            (v, v)
        }
    };
    Ok(envelope(l, r, lower, upper, regime))
}

/// `((1-L)/2) σ_F(r)² ln(1/(1-r))` to `(1-L) σ_F(r)² ln(1/(1-r))` for non-increasing
/// coefficients with `a_0 = 1`.
pub fn general_band_l_less_1(model: &CoefficientModel, r: f64) -> Result<BoundEnvelope> {
    check_r(r)?;
    if let Some(i) = model.first_increase() {
        return Err(Error::NotMonotone(i));
    }
    let l = model
        .intensity()
        .ok_or_else(|| Error::InvalidModel("the band needs an intensity L; set it on the explicit model".into()))?;
    if l > 1.0 {
        return Err(Error::IntensityOutOfRange(l));
    }
    if (model.coefficient(0)? - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel("the band needs a_0 = 1".into()));
    }
    let scale = model.sigma_sq(r)? * -(1.0 - r).ln();
    let lower = (1.0 - l) / 2.0 * scale;
    Ok(envelope(l, r, lower, 2.0 * lower, Regime::of(l)))
}

/// `c/(1-r)` to `C/(1-r)` for coefficients bounded above and below, `1/2 ≤ r < 1`.
pub fn theorem81_band(r: f64, c_small: f64, c_large: f64) -> Result<BoundEnvelope> {
    if !(r.is_finite() && (0.5..1.0).contains(&r)) {
        return Err(Error::InvalidRadius(r));
    }
    if !(c_small > 0.0 && c_small <= c_large && c_large.is_finite()) {
        return Err(Error::Domain(format!("need 0 < c ≤ C, got c = {c_small}, C = {c_large}")));
    }
    let delta = 1.0 - r;
    Ok(envelope(1.0, r, c_small / delta, c_large / delta, Regime::Crit))
}

/// CSV with columns `L,r,regime,lower,upper`.
pub fn envelopes_to_csv(rows: &[BoundEnvelope]) -> String {
    let mut out = String::from("L,r,regime,lower,upper\n");
    for e in rows {
        writeln!(out, "{},{},{},{:e},{:e}", e.l, e.r, e.regime.as_str(), e.lower, e.upper).unwrap();
    }
    out
}

/// Overrides for the Chebyshev exponent; `None` means the default choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChebyshevParams {
    /// Default `(ln 1/δ)^{-1/2}`.
    pub a: Option<f64>,
    /// Default `1 + δ`.
    pub kappa: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCertificate {
    #[serde(rename = "L")]
    pub l: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub a: f64,
    pub theta: f64,
    pub kappa: f64,
    pub r0: f64,
    pub log_det: f64,
    pub log_lambda_max: f64,
    /// `Nθ(½+a) ln(1/δ) - log det Σ + N(1-θ/2) log Λ + N ln Γ(1-θ/2)`.
    pub exponent: f64,
    /// `exponent / (δ^{-1} ln²(1/δ))`.
    pub normalized: f64,
}

/// Exponent of the Chebyshev-inequality upper bound for the hole probability at
/// `r = 1 - δ`, with `θ = 2 - a²`, `r₀ = 1 - κδ` and `N = ⌊((L-1)/2δ) ln(1/δ)⌋`
/// points on the circle of radius `r₀`.
pub fn chebyshev_certificate(l: f64, r: f64, params: &ChebyshevParams) -> Result<ChebyshevCertificate> {
    check_l(l)?;
    if l <= 1.0 {
        return Err(Error::IntensityOutOfRange(l));
    }
    check_r(r)?;
    let delta = 1.0 - r;
    let log_inv = -delta.ln();
    let a = params.a.unwrap_or(1.0 / log_inv.sqrt());
    let kappa = params.kappa.unwrap_or(1.0 + delta);
    let theta = 2.0 - a * a;
    if !(theta > 0.0 && theta < 2.0) {
        return Err(Error::Domain(format!("theta = 2 - a² must lie in (0, 2), got {theta}")));
    }
    let r0 = 1.0 - kappa * delta;
    check_r(r0)?;
    let n = (((l - 1.0) / (2.0 * delta)) * log_inv).floor() as usize;
    if n == 0 {
        return Err(Error::Domain(format!("N = 0 at δ = {delta}; move r closer to 1")));
    }
    let spec = circulant_eigenvalues(&CoefficientModel::hyperbolic(l)?, r0, n)?;
    let nf = n as f64;
    let log_lambda_max = spec.lambda_max.ln();
    let exponent = nf * theta * (0.5 + a) * log_inv - spec.log_det
        + nf * (1.0 - theta / 2.0) * log_lambda_max
        + nf * ln_gamma(1.0 - theta / 2.0);
    Ok(ChebyshevCertificate {
        l,
        delta,
        n,
        a,
        theta,
        kappa,
        r0,
        log_det: spec.log_det,
        log_lambda_max,
        exponent,
        normalized: exponent * delta / (log_inv * log_inv),
    })
}
