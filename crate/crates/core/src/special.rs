//! Special functions: exponential integral `E₁`, Gamma wrappers and the
//! exponentially scaled modified Bessel function `e^{-x} I₀(x)`.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E₁(x) = ∫_x^∞ e^{-u}/u du` for `x > 0`.
///
/// Power series for `x ≤ 1`, modified Lentz evaluation of the continued fraction
/// `e^{-x} / (x + 1 - 1²/(x + 3 - 2²/(x + 5 - ...)))` for `x > 1`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("E1 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        // E₁(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
        let mut sum = 0.0;
        let mut power = 1.0; // (-x)^k / k!
        for k in 1..=60 {
            power *= -x / k as f64;
            let term = power / k as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        Ok(-EULER_GAMMA - x.ln() - sum)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=1000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                return Ok(h * (-x).exp());
            }
        }
        Err(Error::NoConvergence { cap: 1000 })
    }
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `e^{-x} I₀(x)` for `x ≥ 0`.
///
/// Power series `Σ (x/2)^{2k}/(k!)²` (all terms positive) below 25, Hankel's
/// asymptotic expansion above, where its smallest term is below `1e-20`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x < 25.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // I₀(x) e^{-x} ~ (2πx)^{-1/2} Σ_k ((2k-1)!!)² / (k! 8^k x^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (std::f64::consts::TAU * x).sqrt()
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}
