//! Binomial confidence intervals.

use crate::special::normal_quantile;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Two-sided Wilson score interval at confidence `conf` for `hits` successes out of `trials`.
pub fn wilson(hits: u64, trials: u64, conf: f64) -> Interval {
    if trials == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let z = normal_quantile(0.5 + conf / 2.0);
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // The exact endpoints at p = 0 and p = 1 are 0 and 1; the formula only reaches them up to rounding.
    let low = if hits == 0 { 0.0 } else { (centre - half).clamp(0.0, 1.0) };
    let high = if hits >= trials { 1.0 } else { (centre + half).clamp(0.0, 1.0) };
    Interval { low, high }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brackets_the_point_estimate() {
        for (h, n) in [(0u64, 10u64), (3, 10), (10, 10), (500, 1000)] {
            let i = wilson(h, n, 0.99);
            let p = h as f64 / n as f64;
            assert!(i.low <= p && p <= i.high);
        }
        assert_eq!(wilson(0, 100, 0.99).low, 0.0);
        assert!(wilson(0, 100, 0.99).high > 0.0);
    }

    #[test]
    fn known_value() {
        // z = 1.959964: 5/10 -> centre 0.5, half = z/(1+z²/10)·sqrt(0.025 + z²/400)
        let z: f64 = 1.959963984540054;
        let half = z / (1.0 + z * z / 10.0) * (0.025 + z * z / 400.0f64).sqrt();
        let i = wilson(5, 10, 0.95);
        assert!((i.low - (0.5 - half)).abs() < 1e-12);
        assert!((i.high - (0.5 + half)).abs() < 1e-12);
    }
}
