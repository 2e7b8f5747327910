//! Self-check suite printed by `gafhole verify`.

use gafhole::gaf::{sample_with, standard_gaussians, truncation_degree};
use gafhole::holes::{determinantal_oracle, estimate_hole_direct, EstimateOptions};
use gafhole::numeric::par_mean_se;
use gafhole::oracles::{gaussian_coupling_sample, lemma17_margin, neg_moment_exact, neg_moment_quadrature};
use gafhole::spectra::{circulant_eigenvalues, covariance_matrix, hermitian_eigenvalues};
use gafhole::{CoefficientModel, GaussianSource};
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

/// Where the expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Identity,
    Oracle,
    Asymptotic,
    MonteCarlo,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Identity => "identity",
            Source::Oracle => "oracle",
            Source::Asymptotic => "asymptotic",
            Source::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub source: Source,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn row(check: &str, source: Source, measured: f64, expected: f64, tolerance: f64) -> CheckRow {
    let pass = (measured - expected).abs() <= tolerance;
    CheckRow { check: check.into(), source, measured, expected, tolerance, pass }
}

/// Run the suite. `source` replaces the Gaussian generator everywhere the
/// sampler is exercised, so a broken generator shows up as failed rows.
pub fn verify_suite(level: Level, source: GaussianSource, seed: u64) -> gafhole::Result<Vec<CheckRow>> {
    let scale: u64 = match level {
        Level::Quick => 1,
        Level::Full => 10,
    };
    let mut rows = Vec::new();

    let count = 20_000 * scale as usize;
    let g = standard_gaussians(seed, 0, 0, count, source);
    let var = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / count as f64;
    rows.push(row("gaussian second moment", Source::MonteCarlo, var, 1.0, 5.0 / (count as f64).sqrt()));

    let model = CoefficientModel::hyperbolic(1.0)?;
    let r = 0.5;
    let n_t = truncation_degree(&model, r, 1e-10)?;
    let z = Complex64::new(r, 0.0);
    let trials = 20_000 * scale;
    let (m, se) = par_mean_se(trials, |t| sample_with(&model, seed, t, n_t, source).evaluate(z).map(|v| v.norm_sqr()).unwrap_or(f64::NAN));
    let sigma = model.sigma_sq(r)?;
    rows.push(row("sampler variance at r=0.5", Source::MonteCarlo, m, sigma, 5.0 * se.max(1e-3 * sigma)));

    rows.push(row("variance closed form vs series", Source::Identity, model.sigma_sq_series(0.7)?, model.sigma_sq(0.7)?, 1e-10 * model.sigma_sq(0.7)?));

    let l2 = CoefficientModel::hyperbolic(2.0)?;
    let spec = circulant_eigenvalues(&l2, 0.6, 16)?;
    let dense = hermitian_eigenvalues(&covariance_matrix(&l2, 0.6, 16)?);
    let mut circ = spec.lambdas.clone();
    circ.sort_by(f64::total_cmp);
    let mut dense_sorted = dense.clone();
    dense_sorted.sort_by(f64::total_cmp);
    let err = circ.iter().zip(&dense_sorted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let top = circ.last().copied().unwrap_or(1.0);
    rows.push(row("circulant vs dense eigenvalues", Source::Identity, err, 0.0, 1e-9 * top));

    for theta in [0.5, 1.0, 1.5] {
        let q = neg_moment_quadrature(theta, 1.0, Complex64::new(0.0, 0.0))?;
        rows.push(row(&format!("negative moment theta={theta}"), Source::Identity, q, neg_moment_exact(theta)?, 1e-8));
    }

    let opts = EstimateOptions { source, ..EstimateOptions::default() };
    let est = estimate_hole_direct(&model, 0.3, 5_000 * scale, seed, 0.99, &opts)?;
    let oracle = determinantal_oracle(0.3)?;
    let mid = 0.5 * (est.p_low + est.p_high);
    let mut hole = row("hole probability L=1 r=0.3", Source::Oracle, mid, oracle, 0.5 * (est.p_high - est.p_low) + 1e-12);
    // An all-inconclusive run gives the vacuous interval [0, 1].
    hole.pass &= est.p_high - est.p_low < 0.05;
    rows.push(hole);

    if level == Level::Full {
        for r in [0.5, 0.7] {
            let est = estimate_hole_direct(&model, r, 100_000, seed, 0.99, &opts)?;
            let oracle = determinantal_oracle(r)?;
            let mid = 0.5 * (est.p_low + est.p_high);
            let mut hole = row(&format!("hole probability L=1 r={r}"), Source::Oracle, mid, oracle, 0.5 * (est.p_high - est.p_low));
            hole.pass &= (est.inconclusive as f64) < 1e-3 * est.trials as f64;
            rows.push(hole);
        }
        let n = 100_000u64;
        let sigma: f64 = 0.6;
        let hits = (0..n).filter(|&i| gaussian_coupling_sample(sigma, seed, i).is_ok_and(|d| d.1)).count();
        let s2 = sigma * sigma;
        let se = (s2 * (1.0 - s2) / n as f64).sqrt();
        rows.push(row("coupling event rate", Source::MonteCarlo, hits as f64 / n as f64, s2, 3.0 * se));
    }

    let margin = lemma17_margin(&[0.5, 1.0, 2.0], &[0.01, 0.1, 0.5], 0.4, 10.0)?;
    let pass = if margin.pass { 1.0 } else { 0.0 };
    rows.push(row("small-ball margin grid", Source::Asymptotic, pass, 1.0, 0.0));
    Ok(rows)
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<34} {:<12} {:>14} {:>14} {:>11}  result", "check", "source", "measured", "expected", "tolerance").unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<34} {:<12} {:>14.6e} {:>14.6e} {:>11.2e}  {}",
            r.check,
            r.source.as_str(),
            r.measured,
            r.expected,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    out
}
