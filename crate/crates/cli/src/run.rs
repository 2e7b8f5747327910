//! Dispatch of configured experiments and the files they write.

use crate::config::{Command, ConfigError, ExperimentConfig};
use gafhole::envelopes::{
    chebyshev_certificate, general_band_l_less_1, theorem1_envelope, theorem81_band, BoundEnvelope, ChebyshevParams,
};
use gafhole::gaf::{sample, sample_to_line, tail_high_prob_bound, truncation_degree};
use gafhole::holes::{
    default_threshold, log_determinantal_oracle, estimate_hole_direct, estimate_hole_lower_threshold, estimates_to_csv,
    parse_estimate_line, tilted_lower_estimator, EstimateMode, EstimateOptions, HoleEstimate, ThresholdParams,
};
use gafhole::oracles::{
    lemma15_report, lemma16_5_report, lemma16_moment_report, lemma17_margin, lemma18_check, lemma6_report,
    lemma6_test_polys, LemmaCheckReport,
};
use gafhole::spectra::{circulant_eigenvalues, sigma_g1_gap, split_coefficients};
use gafhole::CoefficientModel;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const VERSION_TAG: &str = concat!("gafhole-", env!("CARGO_PKG_VERSION"));
/// Per-run timing and timestamp; excluded from the determinism contract.
pub const SIDECAR: &str = "run_meta.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("compute budget exceeded: {requested:e} coefficient-trials requested, cap {cap:e}")]
    ComputeBudgetExceeded { requested: f64, cap: f64 },
    #[error(transparent)]
    Compute(gafhole::Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl From<gafhole::Error> for RunError {
    fn from(e: gafhole::Error) -> Self {
        match e {
            gafhole::Error::BudgetExceeded { requested, cap } => RunError::ComputeBudgetExceeded { requested, cap },
            other => RunError::Compute(other),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    /// Data files written, relative to the output directory, in write order.
    pub files: Vec<PathBuf>,
    /// False when a verification report failed.
    pub all_passed: bool,
    pub failures: Vec<String>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("configs always serialize");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

#[derive(Serialize)]
struct Provenance<'a> {
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    stream_start: u64,
    stream_end: u64,
    config: &'a ExperimentConfig,
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    dir: PathBuf,
    summary: RunSummary,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, RunError> {
        let dir = cfg.out_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Writer { cfg, hash: config_hash(cfg), dir, summary: RunSummary { all_passed: true, ..Default::default() } })
    }

    fn provenance(&self, streams: (u64, u64)) -> Provenance<'_> {
        Provenance {
            version: VERSION_TAG,
            config_hash: &self.hash,
            seed: self.cfg.seed,
            stream_start: streams.0,
            stream_end: streams.1,
            config: self.cfg,
        }
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, records: &[(T, (u64, u64))]) -> Result<(), RunError> {
        let mut out = String::new();
        for (rec, streams) in records {
            let line = json!({ "provenance": self.provenance(*streams), "record": rec });
            out.push_str(&serde_json::to_string(&line).expect("records serialize"));
            out.push('\n');
        }
        self.write(name, &out)
    }

    /// Append `seed,stream_start,stream_end,config_hash` to every CSV row.
    fn csv(&mut self, name: &str, body: &str, streams: (u64, u64)) -> Result<(), RunError> {
        let mut out = String::new();
        for (i, line) in body.lines().enumerate() {
            if i == 0 {
                writeln!(out, "{line},seed,stream_start,stream_end,config_hash").unwrap();
            } else {
                writeln!(out, "{line},{},{},{},{}", self.cfg.seed, streams.0, streams.1, self.hash).unwrap();
            }
        }
        self.write(name, &out)
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|e| io_err(&path, e))?;
        self.summary.files.push(PathBuf::from(name));
        Ok(())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io { path: path.to_path_buf(), message: e.to_string() }
}

pub fn estimate_options(cfg: &ExperimentConfig) -> EstimateOptions {
    let c = &cfg.constants;
    EstimateOptions {
        tau_rel: c.tau_rel,
        fail_exp: c.fail_exp,
        k_init: c.k_init,
        k_cap: c.k_cap,
        compute_cap: c.compute_cap,
        ..EstimateOptions::default()
    }
}

pub fn threshold_params(cfg: &ExperimentConfig) -> ThresholdParams {
    let c = &cfg.constants;
    ThresholdParams { epsilon: c.epsilon, b: c.b, alpha: c.alpha }
}

/// Run the configured command inside a pool of `cfg.threads` workers and write
/// its outputs plus the timing sidecar.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Io { path: PathBuf::from("<thread pool>"), message: e.to_string() })?;
    let threads = pool.current_num_threads();
    let summary = pool.install(|| -> Result<RunSummary, RunError> {
        let mut w = Writer::new(cfg)?;
        let model = cfg.coefficient_model()?;
        match cfg.command {
            Command::Coeffs => run_coeffs(&mut w, &model)?,
            Command::Spectrum => run_spectrum(&mut w, &model)?,
            Command::Estimate => run_estimate(&mut w, &model)?,
            Command::OracleVerify => run_oracle_verify(&mut w, &model)?,
            Command::Envelope => run_envelope(&mut w, &model)?,
            Command::Report => run_report(&mut w)?,
        }
        Ok(w.summary)
    })?;
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let meta = json!({
        "timestamp_unix": unix,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "threads": threads,
        "version": VERSION_TAG,
        "config_hash": config_hash(cfg),
        "files": summary.files,
    });
    let path = cfg.out_dir.join(SIDECAR);
    std::fs::write(&path, serde_json::to_string_pretty(&meta).expect("meta serializes")).map_err(|e| io_err(&path, e))?;
    Ok(summary)
}

#[derive(Serialize)]
struct CoeffRecord {
    r: f64,
    #[serde(rename = "N_t")]
    n_t: usize,
    sigma_sq: f64,
    s_planar: f64,
    tail_bound: f64,
    log_fail_prob: f64,
}

fn run_coeffs(w: &mut Writer, model: &CoefficientModel) -> Result<(), RunError> {
    let cfg = w.cfg;
    let mut records = Vec::new();
    for &r in &cfg.r {
        let n_t = truncation_degree(model, r, cfg.constants.tau_rel)?;
        let tail = tail_high_prob_bound(model, n_t, r, cfg.constants.fail_exp)?;
        let rec = CoeffRecord {
            r,
            n_t,
            sigma_sq: model.sigma_sq(r)?,
            s_planar: model.s_planar(r)?,
            tail_bound: tail.bound,
            log_fail_prob: tail.log_fail_prob,
        };
        records.push((rec, (0, 0)));
    }
    w.jsonl("coeffs.jsonl", &records)?;
    let mut csv = String::from("n,a_n\n");
    for (n, a) in model.coefficients_to(cfg.degree).iter().enumerate() {
        writeln!(csv, "{n},{a:e}").unwrap();
    }
    w.csv("coeffs.csv", &csv, (0, 0))?;
    if cfg.samples > 0 {
        let r = cfg.r[0];
        let n_t = truncation_degree(model, r, cfg.constants.tau_rel)?;
        let mut out = String::new();
        for t in 0..cfg.samples {
            out.push_str(&sample_to_line(&sample(model, cfg.seed, t, n_t)));
            out.push('\n');
        }
        w.write("samples.jsonl", &out)?;
    }
    Ok(())
}

fn run_spectrum(w: &mut Writer, model: &CoefficientModel) -> Result<(), RunError> {
    let cfg = w.cfg;
    let mut records = Vec::new();
    let mut csv = String::from("r,N,m,lambda_m,cumulative_log_det\n");
    for &r in &cfg.r {
        for &n in &cfg.n {
            let spec = circulant_eigenvalues(model, r, n)?;
            for line in spec.to_csv().lines().skip(1) {
                writeln!(csv, "{r},{n},{line}").unwrap();
            }
            let split = if model.is_non_increasing() {
                let s = split_coefficients(model, r, n)?;
                let gap = sigma_g1_gap(model, r, n)?;
                Some(json!({ "sigma_g1_sq": s.sigma_g1_sq, "gap": gap.gap, "comparison": gap.comparison }))
            } else {
                None
            };
            records.push((json!({ "spectrum": spec, "lambda_min": spec.lambda_min(), "split": split }), (0, 0)));
        }
    }
    w.jsonl("spectrum.jsonl", &records)?;
    w.csv("spectrum.csv", &csv, (0, 0))
}

/// One estimate for `(model, r)` under the configured mode.
pub fn estimate_one(cfg: &ExperimentConfig, model: &CoefficientModel, r: f64) -> Result<HoleEstimate, RunError> {
    let opts = estimate_options(cfg);
    let c = &cfg.constants;
    Ok(match cfg.mode {
        EstimateMode::Direct => estimate_hole_direct(model, r, cfg.trials, cfg.seed, cfg.confidence, &opts)?,
        EstimateMode::ThresholdLower => {
            let m = match c.m {
                Some(m) => m,
                None => {
                    let l = model.intensity().ok_or_else(|| {
                        ConfigError::Invalid { key: "constants.M".into(), message: "model has no L; set M explicitly".into() }
                    })?;
                    default_threshold(l, r, &threshold_params(cfg))?
                }
            };
            estimate_hole_lower_threshold(model, r, m, cfg.trials, cfg.seed, cfg.confidence, &opts)?
        }
        EstimateMode::TiltedLower => {
            tilted_lower_estimator(model, r, c.alpha, c.alpha1, cfg.trials, cfg.seed, cfg.confidence, &opts)?
        }
    })
}

fn run_estimate(w: &mut Writer, model: &CoefficientModel) -> Result<(), RunError> {
    let cfg = w.cfg;
    let mut estimates = Vec::new();
    for &r in &cfg.r {
        estimates.push(estimate_one(cfg, model, r)?);
    }
    let streams = (0, cfg.trials);
    let records: Vec<_> = estimates.iter().map(|e| (e, streams)).collect();
    w.jsonl("estimates.jsonl", &records)?;
    w.csv("estimates.csv", &estimates_to_csv(&estimates), streams)
}

/// The lemma reports produced by `oracle-verify`, in output order.
pub fn oracle_reports(cfg: &ExperimentConfig, model: &CoefficientModel) -> Result<Vec<LemmaCheckReport>, RunError> {
    let c = &cfg.constants;
    let mut reports = vec![
        lemma16_5_report(&[0.1, 0.5, 1.0, 2.0, 3.0])?,
        lemma17_margin(&[0.1, 0.5, 1.0, 2.0, 4.0], &[0.0, 0.01, 0.1, 0.25, 0.5], c.lemma17_c, c.lemma17_c_large)?,
    ];
    let ws: Vec<Complex64> = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 0.0), (5.0, 0.0)]
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    reports.push(lemma15_report(&[0.1, 0.25, 0.5, 1.0], &[0.5, 1.0, 2.0], &ws, c.lemma15_c)?);
    reports.push(lemma6_report(&lemma6_test_polys(100, 12, cfg.seed), &[4, 8, 16], c.lemma6_c)?);
    let r = cfg.r.first().copied().unwrap_or(0.5);
    let n = cfg.n.iter().copied().find(|n| (1..=8).contains(n)).unwrap_or(4);
    reports.push(lemma18_check(model, r, n, 0.5, cfg.trials.max(2), cfg.seed)?);
    reports.push(lemma16_moment_report(&[0.5, 1.0, 2.0], 6, cfg.trials, cfg.seed)?);
    Ok(reports)
}

fn run_oracle_verify(w: &mut Writer, model: &CoefficientModel) -> Result<(), RunError> {
    let reports = oracle_reports(w.cfg, model)?;
    for r in &reports {
        if !r.pass {
            w.summary.all_passed = false;
            w.summary.failures.push(r.lemma_id.clone());
        }
    }
    let trials = w.cfg.trials;
    let records: Vec<_> = reports.iter().map(|r| (r, (0, trials))).collect();
    w.jsonl("lemma_reports.jsonl", &records)
}

fn run_envelope(w: &mut Writer, model: &CoefficientModel) -> Result<(), RunError> {
    let cfg = w.cfg;
    let c = &cfg.constants;
    let mut rows: Vec<(&'static str, BoundEnvelope)> = Vec::new();
    let mut records = Vec::new();
    for &r in &cfg.r {
        if let Some(l) = model.intensity() {
            rows.push(("theorem1", theorem1_envelope(l, r)?));
            if l <= 1.0 && model.is_non_increasing() {
                rows.push(("general_band", general_band_l_less_1(model, r)?));
            }
            if cfg.chebyshev && l > 1.0 {
                let params = ChebyshevParams { a: c.chebyshev_a, kappa: c.chebyshev_kappa };
                // Radii far from 1 give an empty block; record them as skipped.
                let rec = match chebyshev_certificate(l, r, &params) {
                    Ok(cert) => json!({ "curve": "chebyshev", "certificate": cert }),
                    Err(e) => json!({ "curve": "chebyshev", "r": r, "skipped": e.to_string() }),
                };
                records.push((rec, (0, 0)));
            }
        }
        if r >= 0.5 {
            rows.push(("theorem81_band", theorem81_band(r, c.theorem81_c, c.theorem81_c_large)?));
        }
    }
    let mut csv = String::from("curve,L,r,regime,lower,upper\n");
    for (curve, e) in &rows {
        writeln!(csv, "{curve},{},{},{},{:e},{:e}", e.l, e.r, e.regime.as_str(), e.lower, e.upper).unwrap();
        records.push((json!({ "curve": curve, "envelope": e }), (0, 0)));
    }
    w.jsonl("envelopes.jsonl", &records)?;
    w.csv("envelopes.csv", &csv, (0, 0))
}

/// Parse an `estimates.jsonl` file written by the estimate command.
pub fn read_estimates(path: &Path) -> Result<Vec<HoleEstimate>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| RunError::Io { path: path.to_path_buf(), message: format!("line {}: {e}", i + 1) })?;
        let record = value.get("record").cloned().unwrap_or(value);
        let est = parse_estimate_line(&record.to_string())
            .map_err(|e| RunError::Io { path: path.to_path_buf(), message: format!("line {}: {e}", i + 1) })?;
        out.push(est);
    }
    Ok(out)
}

fn run_report(w: &mut Writer) -> Result<(), RunError> {
    let cfg = w.cfg;
    let dir = cfg.results_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let mut estimates = read_estimates(&dir.join("estimates.jsonl"))?;
    estimates.sort_by(|a, b| {
        let la = a.model.intensity().unwrap_or(f64::NAN);
        let lb = b.model.intensity().unwrap_or(f64::NAN);
        la.total_cmp(&lb).then(a.r.total_cmp(&b.r)).then(a.mode.cmp(&b.mode))
    });
    let mut csv = String::from(
        "L,r,mode,p_low,p_high,neg_log_p_low,neg_log_p_high,envelope_lower,envelope_upper,oracle_neg_log\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for e in &estimates {
        let l = e.model.intensity();
        let env = l.map(|l| theorem1_envelope(l, e.r)).transpose()?;
        let oracle = (l == Some(1.0)).then(|| log_determinantal_oracle(e.r)).transpose()?.map(|v| -v);
        let neg_high = (e.p_high > 0.0).then(|| 0.0 - e.p_high.ln());
        writeln!(
            csv,
            "{},{},{},{:e},{:e},{},{},{},{},{}",
            opt(l),
            e.r,
            e.mode.as_str(),
            e.p_low,
            e.p_high,
            opt(e.log_p_low.map(|v| -v)),
            opt(neg_high),
            opt(env.as_ref().map(|v| v.lower)),
            opt(env.as_ref().map(|v| v.upper)),
            opt(oracle)
        )
        .unwrap();
    }
    w.csv("report.csv", &csv, (0, 0))
}
