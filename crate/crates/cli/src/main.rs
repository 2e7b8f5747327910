use clap::{Args, Parser, Subcommand};
use gafhole::GaussianSource;
use gafhole_cli::config::{load_config, ExperimentConfig};
use gafhole_cli::run::{run_experiment, RunError};
use gafhole_cli::verify::{format_table, verify_suite, Level};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "gafhole", version, about = "Hole probabilities of Gaussian analytic functions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.L=2` or `--set r=[0.5,0.7]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Coefficients, variances and truncation data per radius.
    Coeffs(Common),
    /// Circulant spectra and the splitting construction.
    Spectrum(Common),
    /// Monte Carlo hole probability estimates.
    Estimate(Common),
    /// Numerical checks of the auxiliary inequalities.
    OracleVerify(Common),
    /// Analytic bound envelopes.
    Envelope(Common),
    /// Join stored estimates with the analytic envelopes.
    Report(Common),
    /// Print the default configuration as TOML.
    Defaults,
    /// Built-in self-check table.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: Level,
        /// Replace the Gaussian generator with zeros; the sampler checks must fail.
        #[arg(long)]
        crippled_rng: bool,
        #[arg(long, default_value_t = gafhole_cli::config::DEFAULT_SEED)]
        seed: u64,
    },
}

fn experiment(command: &str, c: Common) -> ExitCode {
    let mut overrides = vec![format!("command=\"{command}\"")];
    if let Some(out) = &c.out {
        overrides.push(format!("out_dir={:?}", out.display().to_string()));
    }
    if let Some(t) = c.threads {
        overrides.push(format!("threads={t}"));
    }
    overrides.extend(c.set);
    let cfg: ExperimentConfig = match load_config(c.config.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&cfg) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", cfg.out_dir.join(f).display());
            }
            if summary.all_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", summary.failures.join(", "));
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Cmd::Coeffs(c) => experiment("coeffs", c),
        Cmd::Spectrum(c) => experiment("spectrum", c),
        Cmd::Estimate(c) => experiment("estimate", c),
        Cmd::OracleVerify(c) => experiment("oracle-verify", c),
        Cmd::Envelope(c) => experiment("envelope", c),
        Cmd::Report(c) => experiment("report", c),
        Cmd::Defaults => {
            print!("{}", ExperimentConfig::default().to_toml());
            ExitCode::SUCCESS
        }
        Cmd::Verify { level, crippled_rng, seed } => {
            let source = if crippled_rng { GaussianSource::Zero } else { GaussianSource::BoxMuller };
            match verify_suite(level, source, seed) {
                Ok(rows) => {
                    print!("{}", format_table(&rows));
                    if rows.iter().all(|r| r.pass) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURE)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
    }
}
