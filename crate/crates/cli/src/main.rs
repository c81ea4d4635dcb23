//! `qic`: run model-selection experiments and validations from a JSON config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use qic_core::harness::{
    fit_records, read_fit_records, read_outcomes_file, recompute_criteria, selfcheck, validate_bias,
    validate_consistency, validate_normality, write_json, OutputFiles,
};
use qic_core::povm::{write_outcomes_csv, MeasurementOutcome};
use qic_core::{run_experiment, run_trial, ExperimentConfig, ExperimentContext};

#[derive(Parser)]
#[command(name = "qic", version, about = "Information criteria for parametric quantum state models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial and write summary.json, trials.csv, histogram.csv, fits.json and outcomes.csv.
    Experiment(ConfigArgs),
    /// Run a single trial and print its record as JSON.
    Trial {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        index: usize,
    },
    /// Monte-Carlo check of the shadow-likelihood bias formula.
    ValidateBias(ConfigArgs),
    /// Monte-Carlo check of the asymptotic covariance of both estimators.
    ValidateNormality(ConfigArgs),
    /// Median relative entropy of the fits as the sample size grows.
    ValidateConsistency(ConfigArgs),
    /// Recompute criteria from persisted fits and shot records.
    Criteria {
        /// fits.json written by `experiment` or `trial --out`.
        #[arg(long)]
        fit: PathBuf,
        /// outcomes.csv holding the shots behind those fits.
        #[arg(long)]
        outcomes: PathBuf,
        /// Config supplying the candidate models, criteria and true state.
        #[arg(long)]
        config: PathBuf,
        /// Write criteria.json here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical invariant suite.
    Selfcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(n) = self.shots {
            cfg.n_shots = n;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate().context("after command-line overrides")?;
        Ok(cfg)
    }
}

/// Prints `value` as JSON, or writes it to `dir/name` when `dir` is given.
fn emit<T: Serialize>(value: &T, dir: Option<&Path>, name: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            let path = d.join(name);
            write_json(&path, value)?;
            println!("wrote {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn experiment(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let dir = cfg.output_dir.clone();
    let out = run_experiment(cfg)?;
    let files = out.write(&dir)?;
    let s = &out.summary;
    println!("{} trials, {} failed, {:.1} s", s.trials, s.failed_trials, s.runtime_seconds);
    for t in &s.tallies {
        let counts: Vec<String> = t.counts.iter().map(|(m, c)| format!("{m} {c}")).collect();
        println!("  {:<16} {}", t.criterion, counts.join("  "));
    }
    println!("wrote {}", files.summary.parent().unwrap_or(Path::new(".")).display());
    Ok(())
}

fn trial(args: &ConfigArgs, index: usize) -> Result<()> {
    let cfg = args.load()?;
    if index >= cfg.trials {
        bail!("--index {index} is out of range for {} trials", cfg.trials);
    }
    let ctx = ExperimentContext::new(cfg)?;
    let record = run_trial(&ctx, index);
    if let Some(dir) = &args.out {
        let files = OutputFiles::in_dir(dir);
        fs::create_dir_all(dir)?;
        write_json(&files.fits, &fit_records(std::slice::from_ref(&record)))?;
        let q = ctx.config.qubits;
        let shots: Vec<MeasurementOutcome> =
            ctx.trial_outcomes(index).into_iter().map(|i| MeasurementOutcome::from_index(i, q)).collect();
        write_outcomes_csv(fs::File::create(&files.outcomes)?, index, &shots)?;
    }
    emit(&record, args.out.as_deref(), &format!("trial_{index}.json"))
}

fn criteria(fit: &Path, outcomes: &Path, config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let ctx = ExperimentContext::new(cfg)?;
    let fits = read_fit_records(fit).with_context(|| format!("reading {}", fit.display()))?;
    let shots = read_outcomes_file(outcomes).with_context(|| format!("reading {}", outcomes.display()))?;
    let c = &ctx.config;
    let rescored = recompute_criteria(&ctx.candidates, Some(&ctx.rho), &c.criteria, c.rcond, &fits, &shots)?;
    info!("rescored {} trials", rescored.len());
    emit(&rescored, out, "criteria.json")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment(a) => experiment(&a),
        Command::Trial { config, index } => trial(&config, index),
        Command::ValidateBias(a) => {
            let cfg = a.load()?;
            emit(&validate_bias(&cfg)?, a.out.as_deref(), "bias.json")
        }
        Command::ValidateNormality(a) => {
            let cfg = a.load()?;
            emit(&validate_normality(&cfg)?, a.out.as_deref(), "normality.json")
        }
        Command::ValidateConsistency(a) => {
            let cfg = a.load()?;
            emit(&validate_consistency(&cfg)?, a.out.as_deref(), "consistency.json")
        }
        Command::Criteria { fit, outcomes, config, out } => criteria(&fit, &outcomes, &config, out.as_deref()),
        Command::Selfcheck { seed } => {
            let report = selfcheck(seed)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed() {
                bail!("selfcheck failed");
            }
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
