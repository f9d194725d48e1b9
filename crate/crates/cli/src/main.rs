//! `skewlab` experiment runner.
//!
//! Exit codes: 0 success, 2 scientific postcondition failure, 1 usage error.

mod config;
mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;
use scenarios::Report;

#[derive(Parser)]
#[command(name = "skewlab", version, about = "Accessibility experiments for skew products over the cat map")]
struct Cli {
    /// JSON experiment config; defaults are used for absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    scenario: Scenario,
}

#[derive(Subcommand, Clone, Copy)]
enum Scenario {
    /// Domination / bunching estimates for the configured skew product.
    Certify,
    /// One stable or unstable holonomy, checked against equivariance.
    Holonomy,
    /// Explore and classify center accessibility classes of random seeds.
    Classify,
    /// Perturb to destroy the trivial class over the quad base point.
    Destroy,
    /// Birkhoff-average spread across initial conditions.
    Ergodic,
    /// Translation-pair search on random monotone triples.
    Pbb,
    /// Certify + classify along a one-parameter family.
    Sweep,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Certify => "certify",
            Scenario::Holonomy => "holonomy",
            Scenario::Classify => "classify",
            Scenario::Destroy => "destroy",
            Scenario::Ergodic => "ergodic",
            Scenario::Pbb => "pbb",
            Scenario::Sweep => "sweep",
        }
    }

    fn run(self, cfg: &ExperimentConfig) -> Result<Report> {
        match self {
            Scenario::Certify => scenarios::certify(cfg),
            Scenario::Holonomy => scenarios::holonomy_scenario(cfg),
            Scenario::Classify => scenarios::classify(cfg),
            Scenario::Destroy => scenarios::destroy(cfg),
            Scenario::Ergodic => scenarios::ergodic(cfg),
            Scenario::Pbb => scenarios::pbb(cfg),
            Scenario::Sweep => scenarios::sweep(cfg),
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Science(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

/// Library errors that report a failed numerical claim rather than bad input.
fn is_scientific(e: &anyhow::Error) -> bool {
    use skewlab::Error::*;
    matches!(
        e.downcast_ref::<skewlab::Error>(),
        Some(
            NoConvergence { .. }
                | RegularValueFailure(_)
                | PostconditionFailure(_)
                | SearchExhausted(_)
                | ShadowFailure(_)
                | ConstructionFailed(_)
                | NotFound(_)
        )
    )
}

fn write_report(dir: &Path, scenario: &str, cfg: &ExperimentConfig, report: &Report, seconds: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for t in &report.tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    let summary = json!({
        "scenario": scenario,
        "status": if report.failure.is_some() { "postcondition_failed" } else { "ok" },
        "failure": report.failure,
        "config": cfg,
        "result": report.summary,
        "tables": report.tables.iter().map(|t| format!("{}.csv", t.name)).collect::<Vec<_>>(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    // kept apart so the other files are bitwise reproducible
    fs::write(
        dir.join("timing.json"),
        serde_json::to_string_pretty(&json!({ "scenario": scenario, "wall_time_seconds": seconds }))? + "\n",
    )?;
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    cfg.validate().context("invalid config")?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("--threads must be positive")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building thread pool")?;
    }
    let start = Instant::now();
    let report = match cli.scenario.run(&cfg) {
        Ok(r) => r,
        Err(e) if is_scientific(&e) => return Err(Failure::Science(format!("{e:#}"))),
        Err(e) => return Err(Failure::Usage(e)),
    };
    write_report(&cfg.out, cli.scenario.name(), &cfg, &report, start.elapsed().as_secs_f64())?;
    println!("{}: {}", cli.scenario.name(), report.failure.as_deref().unwrap_or("ok"));
    match report.failure {
        Some(msg) => Err(Failure::Science(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Science(msg)) => {
            eprintln!("postcondition failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
