use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kpzlab_cli::config::{validate, Experiment, ExperimentConfig};
use kpzlab_cli::run::{default_out_dir, run_to_dir};

#[derive(Parser)]
#[command(name = "kpzlab", version, about = "Directed landscape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Landscape profiles, one-point laws or Bessel initial data.
    SampleLandscape(Common),
    /// Distributional symmetries of the landscape.
    SymmetrySuite(Common),
    /// Tracy-Widom GUE table by two determinant routes.
    TwTable(Common),
    /// Law of the maximum of the fixed point from wedge data.
    MaxCdf(Common),
    /// Bessel-3 minimum law, near-minimum bounds and tail growth.
    BesselSuite(Common),
    /// Near ties of wedge maxima.
    Exceptional(Common),
    /// Box-counting dimension checks.
    DimEstimate(Common),
    /// Collect manifests of earlier runs.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "KPZLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "KPZLAB_THREADS", default_value_t = 0)]
    threads: usize,
    /// Output directory, overriding `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Validate the configuration and exit.
    #[arg(long)]
    validate_only: bool,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::SampleLandscape(c) => (Experiment::SampleLandscape, c),
            Command::SymmetrySuite(c) => (Experiment::SymmetrySuite, c),
            Command::TwTable(c) => (Experiment::TwTable, c),
            Command::MaxCdf(c) => (Experiment::MaxCdf, c),
            Command::BesselSuite(c) => (Experiment::BesselSuite, c),
            Command::Exceptional(c) => (Experiment::Exceptional, c),
            Command::DimEstimate(c) => (Experiment::DimEstimate, c),
            Command::Report(c) => (Experiment::Report, c),
        }
    }
}

fn config(experiment: Experiment, args: &Common) -> Result<ExperimentConfig> {
    let mut text = match &args.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    for s in &args.set {
        text.push_str(s);
        text.push('\n');
    }
    let mut cfg = ExperimentConfig::parse(experiment, &text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    match execute(experiment, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(experiment: Experiment, args: &Common) -> Result<bool> {
    let cfg = config(experiment, args)?;
    if args.print_config {
        print!("{}", cfg.to_text());
        return Ok(true);
    }
    if args.validate_only {
        let diags = validate(&cfg);
        for d in &diags {
            eprintln!("{}: {}", d.key, d.message);
        }
        return Ok(diags.is_empty());
    }
    let dir = match (&args.out, cfg.out.as_str()) {
        (Some(p), _) => p.clone(),
        (None, "") => default_out_dir(&cfg),
        (None, p) => PathBuf::from(p),
    };
    let outcome = run_to_dir(&cfg, args.threads, &dir)?;
    for line in outcome.report_lines() {
        println!("{line}");
    }
    println!("artifacts in {}", dir.display());
    Ok(outcome.passed())
}
