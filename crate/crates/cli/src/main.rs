use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use grem_core::experiment::{run, ExperimentConfig, Format, RunManifest};
use grem_core::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Runs one experiment from a TOML or JSON config and writes data files plus a manifest.
#[derive(Debug, Parser)]
#[command(name = "grem", version)]
struct Args {
    /// Experiment configuration (.toml or .json).
    #[arg(
        long,
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    config: Option<PathBuf>,
    /// Replay the configuration recorded in a previous manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Event budget per trajectory.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn load(args: &Args) -> grem_core::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.manifest) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(path)) => RunManifest::load(path)?.config,
        (None, None) => {
            return Err(Error::Config(
                "either --config or --manifest is required".into(),
            ))
        }
    };
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(b) = args.budget {
        cfg.budget = b;
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let manifest = match load(&args).and_then(|cfg| run(&cfg)) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match serde_json::to_string_pretty(&manifest.summary) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("warning: {e}"),
    }
    if manifest.incomplete {
        eprintln!("event budget exhausted; results are partial");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
