use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use pulse2d::analysis::{compare_spectra, line_cut, CutSpec};
use pulse2d::config::parse_config;
use pulse2d::experiment::run_experiment;
use pulse2d::spectrum::Spectrum2D;
use pulse2d::Error;

#[derive(Parser)]
#[command(name = "pulse2d", version, about = "Simulate and analyse 2D electronic spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Intensity along a line of one or more spectra sharing axes.
    Cut {
        /// `diagonal` or `horizontal:<eV>`.
        cut: String,
        #[arg(required = true)]
        spectra: Vec<PathBuf>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative L2 distance and peak displacements of two spectra.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<serde_json::Value, Error> {
    serde_json::to_value(v).map_err(|e| Error::Format(e.to_string()))
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, seed, workers, out } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = parse_config(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let manifest = run_experiment(&cfg)?;
            emit(
                &json!({
                    "status": "ok",
                    "manifest": cfg.output.join("manifest.json"),
                    "spectra": manifest.entries.len(),
                    "cut_reports": manifest.cut_reports.len(),
                    "seconds": manifest.timing.total_seconds,
                }),
                None,
            )
        }
        Command::Cut { cut, spectra, out } => {
            let spec: CutSpec = cut.parse()?;
            let loaded = spectra.iter().map(|p| Spectrum2D::read(p)).collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&Spectrum2D> = loaded.iter().collect();
            emit(&to_json(&line_cut(&refs, spec)?)?, out.as_deref())
        }
        Command::Compare { a, b, out } => {
            let c = compare_spectra(&Spectrum2D::read(&a)?, &Spectrum2D::read(&b)?)?;
            emit(&to_json(&c)?, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "status": "error", "kind": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
