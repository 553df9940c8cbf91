//! `visverify`: batch driver for extraction, verification, preference pair
//! construction and evaluation.
//!
//! Exit codes: 0 success, 2 usage, configuration or input error, 3 expert
//! backend failure.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use visverify_core::pipeline::{
    run_build_pref, run_dpo_check, run_eval_chair, run_extract, run_verify, PipelineError, Workers,
};

use config::{ConfigError, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "visverify", version, about = "Fine-grained verification of image description responses")]
struct Cli {
    /// Pipeline config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reserved; every backend is deterministic so this changes nothing.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Io {
    /// Input JSONL (stdin when omitted).
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose responses into check-worthy parts.
    Extract(Io),
    /// Verify extracted parts against the experts.
    Verify(Io),
    /// Build preference pairs from assessments grouped by image.
    BuildPref(Io),
    /// CHAIR metrics over extracted existence parts or explicit mentions.
    EvalChair {
        #[command(flatten)]
        io: Io,
        /// Annotation directory, overriding the config.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Loss statistics over precomputed log-probabilities.
    DpoCheck(Io),
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Backend(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_backend_failure() {
            Failure::Backend(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>, Failure> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => File::open(p)
            .map(|f| Box::new(BufReader::new(f)) as Box<dyn BufRead>)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
    }
}

/// Summaries go to stderr so stdout stays a clean data stream.
fn report<T: Serialize>(summary: &T) {
    eprintln!("{}", serde_json::to_string(summary).expect("summary serializes"));
}

fn write_json<T: Serialize>(io: &Io, value: &T) -> Result<(), Failure> {
    let mut out = open_output(io.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Usage(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let threads = match cli.workers {
        Some(0) => return Err(Failure::Usage("--workers must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let workers = Workers::new(threads);
    log::debug!("workers={threads} seed={}", cli.seed);

    match cli.command {
        Command::Extract(io) => {
            let generator = cfg.generator()?;
            let input = open_input(io.input.as_deref())?;
            let output = open_output(io.output.as_deref())?;
            report(&run_extract(input, output, generator.as_ref(), workers)?);
        }
        Command::Verify(io) => {
            let experts = cfg.experts()?;
            let weights = cfg.weights()?;
            let input = open_input(io.input.as_deref())?;
            let output = open_output(io.output.as_deref())?;
            let summary = run_verify(input, output, &experts, &cfg.experts, &weights, workers)?;
            if summary.missing_annotation_images > 0 {
                log::warn!(
                    "{} image(s) without annotations skipped",
                    summary.missing_annotation_images
                );
            }
            report(&summary);
        }
        Command::BuildPref(io) => {
            let input = open_input(io.input.as_deref())?;
            let output = open_output(io.output.as_deref())?;
            report(&run_build_pref(input, output, &cfg.pair_options())?);
        }
        Command::EvalChair { io, annotations } => {
            let mut cfg = cfg;
            if annotations.is_some() {
                cfg.annotations_dir = annotations;
            }
            let store = cfg.annotations()?;
            let report = run_eval_chair(open_input(io.input.as_deref())?, &store)?;
            write_json(&io, &report)?;
        }
        Command::DpoCheck(io) => {
            let stats = run_dpo_check(open_input(io.input.as_deref())?, cfg.beta)?;
            write_json(&io, &stats)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Backend(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
