//! Argument parsing, exit codes and shared command helpers.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or precondition
//! failure. `RSC_THREADS` caps the worker threads of parallel steps.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rsc_core::imaging::MotionKind;
use rsc_core::{Image, MotionModel};

use crate::commands::{correct, demo, eval, synth};
use crate::io::pfm;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const THREADS_ENV: &str = "RSC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or inputs.
    #[error("{0}")]
    Usage(String),
    /// Failure while computing or writing results.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<rsc_core::Error> for CliError {
    fn from(e: rsc_core::Error) -> Self {
        if e.is_precondition() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

/// Parsed flags of one run.
#[derive(Debug, Parser)]
#[command(
    name = "rsc",
    version,
    about = "Dual reversed rolling-shutter simulation and correction"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dual RS pair from a moving base image or a GS frame stack.
    Synth(synth::SynthArgs),
    /// Fit a motion model to a dual RS pair and write GS frames.
    Correct(correct::CorrectArgs),
    /// Compare predicted GS frames with ground truth (PSNR, SSIM).
    Eval(eval::EvalArgs),
    /// Render the single-direction RS ambiguity: a tilted and a vertical rod
    /// that look the same.
    DemoAmbiguity(demo::DemoArgs),
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr as one line.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> u8 {
    let args: Vec<OsString> = args.into_iter().collect();
    let cfg = match RunConfig::try_parse_from(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("rsc: {}", line.trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    let echoed: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match run(cfg, &echoed) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rsc: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Runs a parsed command. `echoed` is written to `run.args` in output
/// directories.
pub fn run(cfg: RunConfig, echoed: &[String]) -> Result<u8, CliError> {
    let args = run_args(echoed);
    match cfg.command {
        Command::Synth(a) => synth::run(&a, &args),
        Command::Correct(a) => correct::run(&a, &args),
        Command::Eval(a) => eval::run(&a, &args),
        Command::DemoAmbiguity(a) => demo::run(&a, &args),
    }
}

fn run_args(echoed: &[String]) -> String {
    echoed.iter().map(|a| format!("{a}\n")).collect()
}

/// Worker threads requested through `RSC_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(e) => Err(CliError::Usage(format!("{THREADS_ENV}: {e}"))),
    }
}

pub(crate) fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))
}

pub(crate) fn read_image(path: &Path) -> Result<Image, CliError> {
    pfm::read(path).map_err(|e| CliError::Usage(e.to_string()))
}

/// `.pfm` files directly inside `dir`, sorted by name.
pub(crate) fn list_pfm(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?
            .path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("pfm"))
        {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Motion from `vx,vy` (translation) or six affine coefficients.
pub(crate) fn motion_from_values(values: &[f64]) -> Result<MotionModel, CliError> {
    let kind = match values.len() {
        2 => MotionKind::Translation,
        6 => MotionKind::Affine,
        n => {
            return Err(CliError::Usage(format!(
                "motion takes 2 values (vx,vy) or 6 affine coefficients, got {n}"
            )))
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("motion values must be finite".into()));
    }
    Ok(MotionModel::from_params(kind, values)?)
}

/// Zero-padded name for the GS frame at 1-based row `row` of `rows`.
pub fn frame_name(row: usize, rows: usize, ext: &str) -> String {
    let width = rows.to_string().len().max(4);
    format!("gs_{row:0width$}.{ext}")
}
