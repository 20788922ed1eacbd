//! `rsc eval`: per-frame and mean PSNR/SSIM of predicted GS frames.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use rsc_core::losses::{psnr, ssim};
use serde::Serialize;

use crate::cli::{list_pfm, read_image, thread_pool, CliError, EXIT_OK};
use crate::output::OutputDir;

/// Reported in place of the infinite PSNR of identical frames, and the
/// largest PSNR ever reported.
pub const PSNR_CAP: f64 = 99.0;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted frames (PFM), matched to ground truth in name order.
    #[arg(long)]
    pub pred_dir: PathBuf,
    /// Ground-truth frames (PFM).
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Print JSON lines instead of a table.
    #[arg(long)]
    pub jsonl: bool,
    /// Also write `metrics.jsonl` and `run.args` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScore {
    pub frame: String,
    pub psnr: f64,
    pub ssim: f64,
}

fn name(p: &Path) -> String {
    p.file_name()
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn score(pred: &Path, gt: &Path) -> Result<FrameScore, CliError> {
    let (a, b) = (read_image(pred)?, read_image(gt)?);
    if !a.same_shape(&b) {
        return Err(CliError::Usage(format!(
            "{} is {}x{}x{} but {} is {}x{}x{}",
            pred.display(),
            a.width(),
            a.height(),
            a.channels(),
            gt.display(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(FrameScore {
        frame: name(pred),
        psnr: psnr(&a, &b)?.min(PSNR_CAP),
        ssim: ssim(&a, &b)?,
    })
}

/// Arithmetic mean of the per-frame scores.
pub fn mean(scores: &[FrameScore]) -> FrameScore {
    let n = scores.len() as f64;
    FrameScore {
        frame: "mean".into(),
        psnr: scores.iter().map(|s| s.psnr).sum::<f64>() / n,
        ssim: scores.iter().map(|s| s.ssim).sum::<f64>() / n,
    }
}

pub fn run(a: &EvalArgs, run_args: &str) -> Result<u8, CliError> {
    let (pred, gt) = (list_pfm(&a.pred_dir)?, list_pfm(&a.gt_dir)?);
    if pred.len() != gt.len() {
        return Err(CliError::Usage(format!(
            "frame count mismatch: {} predicted, {} ground truth",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(CliError::Usage(format!(
            "{} holds no .pfm frames",
            a.pred_dir.display()
        )));
    }
    let scores: Vec<FrameScore> = thread_pool()?.install(|| {
        pred.par_iter()
            .zip(gt.par_iter())
            .map(|(p, g)| score(p, g))
            .collect::<Result<_, _>>()
    })?;
    let all: Vec<FrameScore> = scores.iter().cloned().chain([mean(&scores)]).collect();
    let lines: String = all
        .iter()
        .map(|s| serde_json::to_string(s).expect("scores serialize") + "\n")
        .collect();
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir)?;
        out.text("metrics.jsonl", &lines)?;
        out.text("run.args", run_args)?;
        out.commit();
    }
    if a.jsonl {
        print!("{lines}");
    } else {
        let width = all.iter().map(|s| s.frame.len()).max().unwrap_or(5).max(5);
        println!("{:<width$}  {:>9}  {:>8}", "frame", "PSNR (dB)", "SSIM");
        for s in &all {
            println!("{:<width$}  {:>9.3}  {:>8.5}", s.frame, s.psnr, s.ssim);
        }
    }
    Ok(EXIT_OK)
}
