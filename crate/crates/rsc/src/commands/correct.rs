//! `rsc correct`: fit a motion model to a dual RS pair and write GS frames.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use rsc_core::corrector::{fit_observed, generate_video, EvalEvent, FitConfig};
use rsc_core::losses::LossBreakdown;
use rsc_core::{CameraConfig, MotionModel, RsImage, ScanDirection};
use serde::Serialize;

use crate::cli::{frame_name, read_image, CliError, EXIT_OK};
use crate::output::OutputDir;
use crate::record::{parse_kind, ModelRecord};

#[derive(Debug, Args)]
pub struct CorrectArgs {
    /// Top-to-bottom RS image (PFM).
    #[arg(long)]
    pub t2b: PathBuf,
    /// Bottom-to-top RS image (PFM).
    #[arg(long)]
    pub b2t: PathBuf,
    /// Number of GS frames, evenly spaced over the readout.
    #[arg(long, default_value_t = 9)]
    pub frames: usize,
    /// Training stages; stages after the first add self-distillation.
    #[arg(long, default_value_t = 1)]
    pub stages: usize,
    /// Boundary crop in pixels for self-distillation stages.
    #[arg(long, default_value_t = 32)]
    pub crop: usize,
    /// Teacher momentum; 1 freezes the teacher.
    #[arg(long, default_value_t = 1.0)]
    pub momentum: f64,
    /// Motion family: translation or affine.
    #[arg(long, default_value = "translation")]
    pub model: String,
    /// Initial parameters (defaults to no motion).
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Readout time per row, stored in the model record.
    #[arg(long, default_value_t = 1.0)]
    pub readout: f64,
    /// Iteration limit of each optimizer run.
    #[arg(long, default_value_t = FitConfig::default().max_iters)]
    pub max_iters: usize,
    /// Objective spread at convergence.
    #[arg(long, default_value_t = FitConfig::default().tol)]
    pub tol: f64,
    /// Simplex size at convergence.
    #[arg(long, default_value_t = FitConfig::default().xtol)]
    pub xtol: f64,
    /// Interior split rows sit every (H - 1) / divisor rows.
    #[arg(long, default_value_t = FitConfig::default().divisor)]
    pub divisor: usize,
    /// Splatting kernel width in pixels.
    #[arg(long, default_value_t = FitConfig::default().sigma)]
    pub sigma: f64,
    /// Pixels near the edge left out of the cycle loss.
    #[arg(long, default_value_t = 0)]
    pub border: usize,
    /// Seed of the optimizer restart.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Terms {
    l_se: f64,
    l_sme: f64,
    l_self: f64,
    l_sd: f64,
    total: f64,
}

impl From<&LossBreakdown> for Terms {
    fn from(b: &LossBreakdown) -> Self {
        Self {
            l_se: b.l_se,
            l_sme: b.l_sme,
            l_self: b.l_self,
            l_sd: b.l_sd,
            total: b.total,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Metric<'a> {
    Eval {
        index: usize,
        stage: usize,
        params: &'a [f64],
        #[serde(flatten)]
        terms: Terms,
        hole_fraction: f64,
    },
    Stage {
        stage: usize,
        iterations: usize,
        evaluations: usize,
        converged: bool,
        restarted: bool,
        loss: f64,
        params: &'a [f64],
        teacher: &'a [f64],
        target_rows: Option<usize>,
        target_cols: Option<usize>,
    },
    Final {
        params: &'a [f64],
        #[serde(flatten)]
        terms: Terms,
        hole_fraction: f64,
        iterations: usize,
        evaluations: usize,
        converged: bool,
        frames: &'a [usize],
        clipped: bool,
    },
}

fn jsonl(out: &mut String, m: &Metric<'_>) {
    out.push_str(&serde_json::to_string(m).expect("metric records serialize"));
    out.push('\n');
}

pub fn run(a: &CorrectArgs, run_args: &str) -> Result<u8, CliError> {
    let kind = parse_kind(&a.model).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown --model {:?}, use translation or affine",
            a.model
        ))
    })?;
    let (t2b_px, b2t_px) = (read_image(&a.t2b)?, read_image(&a.b2t)?);
    if !t2b_px.same_shape(&b2t_px) {
        return Err(CliError::Usage(format!(
            "t2b is {}x{}x{}, b2t is {}x{}x{}",
            t2b_px.width(),
            t2b_px.height(),
            t2b_px.channels(),
            b2t_px.width(),
            b2t_px.height(),
            b2t_px.channels()
        )));
    }
    let config = CameraConfig::new(t2b_px.height(), t2b_px.width(), a.readout, 0.0)?;
    let t2b = RsImage::new(t2b_px, ScanDirection::TopToBottom, config)?;
    let b2t = RsImage::new(b2t_px, ScanDirection::BottomToTop, config)?;
    let init = match &a.init {
        Some(p) => MotionModel::from_params(kind, p)?,
        None => MotionModel::zero(kind, config.cols(), config.rows()),
    };
    if a.frames < 2 {
        return Err(CliError::Usage(format!(
            "--frames must be at least 2, got {}",
            a.frames
        )));
    }
    let cfg = FitConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        xtol: a.xtol,
        divisor: a.divisor,
        stages: a.stages,
        crop: a.crop,
        momentum: a.momentum,
        sigma: a.sigma,
        seed: a.seed,
        border: a.border,
        ..FitConfig::default()
    };

    let mut metrics = String::new();
    let mut index = 0;
    let result = fit_observed(&t2b, &b2t, &init, &cfg, &mut |e: EvalEvent<'_>| {
        jsonl(
            &mut metrics,
            &Metric::Eval {
                index,
                stage: e.stage,
                params: e.params,
                terms: (&e.evaluation.breakdown).into(),
                hole_fraction: e.evaluation.hole_fraction,
            },
        );
        index += 1;
    })?;
    let d = &result.diagnostics;
    for s in &d.stages {
        jsonl(
            &mut metrics,
            &Metric::Stage {
                stage: s.stage,
                iterations: s.iterations,
                evaluations: s.evaluations,
                converged: s.converged,
                restarted: s.restarted,
                loss: s.loss,
                params: &s.student,
                teacher: &s.teacher,
                target_rows: s.target_size.map(|t| t.1),
                target_cols: s.target_size.map(|t| t.0),
            },
        );
    }
    let video = generate_video(&t2b, &b2t, &result.fitted_model, a.frames)?;
    if video.clipped {
        eprintln!(
            "rsc: warning: --frames {} exceeds the {} rows, writing {} frames",
            a.frames,
            config.rows(),
            video.rows.len()
        );
    }
    let params = result.fitted_model.params();
    jsonl(
        &mut metrics,
        &Metric::Final {
            params: &params,
            terms: (&d.final_loss).into(),
            hole_fraction: d.hole_fraction,
            iterations: d.iterations,
            evaluations: d.evaluations,
            converged: d.converged,
            frames: &video.rows,
            clipped: video.clipped,
        },
    );

    let mut trace = String::from("iteration,stage,loss\n");
    for (i, v) in result.loss_trace.iter().enumerate() {
        let stage = d
            .stages
            .iter()
            .rev()
            .find(|s| s.trace_start <= i)
            .map_or(1, |s| s.stage);
        writeln!(trace, "{},{stage},{v}", i + 1).unwrap();
    }

    let mut out = OutputDir::create(&a.out)?;
    let frames = out.subdir("frames")?;
    for (row, img) in video.rows.iter().zip(video.sequence.frames()) {
        out.pfm(frames.join(frame_name(*row, config.rows(), "pfm")), img)?;
        out.png(frames.join(frame_name(*row, config.rows(), "png")), img)?;
    }
    let record = ModelRecord {
        model: result.fitted_model.clone(),
        config,
    };
    out.text(
        "model.txt",
        &record
            .to_text()
            .map_err(|e| CliError::Runtime(e.to_string()))?,
    )?;
    out.text("loss_trace.csv", &trace)?;
    out.text("metrics.jsonl", &metrics)?;
    out.text("run.args", run_args)?;
    out.commit();

    for s in &d.stages {
        let target = s
            .target_size
            .map(|(w, h)| format!(", pseudo targets {w}x{h} (crop {})", a.crop))
            .unwrap_or_default();
        println!(
            "stage {}: {} iterations, {} evaluations, loss {:.6}{}{target}",
            s.stage,
            s.iterations,
            s.evaluations,
            s.loss,
            if s.converged { "" } else { ", not converged" },
        );
    }
    println!(
        "fitted {} {:?}, L_self {:.6}, {} frames written to {}",
        kind.name(),
        params,
        d.final_loss.l_self,
        video.rows.len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}
