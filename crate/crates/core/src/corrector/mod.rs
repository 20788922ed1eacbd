//! Parametric rolling-shutter corrector.
//!
//! GS frames are synthesized from a dual RS pair by warping each input with
//! `D * V` (time displacement times the motion over the readout span) and
//! fusing the two warps with a time-proximity mask. The motion model is fitted
//! by Nelder-Mead on the cycle objective: synthesize GS frames, rebuild both RS
//! inputs from them and score the rebuild.

pub mod nelder_mead;

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bdwarp::{self, FlowPair, Reconstruction};
use crate::error::{ensure, Error, Result};
use crate::image::{FlowField, Image, TimeMap};
use crate::imaging::{
    time_displacement, GsSequence, MotionKind, MotionModel, RsImage, ScanDirection,
};
use crate::losses::{self, DualRecon, LossBreakdown, LossWeights, PixelLoss};
use crate::warp::{backwarp, DEFAULT_SIGMA};

use nelder_mead::{axis_simplex, minimize, NmOptions, NmOutcome};

/// Dense motion field `V` over the `width x height` grid.
pub fn eval_motion(model: &MotionModel, width: usize, height: usize) -> Result<FlowField> {
    model.evaluate(width, height)
}

/// Per-row weight of the t2b warp when fusing the two warped inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionMask(Vec<f32>);

impl FusionMask {
    pub fn values(&self) -> &[f32] {
        &self.0
    }
}

/// `M = |D_b2t| / (|D_t2b| + |D_b2t|)`, or 0.5 where both vanish.
pub fn fusion_mask(d_t2b: &TimeMap, d_b2t: &TimeMap) -> Result<FusionMask> {
    ensure!(
        d_t2b.len() == d_b2t.len(),
        Shape,
        "displacement maps have {} and {} rows",
        d_t2b.len(),
        d_b2t.len()
    );
    let values = d_t2b
        .values()
        .iter()
        .zip(d_b2t.values())
        .map(|(a, b)| {
            let (a, b) = (a.abs(), b.abs());
            if a + b == 0.0 {
                0.5
            } else {
                b / (a + b)
            }
        })
        .collect();
    Ok(FusionMask(values))
}

fn check_pair(t2b: &RsImage, b2t: &RsImage) -> Result<()> {
    ensure!(
        t2b.direction == ScanDirection::TopToBottom && b2t.direction == ScanDirection::BottomToTop,
        Domain,
        "expected a (t2b, b2t) pair, got ({}, {})",
        t2b.direction.name(),
        b2t.direction.name()
    );
    ensure!(
        t2b.config == b2t.config,
        Shape,
        "dual RS images have different camera configs"
    );
    t2b.pixels.check_same_shape(&b2t.pixels, "dual RS images")?;
    t2b.config.check_image(&t2b.pixels, "RS image")
}

fn gs_from_motion(t2b: &RsImage, b2t: &RsImage, motion: &FlowField, m: usize) -> Result<Image> {
    let rows = t2b.config.rows();
    let d_t2b = time_displacement(rows, m, ScanDirection::TopToBottom)?;
    let d_b2t = time_displacement(rows, m, ScanDirection::BottomToTop)?;
    let mask = fusion_mask(&d_t2b, &d_b2t)?;
    let w_t2b = backwarp(&t2b.pixels, &motion.scale_rows(&d_t2b)?)?;
    let w_b2t = backwarp(&b2t.pixels, &motion.scale_rows(&d_b2t)?)?;
    let mut out = w_t2b;
    for (y, &k) in mask.values().iter().enumerate() {
        for (o, b) in out.row_mut(y).iter_mut().zip(w_b2t.row(y)) {
            *o = b + k * (*o - b);
        }
    }
    out.clamp_unit();
    Ok(out)
}

/// GS frame at the exposure instant of 1-based t2b row `m`.
pub fn rs_to_gs(t2b: &RsImage, b2t: &RsImage, model: &MotionModel, m: usize) -> Result<Image> {
    check_pair(t2b, b2t)?;
    let motion = eval_motion(model, t2b.config.cols(), t2b.config.rows())?;
    gs_from_motion(t2b, b2t, &motion, m)
}

/// A synthesized GS frame and the row whose instant it depicts.
#[derive(Debug, Clone, PartialEq)]
pub struct GsFrame {
    /// 1-based t2b row.
    pub row: usize,
    /// Readout fraction `(row - 1) / (H - 1)`.
    pub time: f64,
    pub pixels: Image,
}

/// Fitting options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Objective spread across the simplex at convergence.
    pub tol: f64,
    /// Simplex size at convergence, in parameter units.
    pub xtol: f64,
    /// Interior split rows sit at intervals of `(H - 1) / divisor`.
    pub divisor: usize,
    pub stages: usize,
    /// Boundary crop for self-distillation stages.
    pub crop: usize,
    /// Teacher momentum; 1 freezes the teacher.
    pub momentum: f64,
    pub sigma: f64,
    pub seed: u64,
    pub loss: LossWeights,
    /// Pixels this close to the edge are left out of the cycle loss.
    pub border: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            xtol: 0.01,
            divisor: 8,
            stages: 2,
            crop: 32,
            momentum: 1.0,
            sigma: DEFAULT_SIGMA,
            seed: 0,
            loss: LossWeights::default(),
            border: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.divisor >= 1,
            Domain,
            "sampling divisor must be at least 1"
        );
        ensure!(self.stages >= 1, Domain, "stage count must be at least 1");
        ensure!(
            (0.0..=1.0).contains(&self.momentum),
            Domain,
            "teacher momentum must lie in [0, 1], got {}",
            self.momentum
        );
        ensure!(
            self.tol >= 0.0 && self.xtol >= 0.0,
            Domain,
            "tolerances must be non-negative"
        );
        self.loss.validate()
    }
}

/// Split rows `1 + round(j (H - 1) / divisor)` for `j = 1..divisor`,
/// deduplicated.
pub fn sample_rows(rows: usize, divisor: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..divisor)
        .map(|j| 1 + libm::round(j as f64 * (rows - 1) as f64 / divisor as f64) as usize)
        .collect();
    out.dedup();
    out
}

/// Fixed pseudo targets for a self-distillation stage, one per GS output.
#[derive(Debug, Clone)]
pub struct DistillTargets {
    pub start: Image,
    pub end: Image,
    pub mids: Vec<Image>,
    pub crop: usize,
}

/// One evaluation of the cycle objective.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    pub hole_fraction: f64,
}

/// The objective for one training stage.
#[derive(Debug, Clone)]
pub struct CycleObjective<'a> {
    t2b: &'a RsImage,
    b2t: &'a RsImage,
    kind: MotionKind,
    rows: Vec<usize>,
    sigma: f64,
    loss: PixelLoss<'a>,
    stage: u32,
    distill: Option<DistillTargets>,
}

impl<'a> CycleObjective<'a> {
    pub fn new(
        t2b: &'a RsImage,
        b2t: &'a RsImage,
        kind: MotionKind,
        cfg: &FitConfig,
    ) -> Result<Self> {
        check_pair(t2b, b2t)?;
        cfg.validate()?;
        ensure!(
            kind != MotionKind::Dense,
            Domain,
            "dense motion has no parameters to fit"
        );
        let mut loss = PixelLoss::new(cfg.loss);
        loss.border = cfg.border;
        Ok(Self {
            t2b,
            b2t,
            kind,
            rows: sample_rows(t2b.config.rows(), cfg.divisor),
            sigma: cfg.sigma,
            loss,
            stage: 1,
            distill: None,
        })
    }

    /// Adds a self-distillation term, making this a later-stage objective.
    pub fn with_distillation(mut self, stage: u32, targets: DistillTargets) -> Self {
        self.stage = stage.max(2);
        self.distill = Some(targets);
        self
    }

    pub fn sample_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn kind(&self) -> MotionKind {
        self.kind
    }

    pub fn evaluate(&self, model: &MotionModel) -> Result<Evaluation> {
        let (w, h) = (self.t2b.config.cols(), self.t2b.config.rows());
        let v = eval_motion(model, w, h)?;
        let neg = |f: &FlowField| f.scaled(-1.0);
        let gs = |m: usize| gs_from_motion(self.t2b, self.b2t, &v, m);
        let (gs_start, gs_end) = (gs(1)?, gs(h)?);
        let v_back = neg(&v);

        let endpoint = |dir| {
            bdwarp::reconstruct_rs_endpoints(&gs_start, &gs_end, &v, &v_back, dir, self.sigma)
        };
        let ends = [
            endpoint(ScanDirection::TopToBottom)?,
            endpoint(ScanDirection::BottomToTop)?,
        ];

        let mut mids: Vec<[Reconstruction; 2]> = Vec::with_capacity(self.rows.len());
        let mut gs_mids = Vec::with_capacity(self.rows.len());
        for &m in &self.rows {
            let s = (m - 1) as f32 / (h - 1) as f32;
            let gs_mid = gs(m)?;
            let (a, b) = (v.scaled(s), v.scaled(1.0 - s));
            let (na, nb) = (neg(&a), neg(&b));
            let pair_a = FlowPair {
                forward: &a,
                backward: &na,
            };
            let pair_b = FlowPair {
                forward: &b,
                backward: &nb,
            };
            let rebuild = |dir| {
                bdwarp::reconstruct_rs_intermediate(
                    &gs_start, &gs_mid, &gs_end, pair_a, pair_b, m, dir, self.sigma,
                )
            };
            mids.push([
                rebuild(ScanDirection::TopToBottom)?,
                rebuild(ScanDirection::BottomToTop)?,
            ]);
            gs_mids.push(gs_mid);
        }

        let mid_duals: Vec<DualRecon<'_>> = mids.iter().map(dual).collect();
        let mut breakdown = losses::self_supervised_loss(
            &self.t2b.pixels,
            &self.b2t.pixels,
            dual(&ends),
            &mid_duals,
            &self.loss,
        )?;

        if let Some(t) = &self.distill {
            let mut sd = losses::self_distillation_loss(
                &[gs_start, gs_end],
                &[t.start.clone(), t.end.clone()],
                t.crop,
                &self.loss,
            )?;
            if !gs_mids.is_empty() {
                sd += losses::self_distillation_loss(&gs_mids, &t.mids, t.crop, &self.loss)?
                    / gs_mids.len() as f64;
            }
            breakdown.l_sd = sd;
            breakdown.pixels_sd = w * h * (2 + gs_mids.len());
        }
        breakdown.total = losses::total_loss(self.stage, &breakdown);
        ensure!(
            breakdown.total.is_finite(),
            NonFinite,
            "objective is {} for model {:?}",
            breakdown.total,
            model.params()
        );

        let all = ends.iter().chain(mids.iter().flatten());
        let count = 2 + 2 * mids.len();
        let hole_fraction = all.map(Reconstruction::hole_fraction).sum::<f64>() / count as f64;
        Ok(Evaluation {
            breakdown,
            hole_fraction,
        })
    }

    /// Objective value at a parameter vector.
    pub fn value(&self, params: &[f64]) -> Result<f64> {
        let model = MotionModel::from_params(self.kind, params)?;
        Ok(self.evaluate(&model)?.breakdown.total)
    }
}

fn dual(r: &[Reconstruction; 2]) -> DualRecon<'_> {
    DualRecon {
        t2b: &r[0],
        b2t: &r[1],
    }
}

/// Initial simplex offsets for each parameter of `kind`.
pub fn initial_steps(kind: MotionKind) -> Vec<f64> {
    match kind {
        MotionKind::Translation => alloc::vec![0.5, 0.5],
        MotionKind::Affine => alloc::vec![0.01, 0.01, 1.0, 0.01, 0.01, 1.0],
        MotionKind::Dense => Vec::new(),
    }
}

/// Per-stage record of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarted: bool,
    /// Final objective value of the stage.
    pub loss: f64,
    /// Index into the loss trace where this stage starts.
    pub trace_start: usize,
    /// Fitted student parameters, full-frame.
    pub student: Vec<f64>,
    /// Teacher parameters used to build this stage's pseudo targets.
    pub teacher: Vec<f64>,
    /// Teacher parameters after the post-stage update.
    pub teacher_after: Vec<f64>,
    /// Size of the pseudo targets after cropping, if any.
    pub target_size: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Mean hole fraction over all rebuilt RS images at the fitted model.
    pub hole_fraction: f64,
    pub final_loss: LossBreakdown,
    pub stages: Vec<StageReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    /// GS frames at the first row, each interior split row and the last row.
    pub gs_frames: Vec<GsFrame>,
    pub fitted_model: MotionModel,
    /// Best objective value after every simplex iteration, all stages.
    pub loss_trace: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// One objective evaluation made during a fit.
#[derive(Debug, Clone, Copy)]
pub struct EvalEvent<'e> {
    pub stage: usize,
    /// Parameters in the coordinates of the stage's inputs, which are cropped
    /// for stages after the first.
    pub params: &'e [f64],
    pub evaluation: &'e Evaluation,
}

fn run_nm(
    objective: &CycleObjective<'_>,
    x0: &[f64],
    cfg: &FitConfig,
    rng: &mut ChaCha8Rng,
    stage: usize,
    observer: &mut dyn FnMut(EvalEvent<'_>),
) -> Result<(NmOutcome, bool)> {
    let opts = NmOptions {
        max_iters: cfg.max_iters,
        ftol: cfg.tol,
        xtol: cfg.xtol,
    };
    let steps = initial_steps(objective.kind);
    let mut value = |params: &[f64]| -> Result<f64> {
        let evaluation = objective.evaluate(&MotionModel::from_params(objective.kind, params)?)?;
        observer(EvalEvent {
            stage,
            params,
            evaluation: &evaluation,
        });
        Ok(evaluation.breakdown.total)
    };
    let first = minimize(&mut value, axis_simplex(x0, &steps), &opts)?;
    if first.converged {
        return Ok((first, false));
    }
    let jitter: Vec<f64> = steps
        .iter()
        .map(|s| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * s * rng.random_range(0.5..1.5)
        })
        .collect();
    let second = minimize(&mut value, axis_simplex(&first.x, &jitter), &opts)?;
    let mut trace = first.trace;
    let best = trace.last().copied().unwrap_or(first.f);
    trace.extend(second.trace.iter().map(|v| v.min(best)));
    let keep_second = second.f <= first.f;
    Ok((
        NmOutcome {
            x: if keep_second { second.x } else { first.x },
            f: second.f.min(first.f),
            iterations: first.iterations + second.iterations,
            evaluations: first.evaluations + second.evaluations,
            converged: second.converged,
            trace,
        },
        true,
    ))
}

fn frames_at(
    t2b: &RsImage,
    b2t: &RsImage,
    model: &MotionModel,
    rows: &[usize],
) -> Result<Vec<GsFrame>> {
    let h = t2b.config.rows();
    let v = eval_motion(model, t2b.config.cols(), h)?;
    rows.iter()
        .map(|&m| {
            Ok(GsFrame {
                row: m,
                time: (m - 1) as f64 / (h - 1) as f64,
                pixels: gs_from_motion(t2b, b2t, &v, m)?,
            })
        })
        .collect()
}

fn blend(teacher: &[f64], student: &[f64], c: f64) -> Vec<f64> {
    teacher
        .iter()
        .zip(student)
        .map(|(t, s)| c * t + (1.0 - c) * s)
        .collect()
}

/// Fits `init`'s motion family to a dual RS pair.
///
/// Stage 1 minimizes the cycle loss on the full frame. Each later stage fits
/// a student on the inputs cropped by `cfg.crop`, adding a distillation term
/// against the teacher's GS frames at the same instants, and then moves the
/// teacher towards the student by `1 - momentum`.
pub fn fit(
    t2b: &RsImage,
    b2t: &RsImage,
    init: &MotionModel,
    cfg: &FitConfig,
) -> Result<CorrectionResult> {
    fit_observed(t2b, b2t, init, cfg, &mut |_| {})
}

/// [`fit`] that reports every objective evaluation to `observer`.
pub fn fit_observed(
    t2b: &RsImage,
    b2t: &RsImage,
    init: &MotionModel,
    cfg: &FitConfig,
    observer: &mut dyn FnMut(EvalEvent<'_>),
) -> Result<CorrectionResult> {
    let kind = init.kind();
    let full = CycleObjective::new(t2b, b2t, kind, cfg)?;
    let h = t2b.config.rows();
    let p = cfg.crop;
    let (cropped_t2b, cropped_b2t) = if cfg.stages >= 2 {
        ensure!(
            h.min(t2b.config.cols()) >= 2 * p + losses::MIN_CROPPED_SIDE,
            Degenerate,
            "a {p}-px crop of a {}x{h} image leaves less than {} px for distillation",
            t2b.config.cols(),
            losses::MIN_CROPPED_SIDE
        );
        (Some(t2b.cropped(p)?), Some(b2t.cropped(p)?))
    } else {
        (None, None)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::new();
    let mut reports = Vec::with_capacity(cfg.stages);

    let (out, restarted) = run_nm(&full, &init.params(), cfg, &mut rng, 1, observer)?;
    let mut student = out.x.clone();
    let mut teacher = student.clone();
    reports.push(StageReport {
        stage: 1,
        iterations: out.iterations,
        evaluations: out.evaluations,
        converged: out.converged,
        restarted,
        loss: out.f,
        trace_start: 0,
        student: student.clone(),
        teacher: init.params(),
        teacher_after: teacher.clone(),
        target_size: None,
    });
    trace.extend(out.trace);

    if let (Some(ct2b), Some(cb2t)) = (&cropped_t2b, &cropped_b2t) {
        let ch = ct2b.config.rows();
        for stage in 2..=cfg.stages {
            let teacher_model = MotionModel::from_params(kind, &teacher)?;
            let base = CycleObjective::new(ct2b, cb2t, kind, cfg)?;
            let crop_rows: Vec<usize> = base.sample_rows().to_vec();
            let full_rows: Vec<usize> = core::iter::once(1)
                .chain(crop_rows.iter().copied())
                .chain(core::iter::once(ch))
                .map(|m| m + p)
                .collect();
            let mut pseudo = frames_at(t2b, b2t, &teacher_model, &full_rows)?
                .into_iter()
                .map(|f| f.pixels);
            let start = pseudo.next().expect("start frame");
            let mut rest: Vec<Image> = pseudo.collect();
            let end = rest.pop().expect("end frame");
            let targets = DistillTargets {
                start,
                end,
                mids: rest,
                crop: p,
            };
            let size = (
                targets.start.width() - 2 * p,
                targets.start.height() - 2 * p,
            );
            let objective = base.with_distillation(stage as u32, targets);
            let x0 = MotionModel::from_params(kind, &student)?
                .to_crop(p, h)?
                .params();
            let trace_start = trace.len();
            let (out, restarted) = run_nm(&objective, &x0, cfg, &mut rng, stage, observer)?;
            student = MotionModel::from_params(kind, &out.x)?
                .from_crop(p, h)?
                .params();
            let teacher_before = teacher.clone();
            if cfg.momentum < 1.0 {
                teacher = blend(&teacher, &student, cfg.momentum);
            }
            reports.push(StageReport {
                stage,
                iterations: out.iterations,
                evaluations: out.evaluations,
                converged: out.converged,
                restarted,
                loss: out.f,
                trace_start,
                student: student.clone(),
                teacher: teacher_before,
                teacher_after: teacher.clone(),
                target_size: Some(size),
            });
            trace.extend(out.trace);
        }
    }

    let fitted = MotionModel::from_params(kind, &student)?;
    let final_eval = full.evaluate(&fitted)?;
    let mut rows = alloc::vec![1];
    rows.extend_from_slice(full.sample_rows());
    rows.push(h);
    rows.dedup();
    let gs_frames = frames_at(t2b, b2t, &fitted, &rows)?;
    Ok(CorrectionResult {
        gs_frames,
        fitted_model: fitted,
        loss_trace: trace,
        diagnostics: Diagnostics {
            iterations: reports.iter().map(|r| r.iterations).sum(),
            evaluations: reports.iter().map(|r| r.evaluations).sum(),
            converged: reports.iter().all(|r| r.converged),
            hole_fraction: final_eval.hole_fraction,
            final_loss: final_eval.breakdown,
            stages: reports,
        },
    })
}

/// GS frames at evenly spaced rows and whether `count` had to be clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub sequence: GsSequence,
    /// 1-based t2b row of each frame.
    pub rows: Vec<usize>,
    /// True when more frames were requested than there are rows.
    pub clipped: bool,
}

/// Synthesizes `count` GS frames at rows `round(1 + k (H - 1) / (count - 1))`.
pub fn generate_video(
    t2b: &RsImage,
    b2t: &RsImage,
    model: &MotionModel,
    count: usize,
) -> Result<Video> {
    check_pair(t2b, b2t)?;
    ensure!(
        count >= 2,
        Domain,
        "a video needs at least 2 frames, got {count}"
    );
    let h = t2b.config.rows();
    let clipped = count > h;
    let n = count.min(h);
    let mut rows: Vec<usize> = (0..n)
        .map(|k| libm::round(1.0 + k as f64 * (h - 1) as f64 / (n - 1) as f64) as usize)
        .collect();
    rows.dedup();
    let frames = frames_at(t2b, b2t, model, &rows)?;
    let times = frames.iter().map(|f| f.time).collect();
    let sequence = GsSequence::new(frames.into_iter().map(|f| f.pixels).collect(), times)
        .map_err(|e| Error::Domain(format!("video frames: {e}")))?;
    Ok(Video {
        sequence,
        rows,
        clipped,
    })
}

#[cfg(test)]
mod tests;
