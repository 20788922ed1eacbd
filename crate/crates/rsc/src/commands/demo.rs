//! `rsc demo-ambiguity`: a tilted rod under one camera motion and a vertical
//! rod under another give the same top-to-bottom RS image.

use std::path::PathBuf;

use clap::Args;
use rsc_core::imaging::{ambiguity_pair, rod_max_diff, solve_tilt, AmbiguityScene};

use crate::cli::{CliError, EXIT_OK, EXIT_RUNTIME};
use crate::output::OutputDir;

/// Speeds (px/s) seen by the tilted-rod and vertical-rod cameras.
pub const DEFAULT_SPEEDS: (f64, f64) = (4000.0, 2000.0);
/// Readout times per row (s) of the two cameras.
pub const DEFAULT_READOUTS: (f64, f64) = (87e-6, 87e-6);

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Horizontal speed (px/s) seen by the camera looking at the tilted rod.
    #[arg(long, default_value_t = DEFAULT_SPEEDS.0, allow_hyphen_values = true)]
    pub v1: f64,
    /// Horizontal speed (px/s) seen by the camera looking at the vertical rod.
    #[arg(long, default_value_t = DEFAULT_SPEEDS.1, allow_hyphen_values = true)]
    pub v2: f64,
    /// Readout time per row (s) of the first camera.
    #[arg(long, default_value_t = DEFAULT_READOUTS.0)]
    pub tau1: f64,
    /// Readout time per row (s) of the second camera.
    #[arg(long, default_value_t = DEFAULT_READOUTS.1)]
    pub tau2: f64,
    /// Rod tilt in degrees; defaults to the tilt that makes the views match.
    #[arg(long, allow_hyphen_values = true)]
    pub tilt: Option<f64>,
    /// Degrees added to the rod tilt.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tilt_offset: f64,
    /// Image height in pixels.
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    /// Image width in pixels.
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    /// Rod thickness in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub rod_width: f64,
    /// Write `tilted.pfm`, `vertical.pfm` and PNG previews here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Renders both views and prints the verdict. Exits 0 only when the renders
/// agree on every rod pixel.
pub fn run(a: &DemoArgs, run_args: &str) -> Result<u8, CliError> {
    let speeds = (a.v1, a.v2);
    let readouts = (a.tau1, a.tau2);
    let tilt = a.tilt.unwrap_or(solve_tilt(speeds, readouts)?) + a.tilt_offset;
    let scene = AmbiguityScene {
        rows: a.rows,
        cols: a.cols,
        rod_width: a.rod_width,
    };
    if scene.rows < 2 || scene.cols < 1 {
        return Err(CliError::Usage(format!(
            "degenerate geometry: the demo needs at least 2 rows and 1 column, got {}x{}",
            scene.cols, scene.rows
        )));
    }
    let (tilted, vertical) = ambiguity_pair(&scene, tilt, speeds, readouts)?;
    let diff = rod_max_diff(&tilted.pixels, &vertical.pixels);
    if let Some(dir) = &a.out {
        let mut out = OutputDir::create(dir)?;
        out.pfm("tilted.pfm", &tilted.pixels)?;
        out.pfm("vertical.pfm", &vertical.pixels)?;
        out.png("tilted.png", &tilted.pixels)?;
        out.png("vertical.png", &vertical.pixels)?;
        out.text("run.args", run_args)?;
        out.commit();
    }
    let identical = diff == 0.0;
    println!("tilt: {tilt} deg");
    println!("identical: {identical}, maxdiff {diff}");
    Ok(if identical { EXIT_OK } else { EXIT_RUNTIME })
}
