//! `rsc synth`: dual RS capture from a moving base image or a GS stack.

use std::path::PathBuf;

use clap::Args;
use rsc_core::imaging::{capture_dual_rs, frame_stack};
use rsc_core::{CameraConfig, GsSequence, Image};

use crate::cli::{frame_name, list_pfm, motion_from_values, read_image, CliError, EXIT_OK};
use crate::output::OutputDir;
use crate::record::ModelRecord;
use crate::texture::{band_limited, TextureSpec};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Base image (PFM, values in [0, 1]) moved by --motion. Without --base
    /// or --gs-dir a band-limited texture is generated from --seed.
    #[arg(long, conflicts_with = "gs_dir")]
    pub base: Option<PathBuf>,
    /// Directory holding one GS frame (PFM) per row instant, in name order.
    #[arg(long, conflicts_with = "motion")]
    pub gs_dir: Option<PathBuf>,
    /// Displacement over the readout span: `vx,vy` or six affine coefficients.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 1,
        allow_hyphen_values = true,
        default_value = "0,0"
    )]
    pub motion: Vec<f64>,
    /// Sensor rows H; defaults to the input height (64 for generated textures).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Width of a generated texture.
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    /// Channels of a generated texture (1 or 3).
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Readout time per row.
    #[arg(long, default_value_t = 1.0)]
    pub readout: f64,
    /// Seed of the generated texture.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

enum Source {
    Moving(Image, rsc_core::MotionModel),
    Stack(Vec<Image>),
}

pub fn run(a: &SynthArgs, run_args: &str) -> Result<u8, CliError> {
    if let Some(r) = a.rows {
        if r < 2 {
            return Err(CliError::Usage(format!(
                "degenerate geometry: a rolling-shutter camera needs at least 2 rows, got {r}"
            )));
        }
    }
    let source = if let Some(dir) = &a.gs_dir {
        let files = list_pfm(dir)?;
        if files.is_empty() {
            return Err(CliError::Usage(format!(
                "{} holds no .pfm frames",
                dir.display()
            )));
        }
        Source::Stack(
            files
                .iter()
                .map(|f| read_image(f))
                .collect::<Result<_, _>>()?,
        )
    } else {
        let model = motion_from_values(&a.motion)?;
        let base = match &a.base {
            Some(path) => read_image(path)?,
            None => {
                if !(a.channels == 1 || a.channels == 3) || a.cols == 0 {
                    return Err(CliError::Usage(
                        "textures need 1 or 3 channels and at least 1 column".into(),
                    ));
                }
                band_limited(&TextureSpec {
                    channels: a.channels,
                    ..TextureSpec::new(a.cols, a.rows.unwrap_or(64), a.seed)
                })
            }
        };
        Source::Moving(base, model)
    };
    let (height, width) = match &source {
        Source::Moving(b, _) => (b.height(), b.width()),
        Source::Stack(f) => (f[0].height(), f[0].width()),
    };
    let rows = a.rows.unwrap_or(height);
    if rows != height {
        return Err(CliError::Usage(format!(
            "input has {height} rows but --rows is {rows}"
        )));
    }
    let config = CameraConfig::new(rows, width, a.readout, 0.0)?;
    let (seq, model) = match source {
        Source::Moving(base, model) => (frame_stack(&base, &model, &config)?, Some(model)),
        Source::Stack(frames) => {
            if frames.len() != rows {
                return Err(CliError::Usage(format!(
                    "a {rows}-row capture needs {rows} GS frames, found {}",
                    frames.len()
                )));
            }
            let times = (1..=rows).map(|i| config.instant_time(i)).collect();
            (GsSequence::new(frames, times)?, None)
        }
    };
    let (t2b, b2t) = capture_dual_rs(&seq, &config)?;

    let mut out = OutputDir::create(&a.out)?;
    out.pfm("t2b.pfm", &t2b.pixels)?;
    out.pfm("b2t.pfm", &b2t.pixels)?;
    out.png("t2b.png", &t2b.pixels)?;
    out.png("b2t.png", &b2t.pixels)?;
    let gs = out.subdir("gs")?;
    for (i, frame) in seq.frames().iter().enumerate() {
        out.pfm(gs.join(frame_name(i + 1, rows, "pfm")), frame)?;
    }
    if let Some(model) = model {
        let text = ModelRecord { model, config }
            .to_text()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        out.text("model.txt", &text)?;
    }
    out.text("run.args", run_args)?;
    out.commit();
    println!(
        "wrote t2b.pfm, b2t.pfm and {rows} GS frames ({width}x{rows}) to {}",
        a.out.display()
    );
    Ok(EXIT_OK)
}
