//! Forward simulation of dual reversed rolling-shutter capture.
//!
//! Rows are 0-based in code. A camera with `H` rows reads row `r` of a
//! top-to-bottom (t2b) image at readout fraction `r / (H - 1)` and row `r` of
//! a bottom-to-top (b2t) image at fraction `(H - 1 - r) / (H - 1)`.
//!
//! Both RS images are stored in physical row coordinates: row `r` always
//! holds scene row `r`, whichever direction scanned it. A static scene
//! therefore produces two identical images.

mod ambiguity;
mod motion;

use alloc::vec::Vec;

pub use ambiguity::{ambiguity_pair, rod_max_diff, solve_tilt, AmbiguityScene, RodView};
pub use motion::{MotionKind, MotionModel, AFFINE_IDENTITY};

use crate::error::{ensure, Result};
use crate::image::{Image, TimeMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanDirection {
    TopToBottom,
    BottomToTop,
}

impl ScanDirection {
    pub fn name(self) -> &'static str {
        match self {
            ScanDirection::TopToBottom => "t2b",
            ScanDirection::BottomToTop => "b2t",
        }
    }

    /// Readout fraction in `[0, 1]` at which physical row `row` is exposed.
    pub fn row_fraction(self, row: usize, rows: usize) -> f64 {
        let span = (rows - 1) as f64;
        match self {
            ScanDirection::TopToBottom => row as f64 / span,
            ScanDirection::BottomToTop => (rows - 1 - row) as f64 / span,
        }
    }

    /// 0-based readout instant at which physical row `row` is exposed.
    pub fn instant_of_row(self, row: usize, rows: usize) -> usize {
        match self {
            ScanDirection::TopToBottom => row,
            ScanDirection::BottomToTop => rows - 1 - row,
        }
    }
}

/// Sensor geometry and readout timing.
///
/// `midpoint` is the acquisition time `t`, the middle of the readout; the
/// first and last rows are exposed at `t - tau (H-1)/2` and `t + tau (H-1)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraConfig {
    rows: usize,
    cols: usize,
    readout: f64,
    midpoint: f64,
}

impl CameraConfig {
    pub fn new(rows: usize, cols: usize, readout: f64, midpoint: f64) -> Result<Self> {
        ensure!(
            rows >= 2,
            Degenerate,
            "a rolling-shutter camera needs at least 2 rows, got {rows}"
        );
        ensure!(cols >= 1, Degenerate, "camera needs at least 1 column");
        ensure!(
            readout.is_finite() && readout > 0.0,
            Domain,
            "readout per row must be positive and finite, got {readout}"
        );
        ensure!(midpoint.is_finite(), Domain, "midpoint time must be finite");
        Ok(Self {
            rows,
            cols,
            readout,
            midpoint,
        })
    }

    /// Camera with `rows x cols` pixels, 1 time unit per row, centred on 0.
    pub fn unit(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, 1.0, 0.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn readout(&self) -> f64 {
        self.readout
    }

    pub fn midpoint(&self) -> f64 {
        self.midpoint
    }

    pub fn start_time(&self) -> f64 {
        self.midpoint - self.readout * (self.rows - 1) as f64 / 2.0
    }

    pub fn end_time(&self) -> f64 {
        self.midpoint + self.readout * (self.rows - 1) as f64 / 2.0
    }

    /// Duration of the full readout, `t_H - t_1`.
    pub fn span(&self) -> f64 {
        self.readout * (self.rows - 1) as f64
    }

    /// Exposure time of the 1-based readout instant `i`.
    pub fn instant_time(&self, i: usize) -> f64 {
        self.midpoint + self.readout * (i as f64 - (self.rows + 1) as f64 / 2.0)
    }

    /// Config for the centre crop that drops `p` rows and columns per border.
    ///
    /// The crop keeps the per-row readout, so its midpoint is unchanged.
    pub fn cropped(&self, p: usize) -> Result<Self> {
        ensure!(
            self.rows > 2 * p + 1 && self.cols > 2 * p,
            Degenerate,
            "cropping {p} px leaves nothing of a {}x{} camera",
            self.cols,
            self.rows
        );
        Self::new(
            self.rows - 2 * p,
            self.cols - 2 * p,
            self.readout,
            self.midpoint,
        )
    }

    pub(crate) fn check_image(&self, img: &Image, what: &str) -> Result<()> {
        ensure!(
            img.width() == self.cols && img.height() == self.rows,
            Shape,
            "{what} is {}x{}, camera is {}x{}",
            img.width(),
            img.height(),
            self.cols,
            self.rows
        );
        Ok(())
    }
}

/// Latent global-shutter frames with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct GsSequence {
    frames: Vec<Image>,
    timestamps: Vec<f64>,
}

impl GsSequence {
    pub fn new(frames: Vec<Image>, timestamps: Vec<f64>) -> Result<Self> {
        ensure!(!frames.is_empty(), Shape, "sequence has no frames");
        ensure!(
            frames.len() == timestamps.len(),
            Shape,
            "{} frames but {} timestamps",
            frames.len(),
            timestamps.len()
        );
        for (i, f) in frames.iter().enumerate() {
            frames[0].check_same_shape(f, &alloc::format!("frame {i}"))?;
            ensure!(
                f.in_unit_range(),
                Domain,
                "frame {i} has values outside [0, 1]"
            );
        }
        ensure!(
            timestamps.windows(2).all(|w| w[0] < w[1]),
            Timing,
            "timestamps must be strictly increasing"
        );
        Ok(Self { frames, timestamps })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }
}

/// A rolling-shutter image in physical row coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RsImage {
    pub pixels: Image,
    pub direction: ScanDirection,
    pub config: CameraConfig,
}

impl RsImage {
    pub fn new(pixels: Image, direction: ScanDirection, config: CameraConfig) -> Result<Self> {
        config.check_image(&pixels, "RS image")?;
        ensure!(
            pixels.in_unit_range(),
            Domain,
            "RS image has values outside [0, 1]"
        );
        Ok(Self {
            pixels,
            direction,
            config,
        })
    }

    /// Centre crop keeping the scan direction; the config shrinks to match.
    pub fn cropped(&self, p: usize) -> Result<Self> {
        let config = self.config.cropped(p)?;
        let pixels = self
            .pixels
            .crop_border(p)
            .expect("config crop checked size");
        Ok(Self {
            pixels,
            direction: self.direction,
            config,
        })
    }
}

/// Signed time displacement `D` between the GS instant of 1-based row `m` and
/// every row of an RS image scanned in `direction`, normalized by the readout
/// span.
///
/// t2b: `D[i] = (i - m) / (H - 1)`; b2t: `D[i] = ((H - i) - (m - 1)) / (H - 1)`
/// with 1-based `i`.
pub fn time_displacement(rows: usize, m: usize, direction: ScanDirection) -> Result<TimeMap> {
    ensure!(
        rows >= 2,
        Degenerate,
        "time displacement needs at least 2 rows, got {rows}"
    );
    ensure!(
        (1..=rows).contains(&m),
        Domain,
        "row {m} outside 1..={rows}"
    );
    let span = (rows - 1) as f64;
    let values = (1..=rows)
        .map(|i| {
            let num = match direction {
                ScanDirection::TopToBottom => i as f64 - m as f64,
                ScanDirection::BottomToTop => (rows - i) as f64 - (m - 1) as f64,
            };
            (num / span) as f32
        })
        .collect();
    Ok(TimeMap::new(values))
}

/// Simulates the dual capture from a frame stack with one GS frame per row
/// instant. Frame `i` (0-based) must be timestamped at `instant_time(i + 1)`
/// to within `tau / 100`.
pub fn capture_dual_rs(seq: &GsSequence, config: &CameraConfig) -> Result<(RsImage, RsImage)> {
    let h = config.rows();
    ensure!(
        seq.len() == h,
        Shape,
        "frame-stack capture needs exactly {h} frames, got {}",
        seq.len()
    );
    config.check_image(&seq.frames()[0], "GS frame")?;
    for (i, &ts) in seq.timestamps().iter().enumerate() {
        let expected = config.instant_time(i + 1);
        ensure!(
            libm::fabs(ts - expected) <= config.readout() / 100.0,
            Timing,
            "frame {} timestamped {ts}, row instant is {expected}",
            i + 1
        );
    }
    let capture = |direction: ScanDirection| {
        let mut out = Image::new(config.cols(), h, seq.frames()[0].channels());
        for row in 0..h {
            let frame = &seq.frames()[direction.instant_of_row(row, h)];
            out.row_mut(row).copy_from_slice(frame.row(row));
        }
        RsImage {
            pixels: out,
            direction,
            config: *config,
        }
    };
    Ok((
        capture(ScanDirection::TopToBottom),
        capture(ScanDirection::BottomToTop),
    ))
}

fn check_base(base: &Image) -> Result<()> {
    ensure!(
        base.in_unit_range(),
        Domain,
        "base image has values outside [0, 1]"
    );
    Ok(())
}

/// GS frame at readout fraction `s`: `base` sampled at `x - s V(x)`.
pub fn render_gs(base: &Image, model: &MotionModel, s: f64) -> Result<Image> {
    check_base(base)?;
    let motion = model.evaluate(base.width(), base.height())?;
    let mut out = Image::new(base.width(), base.height(), base.channels());
    for y in 0..base.height() {
        render_row(base, &motion, s, y, &mut out);
    }
    out.clamp_unit();
    Ok(out)
}

fn render_row(base: &Image, motion: &crate::FlowField, s: f64, y: usize, out: &mut Image) {
    let c = base.channels();
    let row = out.row_mut(y);
    for x in 0..base.width() {
        let [u, v] = motion.get(x, y);
        let sx = (x as f64 - s * u as f64) as f32;
        let sy = (y as f64 - s * v as f64) as f32;
        base.sample_bilinear(sx, sy, &mut row[x * c..(x + 1) * c]);
    }
}

/// RS image of `base` moving under `model`, rendered row by row: physical row
/// `r` is sampled from `base` displaced by `V(x, s_r)` where `s_r` is the
/// readout fraction of that row for `direction`.
pub fn render_rs_analytic(
    base: &Image,
    model: &MotionModel,
    config: &CameraConfig,
    direction: ScanDirection,
) -> Result<RsImage> {
    check_base(base)?;
    config.check_image(base, "base image")?;
    let motion = model.evaluate(base.width(), base.height())?;
    let mut out = Image::new(base.width(), base.height(), base.channels());
    for y in 0..config.rows() {
        render_row(
            base,
            &motion,
            direction.row_fraction(y, config.rows()),
            y,
            &mut out,
        );
    }
    out.clamp_unit();
    Ok(RsImage {
        pixels: out,
        direction,
        config: *config,
    })
}

/// One GS frame per row instant, timestamped for [`capture_dual_rs`].
pub fn frame_stack(base: &Image, model: &MotionModel, config: &CameraConfig) -> Result<GsSequence> {
    config.check_image(base, "base image")?;
    let h = config.rows();
    let frames = (0..h)
        .map(|i| render_gs(base, model, i as f64 / (h - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    let timestamps = (1..=h).map(|i| config.instant_time(i)).collect();
    GsSequence::new(frames, timestamps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f32], b: &[f32]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6)
    }

    #[test]
    fn displacement_examples() {
        let t2b = time_displacement(5, 3, ScanDirection::TopToBottom).unwrap();
        assert!(close(t2b.values(), &[-0.5, -0.25, 0.0, 0.25, 0.5]));
        let b2t = time_displacement(5, 3, ScanDirection::BottomToTop).unwrap();
        assert!(close(b2t.values(), &[0.5, 0.25, 0.0, -0.25, -0.5]));
        let two = time_displacement(2, 1, ScanDirection::TopToBottom).unwrap();
        assert_eq!(two.values(), &[0.0, 1.0]);
    }

    #[test]
    fn displacement_errors() {
        assert!(matches!(
            time_displacement(1, 1, ScanDirection::TopToBottom),
            Err(crate::Error::Degenerate(_))
        ));
        assert!(matches!(
            time_displacement(5, 6, ScanDirection::TopToBottom),
            Err(crate::Error::Domain(_))
        ));
        assert!(matches!(
            time_displacement(5, 0, ScanDirection::BottomToTop),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn camera_times() {
        let cfg = CameraConfig::new(5, 3, 0.5, 10.0).unwrap();
        assert_eq!(cfg.start_time(), 9.0);
        assert_eq!(cfg.end_time(), 11.0);
        assert_eq!(cfg.instant_time(1), 9.0);
        assert_eq!(cfg.instant_time(5), 11.0);
        assert!(CameraConfig::new(1, 3, 0.5, 0.0).is_err());
        assert!(CameraConfig::new(4, 3, 0.0, 0.0).is_err());
    }

    fn stack(frames: Vec<Image>, cfg: &CameraConfig) -> GsSequence {
        let ts = (1..=frames.len()).map(|i| cfg.instant_time(i)).collect();
        GsSequence::new(frames, ts).unwrap()
    }

    #[test]
    fn capture_static_scene_is_identity() {
        let x = Image::from_fn(6, 4, 3, |x, y, c| ((x + 2 * y + c) % 7) as f32 / 7.0);
        let cfg = CameraConfig::unit(4, 6).unwrap();
        let (t2b, b2t) = capture_dual_rs(&stack(vec![x.clone(); 4], &cfg), &cfg).unwrap();
        assert_eq!(t2b.pixels, x);
        assert_eq!(b2t.pixels, x);
    }

    #[test]
    fn capture_unrolls_rows() {
        let cfg = CameraConfig::unit(3, 2).unwrap();
        let frames: Vec<_> = (0..3)
            .map(|k| Image::from_fn(2, 3, 1, |_, y, _| (10 * k + y) as f32 / 100.0))
            .collect();
        let (t2b, b2t) = capture_dual_rs(&stack(frames, &cfg), &cfg).unwrap();
        // t2b rows = [A.row1, B.row2, C.row3]
        assert_eq!(t2b.pixels.get(0, 0, 0), 0.00);
        assert_eq!(t2b.pixels.get(0, 1, 0), 0.11);
        assert_eq!(t2b.pixels.get(0, 2, 0), 0.22);
        // b2t physical row r is exposed at instant H - r + 1
        assert_eq!(b2t.pixels.get(0, 0, 0), 0.20);
        assert_eq!(b2t.pixels.get(0, 1, 0), 0.11);
        assert_eq!(b2t.pixels.get(0, 2, 0), 0.02);
    }

    #[test]
    fn capture_moving_line_oracle() {
        // Frame i (1-based) has a vertical line at column c0 + i - 1.
        let (h, w, c0) = (4usize, 10usize, 2usize);
        let cfg = CameraConfig::unit(h, w).unwrap();
        let frames: Vec<_> = (1..=h)
            .map(|i| Image::from_fn(w, h, 1, |x, _, _| (x == c0 + i - 1) as u8 as f32))
            .collect();
        let (t2b, b2t) = capture_dual_rs(&stack(frames, &cfg), &cfg).unwrap();
        for r in 1..=h {
            for x in 0..w {
                let t_expect = (x == c0 + r - 1) as u8 as f32;
                let b_expect = (x == c0 + (h - r)) as u8 as f32;
                assert_eq!(t2b.pixels.get(x, r - 1, 0), t_expect, "t2b row {r} col {x}");
                assert_eq!(b2t.pixels.get(x, r - 1, 0), b_expect, "b2t row {r} col {x}");
            }
        }
    }

    #[test]
    fn capture_rejects_bad_stacks() {
        let cfg = CameraConfig::new(3, 2, 0.1, 0.0).unwrap();
        let img = Image::new(2, 3, 1);
        let short = GsSequence::new(vec![img.clone(); 2], vec![0.0, 0.1]).unwrap();
        assert!(matches!(
            capture_dual_rs(&short, &cfg),
            Err(crate::Error::Shape(_))
        ));
        let skewed = GsSequence::new(vec![img; 3], vec![-0.1, 0.005, 0.1]).unwrap();
        assert!(matches!(
            capture_dual_rs(&skewed, &cfg),
            Err(crate::Error::Timing(_))
        ));
    }

    #[test]
    fn analytic_identity_and_row_shifts() {
        let (h, w) = (9usize, 32usize);
        let cfg = CameraConfig::unit(h, w).unwrap();
        let ramp = Image::from_fn(w, h, 1, |x, _, _| x as f32 / w as f32);
        let still = render_rs_analytic(
            &ramp,
            &MotionModel::translation(0.0, 0.0),
            &cfg,
            ScanDirection::TopToBottom,
        )
        .unwrap();
        assert_eq!(still.pixels, ramp);

        // One pixel per row: row r shifts right by r pixels (t2b) or H-1-r (b2t).
        let model = MotionModel::translation((h - 1) as f64, 0.0);
        for dir in [ScanDirection::TopToBottom, ScanDirection::BottomToTop] {
            let rs = render_rs_analytic(&ramp, &model, &cfg, dir).unwrap();
            for r in 0..h {
                let shift = match dir {
                    ScanDirection::TopToBottom => r,
                    ScanDirection::BottomToTop => h - 1 - r,
                };
                for x in 0..w {
                    let src = x.saturating_sub(shift);
                    assert_eq!(
                        rs.pixels.get(x, r, 0),
                        ramp.get(src, r, 0),
                        "{dir:?} ({x},{r})"
                    );
                }
            }
        }
    }

    #[test]
    fn analytic_matches_frame_stack_capture() {
        let (h, w) = (12usize, 20usize);
        let cfg = CameraConfig::new(h, w, 2e-5, 1.0).unwrap();
        let base = Image::from_fn(w, h, 2, |x, y, c| {
            0.5 + 0.4 * libm::sinf(0.3 * x as f32 + 0.2 * y as f32 + c as f32)
        });
        let model = MotionModel::translation(2.0 * (h - 1) as f64, -((h - 1) as f64));
        let seq = frame_stack(&base, &model, &cfg).unwrap();
        let (t2b, b2t) = capture_dual_rs(&seq, &cfg).unwrap();
        let a_t2b = render_rs_analytic(&base, &model, &cfg, ScanDirection::TopToBottom).unwrap();
        let a_b2t = render_rs_analytic(&base, &model, &cfg, ScanDirection::BottomToTop).unwrap();
        assert!(t2b.pixels.max_abs_diff(&a_t2b.pixels) < 1e-6);
        assert!(b2t.pixels.max_abs_diff(&a_b2t.pixels) < 1e-6);
    }
}
