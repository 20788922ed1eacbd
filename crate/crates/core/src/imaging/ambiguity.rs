//! Single-direction RS ambiguity: a tilted rod seen by one moving camera can
//! produce exactly the RS image of a vertical rod seen by another.
//!
//! With content moving horizontally at `v` px/s and rows read every `tau`
//! seconds, a rod whose GS centre line is `x0 + y tan(theta)` appears in
//! row `r` of a top-to-bottom RS image at `x0 + r (tan(theta) + v tau)`.
//! A tilted rod under `(v1, tau1)` and a vertical rod under `(v2, tau2)`
//! therefore coincide when `tan(theta) = v2 tau2 - v1 tau1`.

use crate::error::{ensure, Result};
use crate::image::Image;
use crate::imaging::{CameraConfig, RsImage, ScanDirection};

/// Raster and rod geometry shared by both views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityScene {
    pub rows: usize,
    pub cols: usize,
    /// Horizontal rod thickness in pixels.
    pub rod_width: f64,
}

impl Default for AmbiguityScene {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            rod_width: 3.0,
        }
    }
}

/// One camera looking at one rod.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodView {
    pub tilt_deg: f64,
    pub speed: f64,
    pub readout: f64,
}

// Rod positions are snapped to this grid so that slopes equal up to
// floating-point rounding rasterize identically.
const SNAP: f64 = 1024.0;

/// Tilt (degrees) that makes the rod under `(v1, tau1)` match a vertical rod
/// under `(v2, tau2)`.
pub fn solve_tilt(speeds: (f64, f64), readouts: (f64, f64)) -> Result<f64> {
    let (v1, v2) = speeds;
    let (t1, t2) = readouts;
    ensure!(
        v1.is_finite() && v2.is_finite(),
        Domain,
        "speeds must be finite, got ({v1}, {v2})"
    );
    ensure!(
        t1.is_finite() && t2.is_finite() && t1 > 0.0 && t2 > 0.0,
        Domain,
        "readouts must be positive, got ({t1}, {t2})"
    );
    Ok(libm::atan(v2 * t2 - v1 * t1).to_degrees())
}

fn rasterize(scene: &AmbiguityScene, view: &RodView, x0: f64) -> Result<Image> {
    let slope = libm::tan(view.tilt_deg.to_radians()) + view.speed * view.readout;
    let half = scene.rod_width / 2.0;
    let mut img = Image::new(scene.cols, scene.rows, 1);
    for r in 0..scene.rows {
        let xc = libm::round((x0 + r as f64 * slope) * SNAP) / SNAP;
        let (lo, hi) = (xc - half, xc + half);
        ensure!(
            lo >= 0.0 && hi <= scene.cols as f64,
            Domain,
            "rod leaves the {}-column frame at row {r} (centre {xc:.3}); the views only \
             match when tan(tilt) = v2*tau2 - v1*tau1 px/row and |v2*tau2|*(H-1) + rod width \
             fits in the frame",
            scene.cols
        );
        for x in 0..scene.cols {
            let cover = (hi.min(x as f64 + 1.0) - lo.max(x as f64)).max(0.0);
            img.set(x, r, 0, cover.min(1.0) as f32);
        }
    }
    Ok(img)
}

/// Renders the tilted rod under `(v1, tau1)` and the vertical rod under
/// `(v2, tau2)` as top-to-bottom RS images.
///
/// Both rods share the same position at the first readout instant, centred so
/// that the vertical rod's RS streak sits in the middle of the frame.
pub fn ambiguity_pair(
    scene: &AmbiguityScene,
    tilt_deg: f64,
    speeds: (f64, f64),
    readouts: (f64, f64),
) -> Result<(RsImage, RsImage)> {
    solve_tilt(speeds, readouts)?;
    ensure!(
        tilt_deg.is_finite() && libm::fabs(tilt_deg) < 90.0,
        Domain,
        "tilt must lie in (-90, 90) degrees, got {tilt_deg}"
    );
    ensure!(
        scene.rod_width > 0.0 && scene.rod_width < scene.cols as f64,
        Domain,
        "rod width must be positive and narrower than the frame"
    );
    let tilted = RodView {
        tilt_deg,
        speed: speeds.0,
        readout: readouts.0,
    };
    let vertical = RodView {
        tilt_deg: 0.0,
        speed: speeds.1,
        readout: readouts.1,
    };
    let streak = vertical.speed * vertical.readout * (scene.rows - 1) as f64;
    let x0 = libm::round((scene.cols as f64 / 2.0 - streak / 2.0) * SNAP) / SNAP;
    let view = |v: &RodView| -> Result<RsImage> {
        let cfg = CameraConfig::new(scene.rows, scene.cols, v.readout, 0.0)?;
        RsImage::new(rasterize(scene, v, x0)?, ScanDirection::TopToBottom, cfg)
    };
    Ok((view(&tilted)?, view(&vertical)?))
}

/// Largest absolute difference over pixels covered by either rod.
pub fn rod_max_diff(a: &Image, b: &Image) -> f32 {
    a.data()
        .iter()
        .zip(b.data())
        .filter(|(x, y)| **x > 0.0 || **y > 0.0)
        .fold(0.0f32, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_camera_no_tilt() {
        let scene = AmbiguityScene::default();
        let tilt = solve_tilt((3000.0, 3000.0), (87e-6, 87e-6)).unwrap();
        assert_eq!(tilt, 0.0);
        let (a, b) = ambiguity_pair(&scene, tilt, (3000.0, 3000.0), (87e-6, 87e-6)).unwrap();
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn double_speed_half_readout() {
        let scene = AmbiguityScene::default();
        let (v1, t1) = (2000.0, 1e-4);
        let tilt = solve_tilt((v1, 2.0 * v1), (t1, t1 / 2.0)).unwrap();
        let (a, b) = ambiguity_pair(&scene, tilt, (v1, 2.0 * v1), (t1, t1 / 2.0)).unwrap();
        assert_eq!(rod_max_diff(&a.pixels, &b.pixels), 0.0);
    }

    #[test]
    fn static_vertical_camera() {
        let scene = AmbiguityScene::default();
        let (v1, t1) = (3000.0, 87e-6);
        let tilt = solve_tilt((v1, 0.0), (t1, t1)).unwrap();
        assert!((tilt.abs() - libm::atan(v1 * t1).to_degrees()).abs() < 1e-12);
        let (a, b) = ambiguity_pair(&scene, tilt, (v1, 0.0), (t1, t1)).unwrap();
        assert_eq!(a.pixels, b.pixels);
        // rod covers something in every row
        for r in 0..scene.rows {
            assert!(a.pixels.row(r).iter().any(|&v| v > 0.0));
        }
    }

    #[test]
    fn one_degree_perturbation_breaks_identity() {
        let scene = AmbiguityScene::default();
        let tilt = solve_tilt((4000.0, 2000.0), (87e-6, 87e-6)).unwrap();
        for delta in [-1.0, 1.0] {
            let (a, b) =
                ambiguity_pair(&scene, tilt + delta, (4000.0, 2000.0), (87e-6, 87e-6)).unwrap();
            assert!(rod_max_diff(&a.pixels, &b.pixels) > 0.1);
        }
    }

    #[test]
    fn rod_out_of_frame_is_reported() {
        let scene = AmbiguityScene::default();
        let err = ambiguity_pair(&scene, 0.0, (0.0, 1e6), (1e-4, 1e-4)).unwrap_err();
        assert!(matches!(err, crate::Error::Domain(_)));
    }
}
