//! Sampling primitives shared by the distortion warping and the corrector.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};
use crate::image::{FlowField, Image};

/// Default Gaussian width for splat weights, in pixels.
pub const DEFAULT_SIGMA: f64 = 1.0;

/// `output(x) = image(x + flow(x))`, bilinear with replicate-clamp borders.
pub fn backwarp(image: &Image, flow: &FlowField) -> Result<Image> {
    ensure!(
        image.width() == flow.width() && image.height() == flow.height(),
        Shape,
        "image is {}x{}, flow is {}x{}",
        image.width(),
        image.height(),
        flow.width(),
        flow.height()
    );
    ensure!(flow.is_finite(), Domain, "flow contains non-finite vectors");
    let mut out = Image::new(image.width(), image.height(), image.channels());
    for y in 0..image.height() {
        backwarp_row(image, flow, y, out.row_mut(y));
    }
    Ok(out)
}

/// Row `y` of [`backwarp`]; shapes are the caller's responsibility.
pub(crate) fn backwarp_row(image: &Image, flow: &FlowField, y: usize, out: &mut [f32]) {
    let c = image.channels();
    let w = image.width();
    let vectors = &flow.data()[y * w..(y + 1) * w];
    for (x, (o, &[u, v])) in out.chunks_exact_mut(c).zip(vectors).enumerate() {
        image.sample_bilinear(x as f32 + u, y as f32 + v, o);
    }
}

/// Round half away from zero, independent of the platform rounding mode.
#[inline]
pub fn round_half_away(v: f64) -> f64 {
    if !v.is_finite() || v.abs() >= 4.5e15 {
        return v;
    }
    let a = v.abs();
    let t = a as i64 as f64;
    let r = if a - t >= 0.5 { t + 1.0 } else { t };
    r.copysign(v)
}

/// Where each source pixel lands when pushed along a carrier flow.
///
/// Source `y` targets the single pixel `round(y + carrier(y))` with Gaussian
/// weight `exp(-d^2 / (2 sigma^2))`, `d` being the distance between that
/// pixel and the unrounded landing point. Sources landing outside the grid
/// contribute nothing.
#[derive(Debug, Clone)]
pub struct SplatPlan {
    width: usize,
    height: usize,
    targets: Vec<Option<(usize, f64)>>,
}

impl SplatPlan {
    pub fn new(carrier: &FlowField, sigma: f64) -> Result<Self> {
        ensure!(
            sigma.is_finite() && sigma > 0.0,
            Domain,
            "splat sigma must be positive, got {sigma}"
        );
        ensure!(
            carrier.is_finite(),
            Domain,
            "carrier flow contains non-finite vectors"
        );
        let (w, h) = (carrier.width(), carrier.height());
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut targets = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let [u, v] = carrier.get(x, y);
                let px = x as f64 + u as f64;
                let py = y as f64 + v as f64;
                let (tx, ty) = (round_half_away(px), round_half_away(py));
                let inside = tx >= 0.0 && ty >= 0.0 && tx < w as f64 && ty < h as f64;
                targets.push(inside.then(|| {
                    let d2 = (tx - px) * (tx - px) + (ty - py) * (ty - py);
                    (ty as usize * w + tx as usize, libm::exp(-d2 * inv))
                }));
            }
        }
        Ok(Self {
            width: w,
            height: h,
            targets,
        })
    }

    /// Per-target sum of weights. Zero marks a hole.
    pub fn weight_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.width * self.height];
        for &(t, w) in self.targets.iter().flatten() {
            sum[t] += w;
        }
        sum
    }

    /// Per-target weighted sum of `values`, accumulated in row-major source
    /// order.
    pub fn accumulate(&self, values: &FlowField) -> Result<Vec<[f64; 2]>> {
        ensure!(
            values.width() == self.width && values.height() == self.height,
            Shape,
            "splat values are {}x{}, carrier is {}x{}",
            values.width(),
            values.height(),
            self.width,
            self.height
        );
        let mut acc = vec![[0.0f64; 2]; self.width * self.height];
        for (src, target) in self.targets.iter().enumerate() {
            if let Some((t, w)) = *target {
                let [u, v] = values.data()[src];
                acc[t][0] += w * u as f64;
                acc[t][1] += w * v as f64;
            }
        }
        Ok(acc)
    }

    /// Landing pixel and weight of each source, `None` when out of bounds.
    pub fn targets(&self) -> &[Option<(usize, f64)>] {
        &self.targets
    }
}

/// Accumulated values and weights from a forward splat.
#[derive(Debug, Clone)]
pub struct Splat {
    pub accumulated: Vec<[f64; 2]>,
    pub weight_sum: Vec<f64>,
}

impl Splat {
    pub fn holes(&self) -> Vec<bool> {
        self.weight_sum.iter().map(|&w| w == 0.0).collect()
    }
}

/// Forward-splats the 2-vectors `values` along `carrier`.
pub fn forward_splat(values: &FlowField, carrier: &FlowField, sigma: f64) -> Result<Splat> {
    let plan = SplatPlan::new(carrier, sigma)?;
    Ok(Splat {
        accumulated: plan.accumulate(values)?,
        weight_sum: plan.weight_sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 1, |x, _, _| x as f32)
    }

    #[test]
    fn zero_flow_is_identity() {
        let img = Image::from_fn(7, 5, 3, |x, y, c| (x * 31 + y * 7 + c) as f32 * 0.01);
        let out = backwarp(&img, &FlowField::zeros(7, 5)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn unit_shift_clamps_last_column() {
        let (w, h) = (6, 3);
        let out = backwarp(&ramp(w, h), &FlowField::constant(w, h, [1.0, 0.0])).unwrap();
        for y in 0..h {
            for x in 0..w {
                assert_eq!(out.get(x, y, 0), (x + 1).min(w - 1) as f32);
            }
        }
    }

    #[test]
    fn half_shift_interpolates() {
        let (w, h) = (6, 3);
        let out = backwarp(&ramp(w, h), &FlowField::constant(w, h, [0.5, 0.0])).unwrap();
        for x in 0..w - 1 {
            assert_eq!(out.get(x, 1, 0), x as f32 + 0.5);
        }
    }

    #[test]
    fn backwarp_rejects_bad_input() {
        let img = ramp(4, 4);
        assert!(matches!(
            backwarp(&img, &FlowField::zeros(3, 4)),
            Err(crate::Error::Shape(_))
        ));
        let nan = FlowField::constant(4, 4, [f32::NAN, 0.0]);
        assert!(matches!(backwarp(&img, &nan), Err(crate::Error::Domain(_))));
    }

    fn index_field(w: usize, h: usize) -> FlowField {
        FlowField::from_fn(w, h, |x, y| [x as f32, y as f32 * 100.0])
    }

    #[test]
    fn self_splat() {
        let (w, h) = (5, 4);
        let s = forward_splat(&index_field(w, h), &FlowField::zeros(w, h), 1.0).unwrap();
        assert!(s.weight_sum.iter().all(|&v| v == 1.0));
        for (i, acc) in s.accumulated.iter().enumerate() {
            assert_eq!(*acc, [(i % w) as f64, (i / w) as f64 * 100.0]);
        }
    }

    #[test]
    fn integer_shift_leaves_left_holes() {
        let (w, h) = (8, 3);
        let vals = index_field(w, h);
        let s = forward_splat(&vals, &FlowField::constant(w, h, [2.0, 0.0]), 1.0).unwrap();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x < 2 {
                    assert_eq!(s.weight_sum[i], 0.0);
                    assert_eq!(s.accumulated[i], [0.0, 0.0]);
                } else {
                    assert_eq!(s.weight_sum[i], 1.0);
                    assert_eq!(s.accumulated[i], [(x - 2) as f64, y as f64 * 100.0]);
                }
            }
        }
        assert_eq!(s.holes().iter().filter(|&&b| b).count(), 2 * h);
    }

    #[test]
    fn half_pixel_rounds_away_from_zero() {
        let (w, h) = (6, 2);
        let s = forward_splat(
            &index_field(w, h),
            &FlowField::constant(w, h, [0.5, 0.0]),
            1.0,
        )
        .unwrap();
        let g = libm::exp(-0.25 / 2.0);
        assert!((g - 0.8825).abs() < 1e-4);
        assert_eq!(s.weight_sum[0], 0.0);
        for x in 1..w {
            assert!((s.weight_sum[x] - g).abs() < 1e-15);
            assert!((s.accumulated[x][0] - g * (x - 1) as f64).abs() < 1e-12);
        }
        // negative half rounds towards -inf
        assert_eq!(round_half_away(-0.5), -1.0);
        assert_eq!(round_half_away(2.5), 3.0);
    }

    fn field(w: usize, h: usize) -> impl Strategy<Value = FlowField> {
        proptest::collection::vec((-4.0f32..4.0, -4.0f32..4.0), w * h).prop_map(move |v| {
            FlowField::from_vec(w, h, v.into_iter().map(|(a, b)| [a, b]).collect()).unwrap()
        })
    }

    fn image(w: usize, h: usize) -> impl Strategy<Value = Image> {
        proptest::collection::vec(0.0f32..1.0, w * h * 2)
            .prop_map(move |v| Image::from_vec(w, h, 2, v).unwrap())
    }

    proptest! {
        #[test]
        fn backwarp_is_linear(x in image(6, 5), y in image(6, 5), f in field(6, 5),
                              a in -2.0f32..2.0, b in -2.0f32..2.0) {
            let mix = Image::from_vec(6, 5, 2, x.data().iter().zip(y.data())
                .map(|(p, q)| a * p + b * q).collect()).unwrap();
            let lhs = backwarp(&mix, &f).unwrap();
            let wx = backwarp(&x, &f).unwrap();
            let wy = backwarp(&y, &f).unwrap();
            for i in 0..lhs.data().len() {
                let rhs = a * wx.data()[i] + b * wy.data()[i];
                prop_assert!((lhs.data()[i] - rhs).abs() < 1e-5);
            }
        }

        #[test]
        fn splat_mass_is_conserved(carrier in field(7, 6), sigma in 0.3f64..3.0) {
            let plan = SplatPlan::new(&carrier, sigma).unwrap();
            let total: f64 = plan.weight_sum().iter().sum();
            let sources: f64 = plan.targets().iter().flatten().map(|&(_, w)| w).sum();
            prop_assert!((total - sources).abs() < 1e-9);
        }

        #[test]
        fn splat_is_deterministic(carrier in field(5, 5), vals in field(5, 5)) {
            let a = forward_splat(&vals, &carrier, 1.0).unwrap();
            let b = forward_splat(&vals, &carrier, 1.0).unwrap();
            prop_assert_eq!(a.accumulated, b.accumulated);
            prop_assert_eq!(a.weight_sum, b.weight_sum);
        }
    }
}
