//! Objective terms and image-quality metrics.

use alloc::vec;
use alloc::vec::Vec;

use crate::bdwarp::Reconstruction;
use crate::error::{ensure, Error, Result};
use crate::image::Image;

/// Weight reserved for the perceptual term when a feature transform is
/// supplied.
pub const PERCEPTUAL_WEIGHT: f64 = 0.1;

/// Smallest side length left after boundary cropping.
pub const MIN_CROPPED_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub charbonnier: f64,
    /// Zero disables the perceptual term even when a transform is attached.
    pub perceptual: f64,
    /// Charbonnier `epsilon`; a perfect reconstruction scores exactly this.
    pub eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            charbonnier: 1.0,
            perceptual: 0.0,
            eps: 1e-3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.charbonnier >= 0.0 && self.perceptual >= 0.0,
            Domain,
            "loss weights must be non-negative"
        );
        ensure!(
            self.eps > 0.0 && self.eps.is_finite(),
            Domain,
            "Charbonnier epsilon must be positive, got {}",
            self.eps
        );
        Ok(())
    }
}

/// Maps an image to a feature vector for the perceptual term.
pub trait FeatureTransform {
    fn features(&self, image: &Image) -> Vec<f32>;
}

/// The per-pair image loss `l`: weighted Charbonnier plus an optional
/// perceptual term, evaluated away from a `border`-pixel frame.
#[derive(Clone, Copy, Default)]
pub struct PixelLoss<'a> {
    pub weights: LossWeights,
    pub features: Option<&'a dyn FeatureTransform>,
    /// Pixels this close to the image edge are excluded from the mean.
    pub border: usize,
}

impl core::fmt::Debug for PixelLoss<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PixelLoss")
            .field("weights", &self.weights)
            .field("features", &self.features.is_some())
            .field("border", &self.border)
            .finish()
    }
}

impl<'a> PixelLoss<'a> {
    pub fn new(weights: LossWeights) -> Self {
        Self {
            weights,
            features: None,
            border: 0,
        }
    }

    /// Loss between `pred` and `target` over pixels not flagged in `exclude`.
    /// Returns the value and the number of pixels it averaged over.
    pub fn eval(
        &self,
        pred: &Image,
        target: &Image,
        exclude: Option<&[bool]>,
    ) -> Result<(f64, usize)> {
        let keep = self.keep_mask(pred, exclude)?;
        let (charb, n) = charbonnier_where(pred, target, self.weights.eps, keep.as_deref())?;
        let mut value = self.weights.charbonnier * charb;
        if let Some(tf) = self.features.filter(|_| self.weights.perceptual > 0.0) {
            let (fa, fb) = (tf.features(pred), tf.features(target));
            ensure!(
                fa.len() == fb.len() && !fa.is_empty(),
                Shape,
                "feature vectors have lengths {} and {}",
                fa.len(),
                fb.len()
            );
            let mse = fa
                .iter()
                .zip(&fb)
                .map(|(a, b)| {
                    let d = (*a - *b) as f64;
                    d * d
                })
                .sum::<f64>()
                / fa.len() as f64;
            value += self.weights.perceptual * mse;
        }
        Ok((value, n))
    }

    fn keep_mask(&self, img: &Image, exclude: Option<&[bool]>) -> Result<Option<Vec<bool>>> {
        let (w, h) = (img.width(), img.height());
        if let Some(ex) = exclude {
            ensure!(
                ex.len() == w * h,
                Shape,
                "exclusion mask has {} entries, image has {} pixels",
                ex.len(),
                w * h
            );
        }
        if self.border == 0 && exclude.is_none() {
            return Ok(None);
        }
        let b = self.border;
        let mut keep = vec![true; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let edge = x < b || y < b || x + b >= w || y + b >= h;
                keep[i] = !edge && !exclude.is_some_and(|ex| ex[i]);
            }
        }
        Ok(Some(keep))
    }
}

fn charbonnier_where(
    a: &Image,
    b: &Image,
    eps: f64,
    keep: Option<&[bool]>,
) -> Result<(f64, usize)> {
    a.check_same_shape(b, "Charbonnier operands")?;
    let c = a.channels();
    let eps2 = eps * eps;
    let mut sum = 0.0f64;
    let mut pixels = 0usize;
    for (p, (pa, pb)) in a
        .data()
        .chunks_exact(c)
        .zip(b.data().chunks_exact(c))
        .enumerate()
    {
        if keep.is_some_and(|k| !k[p]) {
            continue;
        }
        pixels += 1;
        for (x, y) in pa.iter().zip(pb) {
            let d = (*x - *y) as f64;
            sum += libm::sqrt(d * d + eps2);
        }
    }
    ensure!(
        pixels > 0,
        Domain,
        "no pixels left to compare after masking"
    );
    Ok((sum / (pixels * c) as f64, pixels))
}

/// Mean over pixels and channels of `sqrt((a - b)^2 + eps^2)`.
pub fn charbonnier(a: &Image, b: &Image, eps: f64) -> Result<f64> {
    charbonnier_where(a, b, eps, None).map(|(v, _)| v)
}

/// Loss terms of one objective evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_se: f64,
    pub l_sme: f64,
    pub l_self: f64,
    pub l_sd: f64,
    pub total: f64,
    pub pixels_se: usize,
    pub pixels_sme: usize,
    pub pixels_sd: usize,
}

/// Input and rebuilt images for one scan direction.
#[derive(Debug, Clone, Copy)]
pub struct DualRecon<'a> {
    pub t2b: &'a Reconstruction,
    pub b2t: &'a Reconstruction,
}

/// Cycle-consistency loss of rebuilt RS images against the inputs.
///
/// `l_se` scores the endpoint reconstructions, `l_sme` the intermediate ones
/// (averaged when several split rows are given, zero when none are). Hole
/// pixels are excluded.
pub fn self_supervised_loss(
    input_t2b: &Image,
    input_b2t: &Image,
    endpoints: DualRecon<'_>,
    intermediates: &[DualRecon<'_>],
    loss: &PixelLoss<'_>,
) -> Result<LossBreakdown> {
    let term = |r: DualRecon<'_>| -> Result<(f64, usize)> {
        let (a, na) = loss.eval(&r.t2b.pixels, input_t2b, Some(&r.t2b.holes))?;
        let (b, nb) = loss.eval(&r.b2t.pixels, input_b2t, Some(&r.b2t.holes))?;
        Ok((a + b, na + nb))
    };
    let (l_se, pixels_se) = term(endpoints)?;
    let mut l_sme = 0.0;
    let mut pixels_sme = 0;
    for r in intermediates {
        let (v, n) = term(*r)?;
        l_sme += v;
        pixels_sme += n;
    }
    if !intermediates.is_empty() {
        l_sme /= intermediates.len() as f64;
    }
    let l_self = l_se + l_sme;
    ensure!(
        l_self.is_finite(),
        NonFinite,
        "self-supervised loss evaluated to {l_self}"
    );
    Ok(LossBreakdown {
        l_se,
        l_sme,
        l_self,
        total: l_self,
        pixels_se,
        pixels_sme,
        ..LossBreakdown::default()
    })
}

/// Removes `p` pixels from every border, refusing crops that leave a side
/// shorter than [`MIN_CROPPED_SIDE`].
pub fn boundary_crop(img: &Image, p: usize) -> Result<Image> {
    let short = img.width().min(img.height());
    ensure!(
        short >= 2 * p + MIN_CROPPED_SIDE,
        Degenerate,
        "cropping {p} px from a {}x{} image leaves less than {MIN_CROPPED_SIDE} px",
        img.width(),
        img.height()
    );
    Ok(img.crop_border(p).expect("size checked"))
}

/// Sum over frame pairs of `l(C(current), C(pseudo))`.
///
/// `current` frames either match `pseudo` in size (both are cropped) or are
/// already `2p` smaller (only `pseudo` is cropped).
pub fn self_distillation_loss(
    current: &[Image],
    pseudo: &[Image],
    p: usize,
    loss: &PixelLoss<'_>,
) -> Result<f64> {
    ensure!(
        current.len() == pseudo.len(),
        Shape,
        "{} current frames but {} pseudo targets",
        current.len(),
        pseudo.len()
    );
    let mut total = 0.0;
    for (cur, ps) in current.iter().zip(pseudo) {
        let target = boundary_crop(ps, p)?;
        let value = if cur.same_shape(ps) {
            loss.eval(&boundary_crop(cur, p)?, &target, None)?.0
        } else if cur.same_shape(&target) {
            loss.eval(cur, &target, None)?.0
        } else {
            return Err(Error::Shape(alloc::format!(
                "current frame {}x{} matches neither pseudo target {}x{} nor its {p}-px crop",
                cur.width(),
                cur.height(),
                ps.width(),
                ps.height()
            )));
        };
        total += value;
    }
    Ok(total)
}

/// Objective for training stage `stage` (1-based): `l_self` alone in stage 1,
/// `l_self + l_sd` afterwards.
pub fn total_loss(stage: u32, breakdown: &LossBreakdown) -> f64 {
    debug_assert!(stage >= 1, "stages are 1-based");
    if stage <= 1 {
        breakdown.l_self
    } else {
        breakdown.l_self + breakdown.l_sd
    }
}

/// Peak signal-to-noise ratio for images in `[0, 1]`. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "PSNR operands")?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(1.0 / mse))
}

/// PSNR over the region left after dropping `border` pixels per side.
pub fn psnr_interior(a: &Image, b: &Image, border: usize) -> Result<f64> {
    a.check_same_shape(b, "PSNR operands")?;
    let (ca, cb) = (a.crop_border(border), b.crop_border(border));
    match (ca, cb) {
        (Some(ca), Some(cb)) => psnr(&ca, &cb),
        _ => Err(Error::Degenerate(alloc::format!(
            "{border}-px border leaves nothing of a {}x{} image",
            a.width(),
            a.height()
        ))),
    }
}

const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel(radius: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering of a single-channel plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|j| k[j] * plane[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|j| k[j] * tmp[(y + j) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// `C1 = 0.01^2`, `C2 = 0.03^2`, averaged over valid window positions and
/// channels. Images smaller than the window use the largest odd window that
/// fits.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "SSIM operands")?;
    let (w, h, c) = (a.width(), a.height(), a.channels());
    let radius = SSIM_RADIUS.min((w.min(h) - 1) / 2);
    let k = gaussian_kernel(radius);
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = a
            .data()
            .iter()
            .skip(ch)
            .step_by(c)
            .map(|&v| v as f64)
            .collect();
        let pb: Vec<f64> = b
            .data()
            .iter()
            .skip(ch)
            .step_by(c)
            .map(|&v| v as f64)
            .collect();
        let prod =
            |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let (mu_a, ow, oh) = filter_valid(&pa, w, h, &k);
        let (mu_b, _, _) = filter_valid(&pb, w, h, &k);
        let (aa, _, _) = filter_valid(&prod(&pa, &pa), w, h, &k);
        let (bb, _, _) = filter_valid(&prod(&pb, &pb), w, h, &k);
        let (ab, _, _) = filter_valid(&prod(&pa, &pb), w, h, &k);
        let mut sum = 0.0;
        for i in 0..ow * oh {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
        }
        total += sum / (ow * oh) as f64;
    }
    Ok(total / c as f64)
}
