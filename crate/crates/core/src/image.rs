//! Image, flow and per-row map containers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure, Result};

/// Interleaved `f32` image, row-major, `channels` values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        ensure!(
            width > 0 && height > 0 && channels > 0,
            Shape,
            "image dimensions must be positive, got {width}x{height}x{channels}"
        );
        ensure!(
            data.len() == width * height * channels,
            Shape,
            "buffer holds {} values, {width}x{height}x{channels} needs {}",
            data.len(),
            width * height * channels
        );
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        ensure!(
            self.same_shape(other),
            Shape,
            "{what}: {}x{}x{} vs {}x{}x{}",
            self.width,
            self.height,
            self.channels,
            other.width,
            other.height,
            other.channels
        );
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// All samples of row `y`.
    pub fn row(&self, y: usize) -> &[f32] {
        let n = self.width * self.channels;
        &self.data[y * n..(y + 1) * n]
    }

    pub fn row_mut(&mut self, y: usize) -> &mut [f32] {
        let n = self.width * self.channels;
        &mut self.data[y * n..(y + 1) * n]
    }

    /// The pixel at `(x, y)` as a channel slice.
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Bilinear sample at continuous position `(x, y)` with replicate-clamp
    /// borders. Writes one value per channel into `out`.
    pub fn sample_bilinear(&self, x: f32, y: f32, out: &mut [f32]) {
        let (x0, fx) = floor_frac(x);
        let (y0, fy) = floor_frac(y);
        let (wm, hm) = (self.width as i32 - 1, self.height as i32 - 1);
        let xa = x0.clamp(0, wm) as usize;
        let xb = x0.saturating_add(1).clamp(0, wm) as usize;
        let ya = y0.clamp(0, hm) as usize;
        let yb = y0.saturating_add(1).clamp(0, hm) as usize;
        let c = self.channels;
        let (ra, rb) = (ya * self.width, yb * self.width);
        let (i00, i10, i01, i11) = ((ra + xa) * c, (ra + xb) * c, (rb + xa) * c, (rb + xb) * c);
        let d = &self.data;
        for (k, o) in out[..c].iter_mut().enumerate() {
            let top = d[i00 + k] + (d[i10 + k] - d[i00 + k]) * fx;
            let bottom = d[i01 + k] + (d[i11 + k] - d[i01 + k]) * fx;
            *o = top + (bottom - top) * fy;
        }
    }

    /// Removes `p` pixels from every border. `None` if nothing would remain.
    pub fn crop_border(&self, p: usize) -> Option<Image> {
        if 2 * p >= self.width || 2 * p >= self.height {
            return None;
        }
        let (w, h) = (self.width - 2 * p, self.height - 2 * p);
        let mut out = Image::new(w, h, self.channels);
        for y in 0..h {
            let src = &self.row(y + p)[p * self.channels..(p + w) * self.channels];
            out.row_mut(y).copy_from_slice(src);
        }
        Some(out)
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// True when every sample is finite and inside `[0, 1]`.
    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Image) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Dense 2-vector displacement field in pixels with an optional hole mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
    holes: Option<Vec<bool>>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f32; 2]) -> Self {
        Self {
            width,
            height,
            data: vec![uv; width * height],
            holes: None,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        ensure!(
            data.len() == width * height,
            Shape,
            "flow buffer holds {} vectors, {width}x{height} needs {}",
            data.len(),
            width * height
        );
        Ok(Self {
            width,
            height,
            data,
            holes: None,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 2],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
            holes: None,
        }
    }

    pub fn with_holes(mut self, holes: Vec<bool>) -> Result<Self> {
        ensure!(
            holes.len() == self.data.len(),
            Shape,
            "hole mask has {} entries, flow has {}",
            holes.len(),
            self.data.len()
        );
        self.holes = Some(holes);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn holes(&self) -> Option<&[bool]> {
        self.holes.as_deref()
    }

    pub fn hole_count(&self) -> usize {
        self.holes
            .as_ref()
            .map_or(0, |h| h.iter().filter(|&&b| b).count())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|[u, v]| u.is_finite() && v.is_finite())
    }

    /// Multiplies every vector in row `y` by `rows[y]`.
    pub fn scale_rows(&self, rows: &TimeMap) -> Result<FlowField> {
        ensure!(
            rows.len() == self.height,
            Shape,
            "row map has {} rows, flow has {}",
            rows.len(),
            self.height
        );
        Ok(FlowField::from_fn(self.width, self.height, |x, y| {
            let s = rows[y];
            let [u, v] = self.get(x, y);
            [s * u, s * v]
        }))
    }

    pub fn scaled(&self, s: f32) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|[u, v]| [s * u, s * v]).collect(),
            holes: self.holes.clone(),
        }
    }

    /// Drops `p` pixels from every border, keeping the hole mask aligned.
    pub fn crop_border(&self, p: usize) -> Option<FlowField> {
        if 2 * p >= self.width || 2 * p >= self.height {
            return None;
        }
        let (w, h) = (self.width - 2 * p, self.height - 2 * p);
        let idx = |x: usize, y: usize| (y + p) * self.width + x + p;
        let mut data = Vec::with_capacity(w * h);
        let mut holes = self.holes.as_ref().map(|_| Vec::with_capacity(w * h));
        for y in 0..h {
            for x in 0..w {
                data.push(self.data[idx(x, y)]);
                if let (Some(out), Some(src)) = (holes.as_mut(), self.holes.as_ref()) {
                    out.push(src[idx(x, y)]);
                }
            }
        }
        Some(FlowField {
            width: w,
            height: h,
            data,
            holes,
        })
    }
}

/// A per-row scalar, broadcast across columns.
///
/// Used both for normalized distortion times in `[0, 1]` and for signed time
/// displacements in `[-1, 1]`. Index 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap(Vec<f32>);

impl TimeMap {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Row-wise `1 - T`.
    pub fn complement(&self) -> TimeMap {
        TimeMap(self.0.iter().map(|t| 1.0 - t).collect())
    }

    /// Same map with the row order flipped.
    pub fn reversed(&self) -> TimeMap {
        TimeMap(self.0.iter().rev().copied().collect())
    }
}

impl core::ops::Index<usize> for TimeMap {
    type Output = f32;

    fn index(&self, row: usize) -> &f32 {
        &self.0[row]
    }
}

/// Integer floor and fractional part of a sample coordinate. Coordinates
/// beyond the `i32` range saturate, which the replicate clamp absorbs.
#[inline]
fn floor_frac(v: f32) -> (i32, f32) {
    let t = v as i32;
    let i = if t as f32 > v { t - 1 } else { t };
    (i, (v - i as f32).clamp(0.0, 1.0))
}
