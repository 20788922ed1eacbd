use alloc::vec::Vec;

use crate::error::{ensure, Error, Result};
use crate::image::FlowField;

/// Scene motion over the full readout span `t_H - t_1`, in pixels.
///
/// `V(x, s) = s * V(x, 1)`: the displacement at readout fraction `s` is linear
/// in `s`, so the model at `s = 0` is the zero field.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    /// Global translation `(dx, dy)`.
    Translation { dx: f64, dy: f64 },
    /// Row-major `[a, b, c, d, e, f]`; the displacement at `(x, y)` is
    /// `(a x + b y + c - x, d x + e y + f - y)`.
    Affine([f64; 6]),
    /// Per-pixel displacement.
    Dense(FlowField),
}

/// Which parametric family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    Translation,
    Affine,
    Dense,
}

impl MotionKind {
    pub fn name(self) -> &'static str {
        match self {
            MotionKind::Translation => "translation",
            MotionKind::Affine => "affine",
            MotionKind::Dense => "dense",
        }
    }
}

impl core::str::FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "translation" => Ok(MotionKind::Translation),
            "affine" => Ok(MotionKind::Affine),
            "dense" => Ok(MotionKind::Dense),
            other => Err(Error::Domain(alloc::format!(
                "unknown motion kind `{other}`"
            ))),
        }
    }
}

pub const AFFINE_IDENTITY: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];

impl MotionModel {
    pub fn zero(kind: MotionKind, width: usize, height: usize) -> Self {
        match kind {
            MotionKind::Translation => MotionModel::Translation { dx: 0.0, dy: 0.0 },
            MotionKind::Affine => MotionModel::Affine(AFFINE_IDENTITY),
            MotionKind::Dense => MotionModel::Dense(FlowField::zeros(width, height)),
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        MotionModel::Translation { dx, dy }
    }

    pub fn kind(&self) -> MotionKind {
        match self {
            MotionModel::Translation { .. } => MotionKind::Translation,
            MotionModel::Affine(_) => MotionKind::Affine,
            MotionModel::Dense(_) => MotionKind::Dense,
        }
    }

    /// Free parameters of a parametric model (empty for dense).
    pub fn params(&self) -> Vec<f64> {
        match self {
            MotionModel::Translation { dx, dy } => alloc::vec![*dx, *dy],
            MotionModel::Affine(p) => p.to_vec(),
            MotionModel::Dense(_) => Vec::new(),
        }
    }

    pub fn from_params(kind: MotionKind, params: &[f64]) -> Result<Self> {
        match (kind, params) {
            (MotionKind::Translation, &[dx, dy]) => Ok(MotionModel::Translation { dx, dy }),
            (MotionKind::Affine, p) if p.len() == 6 => {
                let mut a = [0.0; 6];
                a.copy_from_slice(p);
                Ok(MotionModel::Affine(a))
            }
            (MotionKind::Dense, _) => Err(Error::Domain(
                "dense models have no parameter vector".into(),
            )),
            (kind, p) => Err(Error::Domain(alloc::format!(
                "{} model takes {} parameters, got {}",
                kind.name(),
                if kind == MotionKind::Translation {
                    2
                } else {
                    6
                },
                p.len()
            ))),
        }
    }

    /// Displacement at pixel `(x, y)` over the full span.
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        let (xf, yf) = (x as f64, y as f64);
        match self {
            MotionModel::Translation { dx, dy } => [*dx, *dy],
            MotionModel::Affine([a, b, c, d, e, f]) => {
                [a * xf + b * yf + c - xf, d * xf + e * yf + f - yf]
            }
            MotionModel::Dense(flow) => {
                let [u, v] = flow.get(x, y);
                [u as f64, v as f64]
            }
        }
    }

    /// The dense field `V(., 1)` on a `width x height` grid.
    pub fn evaluate(&self, width: usize, height: usize) -> Result<FlowField> {
        if let MotionModel::Dense(flow) = self {
            ensure!(
                flow.width() == width && flow.height() == height,
                Shape,
                "dense motion is {}x{}, grid is {width}x{height}",
                flow.width(),
                flow.height()
            );
            return Ok(flow.clone());
        }
        Ok(FlowField::from_fn(width, height, |x, y| {
            let [u, v] = self.at(x, y);
            [u as f32, v as f32]
        }))
    }

    pub fn is_finite(&self) -> bool {
        match self {
            MotionModel::Dense(flow) => flow.is_finite(),
            _ => self.params().iter().all(|p| p.is_finite()),
        }
    }

    /// Largest displacement magnitude over a `width x height` grid.
    pub fn max_displacement(&self, width: usize, height: usize) -> f64 {
        let corners = [
            (0, 0),
            (width - 1, 0),
            (0, height - 1),
            (width - 1, height - 1),
        ];
        let norm = |[u, v]: [f64; 2]| libm::sqrt(u * u + v * v);
        match self {
            MotionModel::Dense(flow) => flow
                .data()
                .iter()
                .map(|&[u, v]| norm([u as f64, v as f64]))
                .fold(0.0, f64::max),
            // Displacement is affine in position, so its norm peaks at a corner.
            _ => corners
                .iter()
                .map(|&(x, y)| norm(self.at(x, y)))
                .fold(0.0, f64::max),
        }
    }

    /// Re-expresses the model for the centre crop `[p, W-p) x [p, H-p)` of a
    /// `rows`-row camera, whose readout span shrinks to `rows - 2p` rows.
    ///
    /// Coordinates shift by `p` and the displacement scales by the span ratio
    /// `(rows - 2p - 1) / (rows - 1)`.
    pub fn to_crop(&self, p: usize, rows: usize) -> Result<Self> {
        ensure!(
            rows >= 2 * p + 2,
            Degenerate,
            "cropping {p} px from {rows} rows leaves fewer than 2 rows"
        );
        let ratio = (rows - 2 * p - 1) as f64 / (rows - 1) as f64;
        Ok(self.reframe(p as f64, ratio))
    }

    /// Inverse of [`MotionModel::to_crop`].
    pub fn from_crop(&self, p: usize, rows: usize) -> Result<Self> {
        ensure!(
            rows >= 2 * p + 2,
            Degenerate,
            "cropping {p} px from {rows} rows leaves fewer than 2 rows"
        );
        let ratio = (rows - 1) as f64 / (rows - 2 * p - 1) as f64;
        Ok(self.reframe(-(p as f64), ratio))
    }

    fn reframe(&self, shift: f64, ratio: f64) -> Self {
        match self {
            MotionModel::Translation { dx, dy } => MotionModel::Translation {
                dx: dx * ratio,
                dy: dy * ratio,
            },
            MotionModel::Affine([a, b, c, d, e, f]) => {
                // Displacement in shifted coordinates: (A - I) x' + t + (A - I) s,
                // then scaled by `ratio`.
                let tc = c + (a - 1.0 + b) * shift;
                let tf = f + (d + e - 1.0) * shift;
                MotionModel::Affine([
                    1.0 + ratio * (a - 1.0),
                    ratio * b,
                    ratio * tc,
                    ratio * d,
                    1.0 + ratio * (e - 1.0),
                    ratio * tf,
                ])
            }
            MotionModel::Dense(flow) => {
                // Only meaningful for crops; the inverse direction cannot
                // recover the dropped border.
                let p = libm::fabs(shift) as usize;
                let cropped = if shift > 0.0 {
                    flow.crop_border(p).unwrap_or_else(|| flow.clone())
                } else {
                    flow.clone()
                };
                MotionModel::Dense(cropped.scaled(ratio as f32))
            }
        }
    }
}
