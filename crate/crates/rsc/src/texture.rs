//! Seeded band-limited test textures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsc_core::Image;
use std::f64::consts::PI;

/// Sum-of-plane-waves texture parameters. Frequencies are in radians per
/// pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub seed: u64,
    pub waves: usize,
    pub min_freq: f64,
    pub max_freq: f64,
}

impl TextureSpec {
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            channels: 1,
            seed,
            waves: 6,
            min_freq: 0.05,
            max_freq: 0.16,
        }
    }
}

/// Output range of [`band_limited`].
pub const RANGE: (f32, f32) = (0.1, 0.9);

struct Wave {
    kx: f64,
    ky: f64,
    amplitude: f64,
    phases: Vec<f64>,
}

/// Renders a sum of plane waves with random orientation, frequency, amplitude
/// and per-channel phase, rescaled to [`RANGE`].
pub fn band_limited(params: &TextureSpec) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let waves: Vec<Wave> = (0..params.waves.max(1))
        .map(|_| {
            let theta = rng.random_range(0.0..PI);
            let freq = if params.max_freq > params.min_freq {
                rng.random_range(params.min_freq..params.max_freq)
            } else {
                params.min_freq
            };
            Wave {
                kx: freq * theta.cos(),
                ky: freq * theta.sin(),
                amplitude: rng.random_range(0.5..1.0),
                phases: (0..params.channels)
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect(),
            }
        })
        .collect();
    let raw = Image::from_fn(params.width, params.height, params.channels, |x, y, c| {
        waves
            .iter()
            .map(|w| w.amplitude * (w.kx * x as f64 + w.ky * y as f64 + w.phases[c]).sin())
            .sum::<f64>() as f32
    });
    let (lo, hi) = raw
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let (out_lo, out_hi) = RANGE;
    let span = hi - lo;
    raw.map(|v| {
        if span > 0.0 {
            out_lo + (v - lo) / span * (out_hi - out_lo)
        } else {
            0.5 * (out_lo + out_hi)
        }
    })
}
