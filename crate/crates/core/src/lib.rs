//! Dual reversed rolling-shutter (RS) capture, reconstruction and correction.
//!
//! Two RS cameras sharing one optical path scan the same scene in opposite
//! directions (top-to-bottom and bottom-to-top). This crate provides:
//!
//! - [`imaging`]: forward simulation of the dual capture from global-shutter
//!   (GS) content, camera timing and the single-direction ambiguity demo.
//! - [`warp`]: bilinear backwarping and Gaussian-weighted forward splatting.
//! - [`bdwarp`]: distortion time maps, anchor/complementary flows,
//!   complementary flow reversal and reconstruction of both RS images from
//!   GS endpoint or intermediate frames.
//! - [`corrector`]: a parametric motion-model corrector that turns a dual RS
//!   pair into GS frames at any scanline time and fits the motion by
//!   minimizing the cycle-consistency objective.
//! - [`losses`]: Charbonnier, cycle and self-distillation losses, PSNR, SSIM.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the command
//! line front end live in the companion `rsc` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bdwarp;
pub mod corrector;
mod error;
pub mod image;
pub mod imaging;
pub mod losses;
pub mod warp;

pub use error::{Error, Result};
pub use image::{FlowField, Image, TimeMap};
pub use imaging::{CameraConfig, GsSequence, MotionModel, RsImage, ScanDirection};
