//! File formats and command line front end for dual rolling-shutter
//! simulation and correction built on [`rsc_core`].
//!
//! - [`io`]: PFM, Middlebury `.flo` and PNG readers and writers.
//! - [`record`]: `key=value` motion model records.
//! - [`texture`]: seeded band-limited test textures.
//! - [`cli`]: the `rsc` commands `synth`, `correct`, `eval` and
//!   `demo-ambiguity`.

pub mod cli;
pub mod commands;
pub mod io;
pub mod output;
pub mod record;
pub mod texture;
