//! One module per `rsc` subcommand.

pub mod correct;
pub mod demo;
pub mod eval;
pub mod synth;
