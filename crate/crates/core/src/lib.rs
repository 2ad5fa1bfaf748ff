//! Binaural room impulse response toolkit.
//!
//! Simulates a shoebox room as a binaural room impulse response (image
//! sources for the early part, a feedback delay network for the tail),
//! equalizes the simulated direct sound against a measured reference,
//! computes room-acoustic parameters, measures impulse responses with
//! exponential sweeps and analyzes ABX listening-test logs.

pub mod abx;
pub mod cli;
pub mod directivity;
pub mod dsp;
pub mod error;
pub mod fdn;
pub mod ism;
pub mod loudness;
pub mod metrics;
pub mod render;
pub mod room;
pub mod stimuli;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
