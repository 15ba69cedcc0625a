//! Gaze-contingent chromatic modulation that minimizes OLED display power
//! while keeping every pixel inside its eccentricity-dependent color
//! discrimination ellipse.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colorspace;
pub mod error;
pub mod gaze;
pub mod optimizer;
pub mod perceptual;
pub mod pipeline;
pub mod power;
pub mod staircase_sim;

pub use error::{Error, Result};
