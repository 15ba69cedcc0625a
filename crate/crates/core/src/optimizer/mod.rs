//! Per-pixel power minimization on the discrimination ellipse.
//!
//! With luminance held fixed, display power is affine in the two chromatic
//! i-DKL coordinates, so its minimum over an axis-aligned ellipse sits at the
//! boundary point whose outward normal is anti-parallel to the power gradient:
//!
//! ```text
//! x_i = t_i - q_i a_i^2 / sqrt(q_1^2 a_1^2 + q_2^2 a_2^2)     i in {lm, s}
//! ```

use serde::{Deserialize, Serialize};

use crate::colorspace::{colorimetry, idkl_to_linear, in_gamut, mat_vec, Idkl, LinearRgb, Mat3, GAMUT_EPS};
use crate::error::{Error, Result};
use crate::perceptual::{clamp_eccentricity, EccentricityGate, EllipseAxes, RbfnnModel};
use crate::power::{power_gradient_idkl, PowerModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationResult {
    pub output: Idkl,
    /// `output` in linear sRGB, clamped into `[0, 1]`.
    pub rgb: LinearRgb,
    pub clamped: bool,
    pub skipped: bool,
    /// Predicted watts of the output minus those of the input.
    pub power_delta: f64,
}

/// Chromatic shift `x* - t` for axes `a` and power gradient `q`, or `None`
/// when power does not depend on chromaticity.
#[inline]
pub fn optimal_shift(a: EllipseAxes, q: [f64; 3]) -> Option<[f64; 2]> {
    let w = [q[0] * a.a_lm * a.a_lm, q[1] * a.a_s * a.a_s];
    let norm = (q[0] * q[0] * a.a_lm * a.a_lm + q[1] * q[1] * a.a_s * a.a_s).sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| [-w[0] / norm, -w[1] / norm])
}

/// The lowest-power color on the boundary of the ellipse centered at `t`.
/// Returns `t` itself when the chromatic gradient vanishes.
pub fn optimal_on_ellipse(t: Idkl, a: EllipseAxes, q: [f64; 3]) -> Idkl {
    match optimal_shift(a, q) {
        Some([d_lm, d_s]) => Idkl::new(t.d_lm + d_lm, t.d_s + d_s, t.d_lum),
        None => t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampOutcome {
    pub point: Idkl,
    /// Fraction of the way from `t` to the target that was kept.
    pub lambda: f64,
}

/// Largest `lambda` in `[0, 1]` keeping `base + lambda * d` inside the unit
/// cube, for `base` inside it.
#[inline]
pub fn max_feasible_step(base: [f64; 3], d: [f64; 3]) -> f64 {
    let end = [base[0] + d[0], base[1] + d[1], base[2] + d[2]];
    if end.iter().all(|&v| (-GAMUT_EPS..=1.0 + GAMUT_EPS).contains(&v)) {
        return 1.0;
    }
    let mut lambda = 1.0f64;
    for k in 0..3 {
        if d[k] > 0.0 {
            lambda = lambda.min((1.0 - base[k]) / d[k]);
        } else if d[k] < 0.0 {
            lambda = lambda.min(-base[k] / d[k]);
        }
    }
    lambda.max(0.0)
}

/// Pulls `x_star` back toward `t` until it fits in the sRGB cube. The path
/// is a straight line in linear sRGB, so the exit point along it is solved
/// for directly.
pub fn gamut_clamp(t: Idkl, x_star: Idkl) -> ClampOutcome {
    let base = idkl_to_linear(t).to_array();
    let d = idkl_to_linear(x_star - t).to_array();
    let lambda = max_feasible_step(base, d);
    let point = if lambda == 1.0 { x_star } else { t + (x_star - t).scale(lambda) };
    ClampOutcome { point, lambda }
}

/// The threshold network with per-node constants folded in.
#[derive(Debug, Clone)]
struct FastRbfnn {
    /// `c(3), 1 / (2 sigma^2), lambda(2)` per node.
    nodes: Vec<[f64; 6]>,
    bias: [f64; 2],
    eta: [f64; 2],
}

impl FastRbfnn {
    fn new(m: &RbfnnModel) -> Self {
        let nodes = m
            .centers
            .iter()
            .zip(&m.widths)
            .zip(&m.weights)
            .map(|((c, s), w)| [c[0], c[1], c[2], 0.5 / (s * s), w[0], w[1]])
            .collect();
        FastRbfnn {
            nodes,
            bias: m.bias,
            eta: m.eta,
        }
    }

    #[inline]
    fn eval(&self, u: [f64; 3]) -> [f64; 2] {
        let mut z = self.bias;
        for n in &self.nodes {
            let d2 = (u[0] - n[0]).powi(2) + (u[1] - n[1]).powi(2) + (u[2] - n[2]).powi(2);
            let rho = (-d2 * n[3]).exp();
            z[0] += n[4] * rho;
            z[1] += n[5] * rho;
        }
        [self.eta[0] / (1.0 + (-z[0]).exp()), self.eta[1] / (1.0 + (-z[1]).exp())]
    }
}

/// Both models plus everything per-pixel work can precompute.
#[derive(Debug, Clone)]
pub struct Modulator<'a> {
    pub threshold: &'a RbfnnModel,
    pub power: &'a PowerModel,
    q: [f64; 3],
    net: FastRbfnn,
    to_idkl: Mat3,
    to_linear: Mat3,
    white: [f64; 3],
}

impl<'a> Modulator<'a> {
    pub fn new(threshold: &'a RbfnnModel, power: &'a PowerModel) -> Self {
        let cm = colorimetry();
        Modulator {
            threshold,
            power,
            q: power_gradient_idkl(power),
            net: FastRbfnn::new(threshold),
            to_idkl: cm.linear_to_idkl,
            to_linear: cm.idkl_to_linear,
            white: cm.white_idkl,
        }
    }

    pub fn power_gradient(&self) -> [f64; 3] {
        self.q
    }

    /// Semi-axes for `t` against its own adaptation color, or `None` for
    /// degenerate pixels. Same quantities as [`crate::perceptual::ellipse_axes`].
    #[inline]
    fn axes(&self, t: Idkl, ecc: f64) -> Option<EllipseAxes> {
        let b = [self.white[0] * t.d_lum, self.white[1] * t.d_lum];
        if b[0] == 0.0 || b[1] == 0.0 {
            return None;
        }
        let k = [(t.d_lm - b[0]) / b[0], (t.d_s - b[1]) / b[1]];
        let alpha = self.net.eval([k[0], k[1], ecc]);
        let a = EllipseAxes {
            a_lm: alpha[0] * b[0].abs(),
            a_s: alpha[1] * b[1].abs(),
        };
        (a.a_lm > 0.0 && a.a_s > 0.0).then_some(a)
    }

    pub fn modulate(&self, c: LinearRgb, ecc_deg: f64) -> Result<ModulationResult> {
        if !in_gamut(c, GAMUT_EPS) || !c.is_finite() {
            return Err(Error::Gamut(format!("input ({}, {}, {})", c.r, c.g, c.b)));
        }
        let base = c.to_array();
        let t = Idkl::from_array(mat_vec(&self.to_idkl, base));
        let skip = ModulationResult {
            output: t,
            rgb: c,
            clamped: false,
            skipped: true,
            power_delta: 0.0,
        };
        let ecc = match clamp_eccentricity(ecc_deg)? {
            EccentricityGate::NoModulation => return Ok(skip),
            EccentricityGate::Modulate(e) => e,
        };
        if !(t.d_lum > 0.0) {
            return Ok(skip);
        }
        let Some(a) = self.axes(t, ecc) else {
            return Ok(skip);
        };
        let Some([d_lm, d_s]) = optimal_shift(a, self.q) else {
            return Ok(ModulationResult { skipped: false, ..skip });
        };
        let d = mat_vec(&self.to_linear, [d_lm, d_s, 0.0]);
        let lambda = max_feasible_step(base, d);
        // Power is affine, so the change follows from the gradient directly
        // and is never positive.
        let power_delta = (lambda * (self.q[0] * d_lm + self.q[1] * d_s)).min(0.0);
        let rgb = LinearRgb::new(
            (base[0] + lambda * d[0]).clamp(0.0, 1.0),
            (base[1] + lambda * d[1]).clamp(0.0, 1.0),
            (base[2] + lambda * d[2]).clamp(0.0, 1.0),
        );
        Ok(ModulationResult {
            output: Idkl::new(t.d_lm + lambda * d_lm, t.d_s + lambda * d_s, t.d_lum),
            rgb,
            clamped: lambda < 1.0,
            skipped: false,
            power_delta,
        })
    }
}

pub fn modulate_pixel(
    c: LinearRgb,
    ecc_deg: f64,
    threshold_model: &RbfnnModel,
    power_model: &PowerModel,
) -> Result<ModulationResult> {
    Modulator::new(threshold_model, power_model).modulate(c, ecc_deg)
}
