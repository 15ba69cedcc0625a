//! Linear OLED power model `P(x) = p . x + p_circ` over linear sRGB, its
//! least-squares fit from measured samples, and ingestion of power traces.

mod trace;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::colorspace::{colorimetry, LinearRgb};
use crate::error::{Error, Result};

pub use trace::{
    parse_power_trace, read_power_samples, synthesize_trace, trace_to_samples, write_power_samples, write_segments, write_trace,
    PowerTrace, Segment, SAMPLES_HEADER,
};

pub const MODEL_FORMAT: &str = "power-model-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Watts per unit of each linear sRGB channel, full-screen.
    pub p_srgb: [f64; 3],
    /// Static power with an all-black screen.
    pub p_circ: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub color: LinearRgb,
    pub watts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFitReport {
    pub samples: usize,
    /// `sum |pred - meas| / meas / n`
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
    pub rmse_watts: f64,
}

#[derive(Serialize, Deserialize)]
struct PowerModelFile {
    format: String,
    #[serde(flatten)]
    model: PowerModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit: Option<PowerFitReport>,
}

impl PowerModel {
    /// The synthetic display shipped in `bundled/`: blue costs twice as much
    /// as red or green, and static power is half of the full-white total.
    pub const SYNTHETIC: PowerModel = PowerModel {
        p_srgb: [0.25, 0.25, 0.5],
        p_circ: 1.0,
    };

    pub fn to_json(&self, fit: Option<&PowerFitReport>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PowerModelFile {
            format: MODEL_FORMAT.into(),
            model: *self,
            fit: fit.cloned(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PowerModelFile = serde_json::from_str(text)?;
        if f.format != MODEL_FORMAT {
            return Err(Error::Domain(format!(
                "unsupported power model format '{}', expected '{}'",
                f.format, MODEL_FORMAT
            )));
        }
        let m = f.model;
        if !(m.p_circ >= 0.0) || !m.p_srgb.iter().all(|v| v.is_finite()) || !m.p_circ.is_finite() {
            return Err(Error::Domain(format!("invalid power model {m:?}")));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Dynamic (color-dependent) part of the power for `c`.
    #[inline]
    pub fn dynamic(&self, c: LinearRgb) -> f64 {
        self.p_srgb[0] * c.r + self.p_srgb[1] * c.g + self.p_srgb[2] * c.b
    }
}

#[inline]
pub fn predict_power(m: &PowerModel, c: LinearRgb) -> f64 {
    m.dynamic(c) + m.p_circ
}

/// Full-frame power of an image: the solid-color model applied to the mean
/// pixel, which is exact because the model is affine.
pub fn image_power(m: &PowerModel, pixels: &[LinearRgb]) -> Result<f64> {
    if pixels.is_empty() {
        return Err(Error::EmptyImage);
    }
    let n = pixels.len() as f64;
    let mut sum = [0.0; 3];
    for p in pixels {
        sum[0] += p.r;
        sum[1] += p.g;
        sum[2] += p.b;
    }
    Ok(predict_power(m, LinearRgb::new(sum[0] / n, sum[1] / n, sum[2] / n)))
}

/// Power gradient pulled back to i-DKL: `q = M_idkl2srgb^T p`.
pub fn power_gradient_idkl(m: &PowerModel) -> [f64; 3] {
    let a = &colorimetry().idkl_to_linear;
    let p = m.p_srgb;
    [0, 1, 2].map(|j| a[0][j] * p[0] + a[1][j] * p[1] + a[2][j] * p[2])
}

/// The eight cube corners followed by `n - 8` uniform random colors.
pub fn sample_palette(n: usize, seed: u64) -> Result<Vec<LinearRgb>> {
    if n < 8 {
        return Err(Error::Domain(format!("palette needs at least 8 colors, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LinearRgb::cube_vertices().to_vec();
    out.extend((8..n).map(|_| LinearRgb::new(rng.random(), rng.random(), rng.random())));
    Ok(out)
}

/// Synthetic measurements of `palette` on display `m` with multiplicative
/// Gaussian noise of relative standard deviation `noise_rel`.
pub fn synthesize_samples(m: &PowerModel, palette: &[LinearRgb], noise_rel: f64, seed: u64) -> Vec<PowerSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_rel.max(0.0)).expect("finite noise level");
    palette
        .iter()
        .map(|&color| PowerSample {
            color,
            watts: predict_power(m, color) * (1.0 + noise.sample(&mut rng)),
        })
        .collect()
}

/// Ordinary least squares on the design matrix `[r g b 1]`.
pub fn fit_power_model(samples: &[PowerSample]) -> Result<(PowerModel, PowerFitReport)> {
    if samples.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 samples, got {}", samples.len())));
    }
    if let Some(s) = samples.iter().find(|s| !(s.watts > 0.0) || !s.color.is_finite()) {
        return Err(Error::Fit(format!("invalid sample {s:?}")));
    }
    let n = samples.len();
    let a = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => samples[i].color.r,
        1 => samples[i].color.g,
        2 => samples[i].color.b,
        _ => 1.0,
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.watts));
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > smax * 1e-10) {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (singular values {smax:.3e} .. {smin:.3e})"
        )));
    }
    let x = svd
        .solve(&y, smax * 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let model = PowerModel {
        p_srgb: [x[0], x[1], x[2]],
        p_circ: x[3],
    };

    let mut rel_sum = 0.0;
    let mut rel_max = 0.0f64;
    let mut sq = 0.0;
    for s in samples {
        let err = predict_power(&model, s.color) - s.watts;
        let rel = err.abs() / s.watts;
        rel_sum += rel;
        rel_max = rel_max.max(rel);
        sq += err * err;
    }
    if model.p_circ < 0.0 {
        log::warn!("fitted static power is negative ({} W)", model.p_circ);
    }
    if let Some(v) = LinearRgb::cube_vertices().iter().find(|v| predict_power(&model, **v) <= 0.0) {
        log::warn!("fitted model predicts non-positive power for {v:?}");
    }
    Ok((
        model,
        PowerFitReport {
            samples: n,
            mean_relative_error: rel_sum / n as f64,
            max_relative_error: rel_max,
            rmse_watts: (sq / n as f64).sqrt(),
        },
    ))
}
