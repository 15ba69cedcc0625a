//! Retinal eccentricity of each pixel under a planar pinhole projection.
//!
//! Pixel `(i, j)` covers `[i - 0.5, i + 0.5] x [j - 0.5, j + 0.5]` in image
//! coordinates, so integer gaze coordinates sit on a pixel center and the
//! image edges lie at `-0.5` and `width - 0.5`. Pixels are square, so the
//! vertical field of view follows from the aspect ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOV_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeConfig {
    pub width: u32,
    pub height: u32,
    pub fov_h_deg: f64,
    /// `(x, y)` in pixel units; see the module docs for the coordinate frame.
    pub gaze_px: (f64, f64),
}

impl GazeConfig {
    /// Gaze at the image center.
    pub fn centered(width: u32, height: u32, fov_h_deg: f64) -> Self {
        GazeConfig {
            width,
            height,
            fov_h_deg,
            gaze_px: ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0),
        }
    }

    pub fn with_gaze(self, x: f64, y: f64) -> Self {
        GazeConfig { gaze_px: (x, y), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain(format!("image size {}x{} is empty", self.width, self.height)));
        }
        if !(self.fov_h_deg > 0.0 && self.fov_h_deg < 180.0) {
            return Err(Error::Domain(format!("field of view must be in (0, 180), got {}", self.fov_h_deg)));
        }
        let (x, y) = self.gaze_px;
        let inside = |v: f64, n: u32| v >= -0.5 && v <= n as f64 - 0.5;
        if !(inside(x, self.width) && inside(y, self.height)) {
            return Err(Error::Domain(format!(
                "gaze ({x}, {y}) lies outside the {}x{} image",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_h_deg.to_radians() / 2.0).tan()
    }
}

/// Precomputed projection for repeated eccentricity queries.
#[derive(Debug, Clone, Copy)]
pub struct EccentricityField {
    cx: f64,
    cy: f64,
    f: f64,
    gaze_dir: [f64; 3],
    gaze_norm: f64,
}

/// Margin on the cosine comparisons in [`EccentricityField::gated_at`], far
/// above the rounding error of the dot product.
const GATE_COS_MARGIN: f64 = 1e-9;

impl EccentricityField {
    pub fn new(cfg: &GazeConfig) -> Result<Self> {
        cfg.validate()?;
        let cx = (cfg.width as f64 - 1.0) / 2.0;
        let cy = (cfg.height as f64 - 1.0) / 2.0;
        let f = cfg.focal_px();
        let mut field = EccentricityField {
            cx,
            cy,
            f,
            gaze_dir: [0.0; 3],
            gaze_norm: 0.0,
        };
        let u = field.direction(cfg.gaze_px.0, cfg.gaze_px.1);
        field.gaze_dir = u;
        field.gaze_norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        Ok(field)
    }

    fn direction(&self, x: f64, y: f64) -> [f64; 3] {
        [x - self.cx, y - self.cy, self.f]
    }

    /// Eccentricity in degrees of image point `(x, y)`.
    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        let u = self.gaze_dir;
        let v = self.direction(x, y);
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        sin.atan2(cos).to_degrees()
    }

    /// Eccentricity as seen through the modulation gate: points clearly
    /// inside `min_deg` give 0, points clearly beyond `max_deg` give
    /// `max_deg`, everything else the exact angle. Saves the arctangent for
    /// most of a wide-field image.
    #[inline]
    pub fn gated_at(&self, x: f64, y: f64, cos_min: f64, cos_max: f64, max_deg: f64) -> f64 {
        let u = self.gaze_dir;
        let v = self.direction(x, y);
        let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        let cos = dot / (self.gaze_norm * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        if cos > cos_min + GATE_COS_MARGIN {
            0.0
        } else if cos < cos_max - GATE_COS_MARGIN {
            max_deg
        } else {
            self.at(x, y)
        }
    }
}

/// Row-major per-pixel eccentricity in degrees.
pub fn eccentricity_map(cfg: &GazeConfig) -> Result<Vec<f64>> {
    let field = EccentricityField::new(cfg)?;
    let w = cfg.width as usize;
    let mut out = vec![0.0; w * cfg.height as usize];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, e) in row.iter_mut().enumerate() {
            *e = field.at(x as f64, y as f64);
        }
    });
    Ok(out)
}

/// Gaze drawn uniformly over pixel centers.
pub fn random_gaze(template: &GazeConfig, seed: u64) -> GazeConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(0..template.width.max(1));
    let y = rng.random_range(0..template.height.max(1));
    template.with_gaze(x as f64, y as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Independent route: normalize both rays and take the angle between
    /// them.
    fn oracle(cfg: &GazeConfig, x: f64, y: f64) -> f64 {
        let f = cfg.focal_px();
        let ray = |px: f64, py: f64| {
            Vector3::new(
                px + 0.5 - cfg.width as f64 / 2.0,
                py + 0.5 - cfg.height as f64 / 2.0,
                f,
            )
        };
        ray(cfg.gaze_px.0, cfg.gaze_px.1).angle(&ray(x, y)).to_degrees()
    }

    #[test]
    fn gaze_pixel_has_zero_eccentricity() {
        let cfg = GazeConfig::centered(64, 48, 90.0).with_gaze(13.0, 40.0);
        let map = eccentricity_map(&cfg).unwrap();
        assert_eq!(map[40 * 64 + 13], 0.0);
    }

    #[test]
    fn horizontal_edge_is_half_fov() {
        for (w, h) in [(1440, 1600), (101, 51), (64, 64)] {
            let cfg = GazeConfig::centered(w, h, 90.0);
            let field = EccentricityField::new(&cfg).unwrap();
            let cy = cfg.gaze_px.1;
            assert!((field.at(-0.5, cy) - 45.0).abs() < 1e-12);
            assert!((field.at(w as f64 - 0.5, cy) - 45.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_vector_angle_oracle() {
        let cfg = GazeConfig::centered(320, 200, 75.0).with_gaze(17.0, 181.0);
        let map = eccentricity_map(&cfg).unwrap();
        for (x, y) in [(0usize, 0usize), (319, 199), (160, 3), (17, 0), (250, 181)] {
            assert!((map[y * 320 + x] - oracle(&cfg, x as f64, y as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn gated_eccentricity_agrees_with_exact() {
        let (lo, hi) = (10.0f64, 35.0f64);
        let (cmin, cmax) = (lo.to_radians().cos(), hi.to_radians().cos());
        for (gx, gy) in [(0.0, 0.0), (200.0, 150.0), (399.0, 12.0)] {
            let cfg = GazeConfig::centered(400, 300, 100.0).with_gaze(gx, gy);
            let field = EccentricityField::new(&cfg).unwrap();
            for y in (0..300).step_by(3) {
                for x in (0..400).step_by(3) {
                    let (x, y) = (x as f64, y as f64);
                    let exact = field.at(x, y);
                    let gated = field.gated_at(x, y, cmin, cmax, hi);
                    if exact < lo {
                        assert!(gated < lo);
                    } else {
                        assert_eq!(gated, exact.min(hi));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = GazeConfig::centered(10, 10, 90.0);
        assert!(GazeConfig { fov_h_deg: 180.0, ..ok }.validate().is_err());
        assert!(GazeConfig { width: 0, ..ok }.validate().is_err());
        assert!(ok.with_gaze(10.0, 2.0).validate().is_err());
        assert!(ok.with_gaze(9.5, -0.5).validate().is_ok());
    }

    proptest! {
        #[test]
        fn symmetric_in_pixel_and_gaze(
            w in 1u32..500, h in 1u32..500, fov in 10.0f64..170.0,
            a in (0.0f64..1.0, 0.0f64..1.0), b in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let p = (a.0 * (w - 1) as f64, a.1 * (h - 1) as f64);
            let g = (b.0 * (w - 1) as f64, b.1 * (h - 1) as f64);
            let base = GazeConfig::centered(w, h, fov);
            let e1 = EccentricityField::new(&base.with_gaze(g.0, g.1)).unwrap().at(p.0, p.1);
            let e2 = EccentricityField::new(&base.with_gaze(p.0, p.1)).unwrap().at(g.0, g.1);
            prop_assert!((e1 - e2).abs() < 1e-9);
            prop_assert!((e1 - oracle(&base.with_gaze(g.0, g.1), p.0, p.1)).abs() < 1e-9);
        }

        #[test]
        fn grows_away_from_gaze_along_row_and_column(
            w in 2u32..300, h in 2u32..300, fov in 10.0f64..170.0, seed: u64,
        ) {
            let cfg = random_gaze(&GazeConfig::centered(w, h, fov), seed);
            let map = eccentricity_map(&cfg).unwrap();
            let (gx, gy) = (cfg.gaze_px.0 as usize, cfg.gaze_px.1 as usize);
            let w = w as usize;
            for x in gx + 1..w {
                prop_assert!(map[gy * w + x] > map[gy * w + x - 1]);
            }
            for x in (0..gx).rev() {
                prop_assert!(map[gy * w + x] > map[gy * w + x + 1]);
            }
            for y in gy + 1..h as usize {
                prop_assert!(map[y * w + gx] > map[(y - 1) * w + gx]);
            }
        }
    }

    #[test]
    fn random_gaze_is_deterministic() {
        let t = GazeConfig::centered(640, 480, 90.0);
        assert_eq!(random_gaze(&t, 9), random_gaze(&t, 9));
        let one = GazeConfig::centered(1, 1, 90.0);
        assert_eq!(random_gaze(&one, 3).gaze_px, (0.0, 0.0));
    }

    #[test]
    fn random_gaze_is_uniform() {
        let t = GazeConfig::centered(10, 7, 90.0);
        let draws = 10_000;
        let mut cx = [0usize; 10];
        let mut cy = [0usize; 7];
        for s in 0..draws {
            let g = random_gaze(&t, s).gaze_px;
            cx[g.0 as usize] += 1;
            cy[g.1 as usize] += 1;
        }
        let p_value = |counts: &[usize]| {
            let expected = draws as f64 / counts.len() as f64;
            let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
        };
        assert!(p_value(&cx) > 0.001);
        assert!(p_value(&cy) > 0.001);
    }
}
