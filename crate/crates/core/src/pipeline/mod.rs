//! Whole-image processing: modulation, the luminance-scaling baseline and
//! batch statistics.

pub mod report;
pub mod synthetic;

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::{colorimetry, Colorimetry, LinearRgb};
use crate::error::{Error, Result};
use crate::gaze::{random_gaze, EccentricityField, GazeConfig};
use crate::optimizer::{ModulationResult, Modulator};
use crate::perceptual::{RbfnnModel, ECC_MAX_DEG, ECC_MIN_DEG};
use crate::power::{image_power, predict_power, PowerModel};

pub use image::RgbImage;
pub use report::{percentile, write_report_csv, BatchReport, Histogram, ImageReport, REPORT_HEADER};

/// Relative tolerance of [`match_lum_scale`].
pub const LUM_MATCH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub threshold: RbfnnModel,
    pub power: PowerModel,
}

impl Models {
    pub fn modulator(&self) -> Modulator<'_> {
        Modulator::new(&self.threshold, &self.power)
    }
}

fn check_dims(img: &RgbImage, gaze: &GazeConfig) -> Result<()> {
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::EmptyImage);
    }
    if (img.width(), img.height()) != (gaze.width, gaze.height) {
        return Err(Error::Domain(format!(
            "gaze configured for {}x{} but image is {}x{}",
            gaze.width,
            gaze.height,
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

#[inline]
fn decode_px(p: &[u8]) -> LinearRgb {
    decode_with(colorimetry(), p)
}

#[inline]
fn decode_with(cm: &Colorimetry, p: &[u8]) -> LinearRgb {
    LinearRgb::new(cm.decode(p[0]), cm.decode(p[1]), cm.decode(p[2]))
}

#[inline]
fn encode_px(c: LinearRgb, out: &mut [u8]) {
    encode_with(colorimetry(), c, out)
}

#[inline]
fn encode_with(cm: &Colorimetry, c: LinearRgb, out: &mut [u8]) {
    out[0] = cm.encode(c.r);
    out[1] = cm.encode(c.g);
    out[2] = cm.encode(c.b);
}

pub fn decode_image(img: &RgbImage) -> Vec<LinearRgb> {
    img.pixels().map(|p| decode_px(&p.0)).collect()
}

pub fn encode_image(width: u32, height: u32, pixels: &[LinearRgb]) -> Result<RgbImage> {
    if pixels.len() != width as usize * height as usize {
        return Err(Error::Domain(format!("{} pixels for a {width}x{height} image", pixels.len())));
    }
    let mut buf = vec![0u8; pixels.len() * 3];
    for (c, out) in pixels.iter().zip(buf.chunks_exact_mut(3)) {
        let c = LinearRgb::new(c.r.clamp(0.0, 1.0), c.g.clamp(0.0, 1.0), c.b.clamp(0.0, 1.0));
        encode_px(c, out);
    }
    Ok(RgbImage::from_raw(width, height, buf).expect("buffer sized to image"))
}

#[derive(Debug, Clone, Copy, Default)]
struct RowStats {
    sum_rgb: [f64; 3],
    power_delta: f64,
    modulated: usize,
    clamped: usize,
}

impl RowStats {
    fn add(mut self, o: RowStats) -> RowStats {
        for k in 0..3 {
            self.sum_rgb[k] += o.sum_rgb[k];
        }
        self.power_delta += o.power_delta;
        self.modulated += o.modulated;
        self.clamped += o.clamped;
        self
    }
}

/// Per-pixel modulation results in row-major order, before quantization.
pub fn modulate_linear(
    pixels: &[LinearRgb],
    gaze: &GazeConfig,
    models: &Models,
) -> Result<Vec<ModulationResult>> {
    let w = gaze.width as usize;
    if pixels.len() != w * gaze.height as usize {
        return Err(Error::Domain("pixel count does not match gaze configuration".into()));
    }
    let field = EccentricityField::new(gaze)?;
    let m = models.modulator();
    pixels
        .par_chunks(w)
        .enumerate()
        .flat_map_iter(|(y, row)| {
            let m = &m;
            row.iter()
                .enumerate()
                .map(move |(x, &c)| m.modulate(c, field.at(x as f64, y as f64)))
        })
        .collect()
}

/// Modulates every pixel of `img` for the given gaze and re-encodes to
/// 8 bits. Skipped pixels keep their original bytes. Power figures in the
/// report are computed before quantization.
pub fn optimize_image(img: &RgbImage, gaze: &GazeConfig, models: &Models) -> Result<(RgbImage, ImageReport)> {
    check_dims(img, gaze)?;
    let field = EccentricityField::new(gaze)?;
    let m = models.modulator();
    let (cos_min, cos_max) = (ECC_MIN_DEG.to_radians().cos(), ECC_MAX_DEG.to_radians().cos());
    let w = img.width() as usize;
    let mut out = img.as_raw().clone();
    let rows: Vec<RowStats> = out
        .par_chunks_mut(w * 3)
        .enumerate()
        .map(|(y, row)| -> Result<RowStats> {
            let cm = colorimetry();
            let mut st = RowStats::default();
            for (x, px) in row.chunks_exact_mut(3).enumerate() {
                let c = decode_with(cm, px);
                st.sum_rgb[0] += c.r;
                st.sum_rgb[1] += c.g;
                st.sum_rgb[2] += c.b;
                let ecc = field.gated_at(x as f64, y as f64, cos_min, cos_max, ECC_MAX_DEG);
                let r = m.modulate(c, ecc)?;
                if r.skipped {
                    continue;
                }
                st.modulated += 1;
                st.clamped += r.clamped as usize;
                st.power_delta += r.power_delta;
                encode_with(cm, r.rgb, px);
            }
            Ok(st)
        })
        .collect::<Result<_>>()?;
    let total = rows.into_iter().fold(RowStats::default(), RowStats::add);

    let n = (img.width() as usize * img.height() as usize) as f64;
    let mean = LinearRgb::new(total.sum_rgb[0] / n, total.sum_rgb[1] / n, total.sum_rgb[2] / n);
    let p_orig = predict_power(&models.power, mean);
    let p_mod = (p_orig + total.power_delta / n).min(p_orig);
    let report = ImageReport {
        file: String::new(),
        gaze_x: gaze.gaze_px.0,
        gaze_y: gaze.gaze_px.1,
        p_orig_w: p_orig,
        p_mod_w: p_mod,
        savings: if p_orig > 0.0 { (p_orig - p_mod) / p_orig } else { 0.0 },
        pct_modulated: 100.0 * total.modulated as f64 / n,
        pct_clamped: 100.0 * total.clamped as f64 / n,
        dynamic_savings: {
            let dynamic = p_orig - models.power.p_circ;
            if dynamic > 0.0 {
                (p_orig - p_mod) / dynamic
            } else {
                0.0
            }
        },
    };
    let out = RgbImage::from_raw(img.width(), img.height(), out).expect("same size as input");
    Ok((out, report))
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Domain(format!("scale must be in (0, 1], got {scale}")));
    }
    Ok(())
}

/// Scales the linear channels of every pixel beyond the foveal gate by
/// `scale`.
pub fn lum_baseline(img: &RgbImage, gaze: &GazeConfig, scale: f64) -> Result<RgbImage> {
    check_dims(img, gaze)?;
    check_scale(scale)?;
    let field = EccentricityField::new(gaze)?;
    let w = img.width() as usize;
    let mut out = img.as_raw().clone();
    if scale == 1.0 {
        return Ok(RgbImage::from_raw(img.width(), img.height(), out).expect("same size"));
    }
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for (x, px) in row.chunks_exact_mut(3).enumerate() {
            if field.at(x as f64, y as f64) > ECC_MIN_DEG {
                let c = decode_px(px);
                encode_px(LinearRgb::new(c.r * scale, c.g * scale, c.b * scale), px);
            }
        }
    });
    Ok(RgbImage::from_raw(img.width(), img.height(), out).expect("same size"))
}

/// Predicted power of an image as a function of the peripheral scale:
/// `p_circ + foveal + scale * peripheral`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumPowerCurve {
    pub p_circ: f64,
    pub foveal: f64,
    pub peripheral: f64,
}

impl LumPowerCurve {
    pub fn new(img: &RgbImage, gaze: &GazeConfig, power: &PowerModel) -> Result<Self> {
        check_dims(img, gaze)?;
        let field = EccentricityField::new(gaze)?;
        let w = img.width() as usize;
        let sums: Vec<[f64; 2]> = img
            .as_raw()
            .par_chunks(w * 3)
            .enumerate()
            .map(|(y, row)| {
                let mut s = [0.0; 2];
                for (x, px) in row.chunks_exact(3).enumerate() {
                    let d = power.dynamic(decode_px(px));
                    s[(field.at(x as f64, y as f64) > ECC_MIN_DEG) as usize] += d;
                }
                s
            })
            .collect();
        let n = (w * img.height() as usize) as f64;
        let (fov, per) = sums.iter().fold((0.0, 0.0), |(a, b), s| (a + s[0], b + s[1]));
        Ok(LumPowerCurve {
            p_circ: power.p_circ,
            foveal: fov / n,
            peripheral: per / n,
        })
    }

    pub fn at(&self, scale: f64) -> f64 {
        self.p_circ + self.foveal + scale * self.peripheral
    }
}

/// Bisects for the peripheral scale whose predicted power matches
/// `target_watts`. The result is guaranteed within [`LUM_MATCH_TOLERANCE`]
/// and in practice converges far tighter, leaving room for 8-bit rounding.
pub fn match_lum_scale(img: &RgbImage, gaze: &GazeConfig, models: &Models, target_watts: f64) -> Result<f64> {
    let curve = LumPowerCurve::new(img, gaze, &models.power)?;
    let (min, max) = (curve.at(0.0), curve.at(1.0));
    let within = |s: f64| (curve.at(s) - target_watts).abs() <= LUM_MATCH_TOLERANCE * target_watts.abs();
    if within(1.0) && target_watts >= max * (1.0 - 1e-12) {
        return Ok(1.0);
    }
    if !(target_watts > min && target_watts <= max) {
        return Err(Error::Unachievable {
            target: target_watts,
            min,
            max,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if curve.at(mid) > target_watts {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    if !within(s) {
        return Err(Error::Unachievable {
            target: target_watts,
            min,
            max,
        });
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub fov_h_deg: f64,
    pub seed: u64,
    /// Where modulated PNGs go, if anywhere.
    pub output_dir: Option<PathBuf>,
    pub histogram_bins: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            fov_h_deg: crate::gaze::DEFAULT_FOV_DEG,
            seed: 0,
            output_dir: None,
            histogram_bins: 20,
        }
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

/// Gaze for the `index`-th image of a batch.
pub fn batch_gaze(template: &GazeConfig, seed: u64, index: usize) -> GazeConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    random_gaze(template, rng.next_u64())
}

/// Runs [`optimize_image`] over every PNG in `dir` with a seeded random gaze
/// per image. Files that fail to decode are logged and left out.
pub fn batch_analyze(dir: &Path, models: &Models, cfg: &BatchConfig) -> Result<BatchReport> {
    let files = list_pngs(dir)?;
    if let Some(out) = &cfg.output_dir {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    let results: Vec<std::result::Result<ImageReport, (String, String)>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let run = || -> Result<ImageReport> {
                let img = load_image(path)?;
                let template = GazeConfig::centered(img.width(), img.height(), cfg.fov_h_deg);
                let gaze = batch_gaze(&template, cfg.seed, i);
                let (out, mut report) = optimize_image(&img, &gaze, models)?;
                if let Some(dir) = &cfg.output_dir {
                    save_png(&out, &dir.join(&name))?;
                }
                report.file = name.clone();
                Ok(report)
            };
            run().map_err(|e| (name, e.to_string()))
        })
        .collect();

    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rep) => images.push(rep),
            Err((name, msg)) => {
                log::warn!("skipping {name}: {msg}");
                skipped.push((name, msg));
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Domain(format!("no decodable PNG images in {}", dir.display())));
    }
    Ok(BatchReport::new(images, skipped, cfg.histogram_bins))
}

/// Mean-pixel power of an 8-bit image.
pub fn predicted_image_power(img: &RgbImage, power: &PowerModel) -> Result<f64> {
    image_power(power, &decode_image(img))
}
