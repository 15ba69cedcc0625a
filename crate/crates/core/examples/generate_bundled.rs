//! Regenerates the synthetic defaults under `bundled/`.
//!
//! Usage: `cargo run --release -p gazepower --example generate_bundled [-- OUT_DIR]`

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use gazepower::perceptual::{preprocess_thresholds, train_rbfnn, write_raw_records, TrainConfig};
use gazepower::pipeline::save_png;
use gazepower::pipeline::synthetic::{blue_bright_image, red_dark_image, test_image, TEST_IMAGES};
use gazepower::power::{fit_power_model, sample_palette, synthesize_trace, trace_to_samples, write_power_samples, write_segments, write_trace, PowerModel};
use gazepower::staircase_sim::{default_observers, default_references, generate_study, DEFAULT_ECCENTRICITIES};

pub const SEED: u64 = 2024;
const IMAGE_SIZE: (u32, u32) = (240, 180);
const SET_SIZE: u64 = 6;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../bundled"));
    fs::create_dir_all(&out)?;

    // Display: 52 colors, 10 s each, metered at 2 Hz with 0.5% noise.
    let palette = sample_palette(52, SEED)?;
    let trace = synthesize_trace(&PowerModel::SYNTHETIC, &palette, 10.0, 0.5, 0.005, SEED);
    write_trace(File::create(out.join("power_trace.csv"))?, &trace)?;
    write_segments(File::create(out.join("power_segments.csv"))?, &trace)?;
    let samples = trace_to_samples(&trace)?;
    write_power_samples(File::create(out.join("power_samples.csv"))?, &samples)?;
    let (power, fit) = fit_power_model(&samples)?;
    fs::write(out.join("power_model.json"), power.to_json(Some(&fit))?)?;
    println!("power model: {power:?} (mean rel err {:.2e})", fit.mean_relative_error);

    let observers = default_observers(5, 0.05);
    let records = generate_study(&observers, &default_references(), &DEFAULT_ECCENTRICITIES, SEED)?;
    write_raw_records(File::create(out.join("study_raw.csv"))?, &records)?;
    let samples = preprocess_thresholds(&records)?;
    let trained = train_rbfnn(&samples, &TrainConfig { seed: SEED, ..TrainConfig::default() })?;
    let training = serde_json::to_value(&trained.report)?;
    fs::write(out.join("threshold_model.json"), trained.model.to_json(Some(training))?)?;
    println!("threshold model: R2 {:?} over {} samples", trained.report.r2, samples.len());

    let (w, h) = IMAGE_SIZE;
    let images = out.join("images");
    for (set, gen) in [
        ("blue_bright", blue_bright_image as fn(u32, u32, u64) -> _),
        ("red_dark", red_dark_image),
    ] {
        let dir = images.join(set);
        fs::create_dir_all(&dir)?;
        for i in 0..SET_SIZE {
            save_png(&gen(w, h, SEED + i), &dir.join(format!("{set}_{i:02}.png")))?;
        }
    }
    let dir = images.join("test");
    fs::create_dir_all(&dir)?;
    for name in TEST_IMAGES {
        save_png(&test_image(name, w, h).expect("known name"), &dir.join(format!("{name}.png")))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
