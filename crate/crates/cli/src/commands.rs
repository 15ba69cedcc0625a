use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use gazepower::colorspace::{
    adaptation_for, contrast, decode_channel, decode_transfer, encode_transfer, idkl_to_linear, linear_to_idkl,
    linear_to_lms, lms_to_linear, srgb_encode, Idkl, LinearRgb, Lms,
};
use gazepower::gaze::{random_gaze, GazeConfig};
use gazepower::perceptual::{
    preprocess_thresholds, rbfnn_eval, read_raw_records, read_samples, train_rbfnn, RbfnnModel, TrainConfig,
};
use gazepower::pipeline::{
    batch_analyze, lum_baseline, match_lum_scale, optimize_image, predicted_image_power, save_png,
    write_report_csv, BatchConfig, BatchReport, LumPowerCurve, Models,
};
use gazepower::power::{fit_power_model, parse_power_trace, read_power_samples, PowerModel};
use gazepower::staircase_sim::{default_observers, default_references, generate_study, StudyConfig};

use crate::args::{parse_floats, Cli, Command, ModelArgs, Space};

const BUNDLED_THRESHOLD: &str = include_str!("../../../bundled/threshold_model.json");
const BUNDLED_POWER: &str = include_str!("../../../bundled/power_model.json");

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

pub fn run(cli: Cli) -> Outcome {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure {} threads: {e}", cli.threads)))?;
    }
    if !(cli.fov_deg > 0.0 && cli.fov_deg < 180.0) {
        return usage(format!("--fov-deg must be in (0, 180), got {}", cli.fov_deg));
    }
    match &cli.command {
        Command::Colors { from, to, value } => colors(*from, *to, value),
        Command::FitThresholds {
            raw,
            samples,
            output,
            nodes,
            restarts,
            max_iters,
        } => {
            let data = match (raw, samples) {
                (Some(p), _) => preprocess_thresholds(&read_raw_records(open(p)?, &p.display().to_string())?)?,
                (None, Some(p)) => read_samples(open(p)?, &p.display().to_string())?,
                (None, None) => return usage("one of --raw or --samples is required"),
            };
            let cfg = TrainConfig {
                nodes: *nodes,
                restarts: *restarts,
                max_iters: *max_iters,
                seed: cli.seed,
                ..TrainConfig::default()
            };
            let trained = train_rbfnn(&data, &cfg)?;
            let report = serde_json::to_value(&trained.report)?;
            std::fs::write(output, trained.model.to_json(Some(report.clone()))?)
                .with_context(|| format!("writing {}", output.display()))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::EvalThreshold {
            k_lm,
            k_s,
            ecc,
            threshold_model,
        } => {
            if ![*k_lm, *k_s, *ecc].iter().all(|v| v.is_finite()) {
                return usage("inputs must be finite");
            }
            let m = load_threshold(threshold_model.as_deref())?;
            let (a, b) = rbfnn_eval(&m, *k_lm, *k_s, *ecc);
            println!("alpha_lm,alpha_s\n{a},{b}");
            Ok(())
        }
        Command::SimulateStudy {
            output,
            observers,
            jitter,
            eccentricities,
        } => {
            if *observers == 0 {
                return usage("--observers must be at least 1");
            }
            let obs = default_observers(*observers, *jitter);
            let records = generate_study(&obs, &default_references(), eccentricities, cli.seed)?;
            log::info!(
                "{} staircases with {:?}",
                records.len(),
                StudyConfig::default().staircase
            );
            match output {
                Some(p) => gazepower::perceptual::write_raw_records(create(p)?, &records)?,
                None => gazepower::perceptual::write_raw_records(io::stdout().lock(), &records)?,
            }
            Ok(())
        }
        Command::FitPower {
            trace,
            segments,
            samples,
            output,
        } => {
            let samples = match (trace, segments, samples) {
                (Some(t), Some(s), _) => {
                    let trace = parse_power_trace(
                        open(t)?,
                        &t.display().to_string(),
                        open(s)?,
                        &s.display().to_string(),
                    )?;
                    gazepower::power::trace_to_samples(&trace)?
                }
                (_, _, Some(p)) => read_power_samples(open(p)?, &p.display().to_string())?,
                _ => return usage("give either --trace with --segments, or --samples"),
            };
            let (model, fit) = fit_power_model(&samples)?;
            std::fs::write(output, model.to_json(Some(&fit))?).with_context(|| format!("writing {}", output.display()))?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(())
        }
        Command::PredictPower { image, power_model } => {
            let power = load_power(power_model.as_deref())?;
            let img = load_image(image)?;
            println!("{}", predicted_image_power(&img, &power)?);
            Ok(())
        }
        Command::Optimize {
            input,
            output,
            report,
            models,
        } => {
            let models = load_models(models)?;
            let img = load_image(input)?;
            let gaze = gaze_for(&cli, img.width(), img.height());
            let (out, mut row) = optimize_image(&img, &gaze, &models)?;
            save_png(&out, output)?;
            row.file = file_name(input);
            let report_all = BatchReport::new(vec![row], Vec::new(), 20);
            match report {
                Some(p) => write_report_csv(create(p)?, &report_all)?,
                None => write_report_csv(io::stdout().lock(), &report_all)?,
            }
            Ok(())
        }
        Command::LumBaseline {
            input,
            output,
            scale,
            target_watts,
            match_optimized,
            models,
        } => {
            let models = load_models(models)?;
            let img = load_image(input)?;
            let gaze = gaze_for(&cli, img.width(), img.height());
            let scale = match (scale, target_watts, match_optimized) {
                (Some(s), None, false) => *s,
                (None, Some(t), false) => match_lum_scale(&img, &gaze, &models, *t)?,
                (None, None, true) => {
                    let (_, row) = optimize_image(&img, &gaze, &models)?;
                    match_lum_scale(&img, &gaze, &models, row.p_mod_w)?
                }
                _ => return usage("give exactly one of --scale, --target-watts, --match-optimized"),
            };
            let out = lum_baseline(&img, &gaze, scale)?;
            save_png(&out, output)?;
            let curve = LumPowerCurve::new(&img, &gaze, &models.power)?;
            println!("scale,p_orig_w,p_scaled_w\n{scale},{},{}", curve.at(1.0), curve.at(scale));
            Ok(())
        }
        Command::Batch {
            input_dir,
            output_dir,
            report,
            bins,
            models,
        } => {
            if *bins == 0 {
                return usage("--bins must be at least 1");
            }
            let models = load_models(models)?;
            let cfg = BatchConfig {
                fov_h_deg: cli.fov_deg,
                seed: cli.gaze_seed.unwrap_or(cli.seed),
                output_dir: output_dir.clone(),
                histogram_bins: *bins,
            };
            if cli.gaze.is_some() {
                log::warn!("--gaze is ignored in batch mode; each image gets a seeded random gaze");
            }
            let result = batch_analyze(input_dir, &models, &cfg)?;
            match report {
                Some(p) => {
                    write_report_csv(create(p)?, &result)?;
                    print!("{}", result.summary_text());
                }
                None => {
                    write_report_csv(io::stdout().lock(), &result)?;
                    eprint!("{}", result.summary_text());
                }
            }
            io::stdout().flush()?;
            Ok(())
        }
    }
}

fn colors(from: Space, to: Space, value: &str) -> Outcome {
    let v = match parse_floats(value) {
        Ok(v) if v.len() == 3 => [v[0], v[1], v[2]],
        Ok(v) => return usage(format!("expected 3 components, got {}", v.len())),
        Err(e) => return usage(e),
    };
    let linear = match from {
        Space::Srgb8 => {
            if !v.iter().all(|c| c.fract() == 0.0 && (0.0..=255.0).contains(c)) {
                return usage("srgb8 components must be integers in 0..=255");
            }
            LinearRgb::from_array(v.map(|c| decode_channel(c as u8)))
        }
        Space::Srgb => LinearRgb::from_array(v.map(decode_transfer)),
        Space::Linear => LinearRgb::from_array(v),
        Space::Lms => lms_to_linear(Lms::from_array(v)),
        Space::Idkl => idkl_to_linear(Idkl::from_array(v)),
        Space::Contrast => return usage("contrast is an output-only space"),
    };
    let line = match to {
        Space::Srgb8 => {
            let e = srgb_encode(linear)?;
            format!("{},{},{}", e.r, e.g, e.b)
        }
        Space::Srgb => join(linear.to_array().map(encode_transfer)),
        Space::Linear => join(linear.to_array()),
        Space::Lms => join(linear_to_lms(linear).to_array()),
        Space::Idkl => join(linear_to_idkl(linear).to_array()),
        Space::Contrast => {
            let t = linear_to_idkl(linear);
            join(contrast(t, adaptation_for(t))?.to_array())
        }
    };
    println!("{line}");
    Ok(())
}

fn join(v: [f64; 3]) -> String {
    format!("{},{},{}", v[0], v[1], v[2])
}

fn gaze_for(cli: &Cli, width: u32, height: u32) -> GazeConfig {
    let template = GazeConfig::centered(width, height, cli.fov_deg);
    match (cli.gaze, cli.gaze_seed) {
        (Some((x, y)), _) => template.with_gaze(x, y),
        (None, Some(seed)) => random_gaze(&template, seed),
        (None, None) => template,
    }
}

fn load_threshold(path: Option<&Path>) -> anyhow::Result<RbfnnModel> {
    Ok(match path {
        Some(p) => RbfnnModel::load(p)?,
        None => RbfnnModel::from_json(BUNDLED_THRESHOLD).context("bundled threshold model")?,
    })
}

fn load_power(path: Option<&Path>) -> anyhow::Result<PowerModel> {
    Ok(match path {
        Some(p) => PowerModel::load(p)?,
        None => PowerModel::from_json(BUNDLED_POWER).context("bundled power model")?,
    })
}

fn load_models(args: &ModelArgs) -> anyhow::Result<Models> {
    Ok(Models {
        threshold: load_threshold(args.threshold_model.as_deref())?,
        power: load_power(args.power_model.as_deref())?,
    })
}

fn load_image(path: &Path) -> anyhow::Result<gazepower::pipeline::RgbImage> {
    gazepower::pipeline::load_image(path).with_context(|| format!("reading {}", path.display()))
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}
