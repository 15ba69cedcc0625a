use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gazepower", version, about = "Gaze-contingent power-saving color modulation")]
pub struct Cli {
    /// Seed for every random choice (training restarts, study simulation, batch gaze).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Horizontal field of view the image spans, in degrees.
    #[arg(long = "fov-deg", global = true, default_value_t = gazepower::gaze::DEFAULT_FOV_DEG)]
    pub fov_deg: f64,

    /// Fixed gaze point in pixels, `x,y`. Defaults to the image center.
    #[arg(long, global = true, value_parser = parse_pair, conflicts_with = "gaze_seed")]
    pub gaze: Option<(f64, f64)>,

    /// Draw the gaze point uniformly over the image with this seed.
    #[arg(long = "gaze-seed", global = true)]
    pub gaze_seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Threshold model JSON; defaults to the bundled synthetic model.
    #[arg(long = "threshold-model")]
    pub threshold_model: Option<PathBuf>,

    /// Power model JSON; defaults to the bundled synthetic display.
    #[arg(long = "power-model")]
    pub power_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Space {
    /// 8-bit sRGB codes, 0..=255
    Srgb8,
    /// Encoded sRGB in [0, 1]
    Srgb,
    /// Linear sRGB in [0, 1]
    Linear,
    Lms,
    Idkl,
    /// Contrast against the D65 adaptation color of equal luminance (output only)
    Contrast,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert one color between spaces.
    Colors {
        #[arg(long)]
        from: Space,
        #[arg(long)]
        to: Space,
        /// Three comma-separated components.
        #[arg(allow_hyphen_values = true)]
        value: String,
    },

    /// Train a threshold model from study CSV data.
    FitThresholds {
        /// Raw records (`participant,direction,ecc_deg,k_lm,k_s,threshold`).
        #[arg(long, required_unless_present = "samples", conflicts_with = "samples")]
        raw: Option<PathBuf>,
        /// Preprocessed samples (`k_lm,k_s,ecc_deg,alpha_lm,alpha_s`).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = gazepower::perceptual::DEFAULT_NODES)]
        nodes: usize,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long = "max-iters", default_value_t = 3000)]
        max_iters: usize,
    },

    /// Query a threshold model at one point.
    EvalThreshold {
        #[arg(long = "k-lm", allow_hyphen_values = true)]
        k_lm: f64,
        #[arg(long = "k-s", allow_hyphen_values = true)]
        k_s: f64,
        #[arg(long)]
        ecc: f64,
        #[arg(long = "threshold-model")]
        threshold_model: Option<PathBuf>,
    },

    /// Simulate a staircase study and write raw threshold records.
    SimulateStudy {
        /// Destination CSV; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        observers: usize,
        /// Standard deviation of the per-staircase log-threshold jitter.
        #[arg(long, default_value_t = 0.05)]
        jitter: f64,
        #[arg(long, value_delimiter = ',', default_values_t = gazepower::staircase_sim::DEFAULT_ECCENTRICITIES)]
        eccentricities: Vec<f64>,
    },

    /// Fit a display power model from a meter trace or averaged samples.
    FitPower {
        #[arg(long, requires = "segments", required_unless_present = "samples", conflicts_with = "samples")]
        trace: Option<PathBuf>,
        #[arg(long, requires = "trace")]
        segments: Option<PathBuf>,
        /// Averaged samples (`r,g,b,watts`).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },

    /// Predicted full-frame power of an image, in watts.
    PredictPower {
        image: PathBuf,
        #[arg(long = "power-model")]
        power_model: Option<PathBuf>,
    },

    /// Modulate one image for the configured gaze.
    Optimize {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Report CSV; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
    },

    /// Dim the periphery uniformly instead of shifting colors.
    LumBaseline {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, required_unless_present_any = ["target_watts", "match_optimized"])]
        scale: Option<f64>,
        /// Pick the scale that reaches this predicted power.
        #[arg(long = "target-watts", conflicts_with_all = ["scale", "match_optimized"])]
        target_watts: Option<f64>,
        /// Pick the scale that matches the power of the modulated image.
        #[arg(long = "match-optimized", conflicts_with = "scale")]
        match_optimized: bool,
        #[command(flatten)]
        models: ModelArgs,
    },

    /// Modulate every PNG in a directory with a random gaze each.
    Batch {
        input_dir: PathBuf,
        /// Where to write modulated images.
        #[arg(long = "output-dir")]
        output_dir: Option<PathBuf>,
        /// Report CSV; stdout when omitted, in which case the summary goes to stderr.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        models: ModelArgs,
    },
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s)?;
    match v[..] {
        [x, y] => Ok((x, y)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| format!("'{t}' is not a number"))
        })
        .collect()
}
