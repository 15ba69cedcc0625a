//! Simulated threshold measurements.
//!
//! Synthetic observers answer a four-alternative forced choice with a Weibull
//! psychometric function around a planted threshold. A 1-up-2-down staircase
//! on a multiplicative offset grid tracks that threshold, and a full study
//! yields [`RawThresholdRecord`]s ready for preprocessing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perceptual::{Direction, RawThresholdRecord};

/// Chance rate with four alternatives.
pub const GUESS_RATE: f64 = 0.25;
pub const MAX_LAPSE: f64 = 0.05;
pub const DEFAULT_SLOPE: f64 = 3.5;
pub const DEFAULT_ECCENTRICITIES: [f64; 3] = [10.0, 25.0, 35.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psychometric {
    /// Offset at which the Weibull term reaches `1 - 1/e`.
    pub threshold: f64,
    pub slope: f64,
    pub guess: f64,
    pub lapse: f64,
}

impl Psychometric {
    pub fn new(threshold: f64, slope: f64, lapse: f64) -> Self {
        Psychometric {
            threshold,
            slope,
            guess: GUESS_RATE,
            lapse,
        }
    }

    pub fn weibull(&self, offset: f64) -> f64 {
        1.0 - (-(offset / self.threshold).powf(self.slope)).exp()
    }

    pub fn p_correct(&self, offset: f64) -> f64 {
        self.guess + (1.0 - self.guess - self.lapse) * self.weibull(offset)
    }

    /// Offset where `p_correct` equals `p`, if it is reachable.
    pub fn offset_for(&self, p: f64) -> Option<f64> {
        let w = (p - self.guess) / (1.0 - self.guess - self.lapse);
        (w > 0.0 && w < 1.0).then(|| self.threshold * (-(1.0 - w).ln()).powf(1.0 / self.slope))
    }

    /// The offset a 1-up-2-down rule settles on: two correct answers in a
    /// row are as likely as not.
    pub fn two_down_target(&self) -> Option<f64> {
        self.offset_for(0.5f64.sqrt())
    }
}

pub fn trial_response<R: Rng + ?Sized>(psy: &Psychometric, offset: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < psy.p_correct(offset.max(0.0))
}

/// Planted discrimination thresholds in contrast units:
///
/// ```text
/// tau = base[axis] * (ecc / 10)^ecc_exponent
///       * (1 + contrast_gain * (|k_lm| / contrast_scale[0] + |k_s| / contrast_scale[1]))
///       * (1 +/- asymmetry)
/// ```
///
/// with `+` for the positive and `-` for the negative direction on an axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub base: [f64; 2],
    pub ecc_exponent: f64,
    pub contrast_gain: f64,
    pub contrast_scale: [f64; 2],
    pub asymmetry: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth {
            base: [0.03, 0.0015],
            ecc_exponent: 0.9,
            contrast_gain: 0.5,
            contrast_scale: [0.15, 0.005],
            asymmetry: 0.1,
        }
    }
}

impl GroundTruth {
    pub fn tau(&self, k_lm: f64, k_s: f64, ecc_deg: f64, dir: Direction) -> f64 {
        let r = k_lm.abs() / self.contrast_scale[0] + k_s.abs() / self.contrast_scale[1];
        self.base[dir.axis()]
            * (ecc_deg / 10.0).powf(self.ecc_exponent)
            * (1.0 + self.contrast_gain * r)
            * (1.0 + self.asymmetry * dir.sign())
    }

    /// The narrower of the two directions on each axis.
    pub fn axes(&self, k_lm: f64, k_s: f64, ecc_deg: f64) -> [f64; 2] {
        [
            self.tau(k_lm, k_s, ecc_deg, Direction::PlusLm)
                .min(self.tau(k_lm, k_s, ecc_deg, Direction::MinusLm)),
            self.tau(k_lm, k_s, ecc_deg, Direction::PlusS)
                .min(self.tau(k_lm, k_s, ecc_deg, Direction::MinusS)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticObserver {
    pub name: String,
    pub truth: GroundTruth,
    pub slope: f64,
    pub lapse: f64,
    /// Standard deviation of the log-normal factor applied to the planted
    /// threshold of each condition.
    pub jitter: f64,
}

impl SyntheticObserver {
    pub fn new(name: impl Into<String>, truth: GroundTruth) -> Self {
        SyntheticObserver {
            name: name.into(),
            truth,
            slope: DEFAULT_SLOPE,
            lapse: 0.0,
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_LAPSE).contains(&self.lapse) {
            return Err(Error::Domain(format!("lapse rate {} outside [0, {MAX_LAPSE}]", self.lapse)));
        }
        if !(self.slope > 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::Domain(format!("observer {}: bad slope or jitter", self.name)));
        }
        Ok(())
    }
}

/// `n` observers named `obs1..obsN` sharing one ground truth.
pub fn default_observers(n: usize, jitter: f64) -> Vec<SyntheticObserver> {
    (1..=n)
        .map(|i| SyntheticObserver {
            jitter,
            lapse: 0.01,
            ..SyntheticObserver::new(format!("obs{i}"), GroundTruth::default())
        })
        .collect()
}

/// Reference contrasts `(k_lm, k_s)`: the adaptation color itself and one
/// step out along each half-axis.
pub fn default_references() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [0.15, 0.0], [-0.15, 0.0], [0.0, 0.005], [0.0, -0.005]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseConfig {
    pub reversals: usize,
    pub max_trials: usize,
    /// Reversals averaged into the estimate.
    pub averaged: usize,
    pub initial_offset: f64,
    pub step_factor: f64,
    /// After every reversal the factor moves halfway toward this floor.
    pub min_step_factor: f64,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        StaircaseConfig {
            reversals: 6,
            max_trials: 50,
            averaged: 3,
            initial_offset: 0.2,
            step_factor: 1.5,
            min_step_factor: 1.2,
        }
    }
}

impl StaircaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reversals < 4 || self.averaged == 0 || self.averaged > self.reversals {
            return Err(Error::Domain(format!(
                "need at least 4 reversals and 1..=reversals averaged, got {}/{}",
                self.reversals, self.averaged
            )));
        }
        if !(self.initial_offset > 0.0) || !(self.min_step_factor > 1.0) || self.step_factor < self.min_step_factor {
            return Err(Error::Domain("staircase offsets and step factors must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Up,
    Down,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub offset: f64,
    pub correct: bool,
    pub step: Step,
    pub reversal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseRun {
    pub estimate: f64,
    pub trials: Vec<Trial>,
    pub reversal_offsets: Vec<f64>,
    /// False when the trial cap hit before the reversal target.
    pub converged: bool,
}

pub fn run_staircase(psy: &Psychometric, cfg: &StaircaseConfig, seed: u64) -> StaircaseRun {
    run_staircase_with(psy, cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn run_staircase_with<R: Rng + ?Sized>(psy: &Psychometric, cfg: &StaircaseConfig, rng: &mut R) -> StaircaseRun {
    let mut offset = cfg.initial_offset;
    let mut factor = cfg.step_factor;
    let mut streak = 0;
    let mut last_step: Option<Step> = None;
    let mut trials = Vec::new();
    let mut reversal_offsets = Vec::new();

    while trials.len() < cfg.max_trials && reversal_offsets.len() < cfg.reversals {
        let correct = trial_response(psy, offset, rng);
        let step = if correct {
            streak += 1;
            if streak == 2 {
                streak = 0;
                Step::Down
            } else {
                Step::Hold
            }
        } else {
            streak = 0;
            Step::Up
        };
        let reversal = step != Step::Hold && last_step.is_some_and(|s| s != step);
        trials.push(Trial {
            offset,
            correct,
            step,
            reversal,
        });
        if reversal {
            reversal_offsets.push(offset);
            factor = cfg.min_step_factor + (factor - cfg.min_step_factor) / 2.0;
        }
        match step {
            Step::Up => offset *= factor,
            Step::Down => offset /= factor,
            Step::Hold => {}
        }
        if step != Step::Hold {
            last_step = Some(step);
        }
    }

    let converged = reversal_offsets.len() >= cfg.reversals;
    let tail = &reversal_offsets[reversal_offsets.len().saturating_sub(cfg.averaged)..];
    let estimate = if tail.is_empty() {
        offset
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    StaircaseRun {
        estimate,
        trials,
        reversal_offsets,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub staircase: StaircaseConfig,
    /// Rough per-axis threshold guesses; each staircase starts at
    /// `initial_multiplier` times the guess for its axis.
    pub guess: [f64; 2],
    pub initial_multiplier: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            staircase: StaircaseConfig::default(),
            guess: [0.06, 0.003],
            initial_multiplier: 4.0,
        }
    }
}

/// One staircase per observer, reference, eccentricity and direction, in
/// that nesting order.
pub fn generate_study(
    observers: &[SyntheticObserver],
    references: &[[f64; 2]],
    eccentricities: &[f64],
    seed: u64,
) -> Result<Vec<RawThresholdRecord>> {
    generate_study_with(observers, references, eccentricities, &StudyConfig::default(), seed)
}

pub fn generate_study_with(
    observers: &[SyntheticObserver],
    references: &[[f64; 2]],
    eccentricities: &[f64],
    cfg: &StudyConfig,
    seed: u64,
) -> Result<Vec<RawThresholdRecord>> {
    cfg.staircase.validate()?;
    for o in observers {
        o.validate()?;
    }
    let mut jobs = Vec::new();
    for o in observers {
        for &[k_lm, k_s] in references {
            for &ecc in eccentricities {
                for dir in Direction::ALL {
                    jobs.push((o, k_lm, k_s, ecc, dir));
                }
            }
        }
    }
    Ok(jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(o, k_lm, k_s, ecc, dir))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let jitter = Normal::new(0.0, o.jitter).expect("validated jitter").sample(&mut rng).exp();
            let psy = Psychometric::new(o.truth.tau(k_lm, k_s, ecc, dir) * jitter, o.slope, o.lapse);
            let sc = StaircaseConfig {
                initial_offset: cfg.initial_multiplier * cfg.guess[dir.axis()],
                ..cfg.staircase
            };
            let run = run_staircase_with(&psy, &sc, &mut rng);
            RawThresholdRecord {
                participant: o.name.clone(),
                direction: dir,
                ecc_deg: ecc,
                k_lm,
                k_s,
                threshold: run.estimate,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::{adaptation_for, idkl_to_linear, in_gamut, Idkl};
    use crate::perceptual::write_raw_records;

    #[test]
    fn psychometric_endpoints() {
        let p = Psychometric::new(0.1, 3.5, 0.02);
        assert_eq!(p.p_correct(0.0), 0.25);
        assert!((p.p_correct(1e6) - 0.98).abs() < 1e-12);
        let at_tau = 0.25 + 0.73 * (1.0 - (-1.0f64).exp());
        assert!((p.p_correct(0.1) - at_tau).abs() < 1e-15);
        let x = p.two_down_target().unwrap();
        assert!((p.p_correct(x) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn response_rate_matches_probability() {
        let p = Psychometric::new(0.1, 3.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let hits = (0..n).filter(|_| trial_response(&p, 0.1, &mut rng)).count() as f64 / n as f64;
        // Four binomial standard deviations.
        let want = p.p_correct(0.1);
        assert!((hits - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());
    }

    fn check_log(run: &StaircaseRun, cfg: &StaircaseConfig) {
        assert!(run.trials.len() <= cfg.max_trials);
        assert!(run.reversal_offsets.len() <= cfg.reversals);
        let mut last = None;
        for t in &run.trials {
            if t.step == Step::Hold {
                assert!(!t.reversal);
                continue;
            }
            let changed = last.is_some_and(|s| s != t.step);
            assert_eq!(changed, t.reversal);
            last = Some(t.step);
        }
        let flagged: Vec<f64> = run.trials.iter().filter(|t| t.reversal).map(|t| t.offset).collect();
        assert_eq!(flagged, run.reversal_offsets);
        assert!(run.estimate > 0.0);
        assert!(run.estimate <= cfg.initial_offset * cfg.step_factor.powi(cfg.max_trials as i32));
    }

    #[test]
    fn step_observer_brackets_threshold() {
        let psy = Psychometric::new(0.05, f64::INFINITY, 0.0);
        let cfg = StaircaseConfig::default();
        let run = run_staircase(&psy, &cfg, 11);
        check_log(&run, &cfg);
        assert!(run.estimate > 0.05 / 1.5 && run.estimate < 0.05 * 1.5, "{}", run.estimate);
    }

    #[test]
    fn same_seed_same_log() {
        let psy = Psychometric::new(0.05, 3.5, 0.01);
        let cfg = StaircaseConfig::default();
        assert_eq!(run_staircase(&psy, &cfg, 4), run_staircase(&psy, &cfg, 4));
    }

    #[test]
    fn trial_cap_is_flagged() {
        let psy = Psychometric::new(0.05, 3.5, 0.0);
        let cfg = StaircaseConfig {
            max_trials: 5,
            ..StaircaseConfig::default()
        };
        let run = run_staircase(&psy, &cfg, 2);
        assert!(!run.converged);
        assert_eq!(run.trials.len(), 5);
        check_log(&run, &cfg);
    }

    #[test]
    fn converges_near_two_down_target() {
        let psy = Psychometric::new(0.05, 3.5, 0.01);
        let cfg = StaircaseConfig {
            initial_offset: 0.2,
            ..StaircaseConfig::default()
        };
        let runs: Vec<_> = (0..200).map(|s| run_staircase(&psy, &cfg, s)).collect();
        runs.iter().for_each(|r| check_log(r, &cfg));
        let mean = runs.iter().map(|r| r.estimate).sum::<f64>() / runs.len() as f64;
        let target = psy.two_down_target().unwrap();
        assert!((mean / target - 1.0).abs() < 0.15, "{mean} vs {target}");
    }

    #[test]
    fn study_shape_and_determinism() {
        let obs = default_observers(5, 0.05);
        let refs = default_references();
        let a = generate_study(&obs, &refs, &DEFAULT_ECCENTRICITIES, 7).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.iter().all(|r| r.threshold > 0.0));
        let b = generate_study(&obs, &refs, &DEFAULT_ECCENTRICITIES, 7).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_raw_records(&mut ca, &a).unwrap();
        write_raw_records(&mut cb, &b).unwrap();
        assert_eq!(ca, cb);
        assert!(generate_study(&[], &refs, &DEFAULT_ECCENTRICITIES, 7).unwrap().is_empty());
    }

    #[test]
    fn rejects_invalid_observer_and_config() {
        let mut o = default_observers(1, 0.05);
        o[0].lapse = 0.2;
        assert!(generate_study(&o, &default_references(), &[10.0], 1).is_err());
        let cfg = StudyConfig {
            staircase: StaircaseConfig {
                reversals: 3,
                ..StaircaseConfig::default()
            },
            ..StudyConfig::default()
        };
        assert!(generate_study_with(&[], &[], &[], &cfg, 0).is_err());
    }

    #[test]
    fn references_are_displayable_at_mid_luminance() {
        for y in [0.2, 0.5] {
            let b = adaptation_for(Idkl::new(0.0, 0.0, y));
            for [k_lm, k_s] in default_references() {
                let t = Idkl::new(b.d_lm * (1.0 + k_lm), b.d_s * (1.0 + k_s), y);
                assert!(in_gamut(idkl_to_linear(t), 0.0), "{k_lm}, {k_s} at {y}");
            }
        }
    }

    #[test]
    fn planted_thresholds_grow_with_eccentricity() {
        let g = GroundTruth::default();
        for dir in Direction::ALL {
            assert!(g.tau(0.0, 0.0, 35.0, dir) > g.tau(0.0, 0.0, 25.0, dir));
            assert!(g.tau(0.0, 0.0, 25.0, dir) > g.tau(0.0, 0.0, 10.0, dir));
        }
        let a = g.axes(0.0, 0.0, 10.0);
        assert!((a[0] - 0.027).abs() < 1e-15 && (a[1] - 0.00135).abs() < 1e-15);
    }
}
