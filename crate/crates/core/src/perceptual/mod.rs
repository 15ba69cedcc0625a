//! Eccentricity-dependent color discrimination: the threshold network, its
//! training, the ellipse constraint, and study-data pre-processing.

mod dataset;
mod rbfnn;
mod train;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{adaptation_for, chromatic_contrast, linear_to_idkl, Idkl, LinearRgb};
use crate::error::{Error, Result};

pub use dataset::{read_raw_records, read_samples, write_raw_records, write_samples};
pub use rbfnn::{rbfnn_eval, rbfnn_grad, RbfnnFile, RbfnnGradient, RbfnnModel, DEFAULT_NODES, MODEL_FORMAT, PARAMS_PER_NODE};
pub use train::{train_rbfnn, FitReport, TrainConfig, TrainedModel};

/// Below this eccentricity pixels are left untouched.
pub const ECC_MIN_DEG: f64 = 10.0;
/// Eccentricities above this are evaluated as if they were this value.
pub const ECC_MAX_DEG: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSample {
    pub k_lm: f64,
    pub k_s: f64,
    pub ecc_deg: f64,
    pub alpha_lm: f64,
    pub alpha_s: f64,
}

impl ThresholdSample {
    pub fn input(&self) -> [f64; 3] {
        [self.k_lm, self.k_s, self.ecc_deg]
    }

    pub fn target(&self) -> [f64; 2] {
        [self.alpha_lm, self.alpha_s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+LM")]
    PlusLm,
    #[serde(rename = "-LM")]
    MinusLm,
    #[serde(rename = "+S")]
    PlusS,
    #[serde(rename = "-S")]
    MinusS,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::PlusLm,
        Direction::MinusLm,
        Direction::PlusS,
        Direction::MinusS,
    ];

    /// 0 for the L-M axis, 1 for the S-(L+M) axis.
    pub fn axis(self) -> usize {
        match self {
            Direction::PlusLm | Direction::MinusLm => 0,
            Direction::PlusS | Direction::MinusS => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::PlusLm | Direction::PlusS => 1.0,
            Direction::MinusLm | Direction::MinusS => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PlusLm => "+LM",
            Direction::MinusLm => "-LM",
            Direction::PlusS => "+S",
            Direction::MinusS => "-S",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Direction::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| Error::Domain(format!("unknown direction '{s}'")))
    }
}

/// One staircase outcome for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawThresholdRecord {
    pub participant: String,
    pub direction: Direction,
    pub ecc_deg: f64,
    pub k_lm: f64,
    pub k_s: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EllipseAxes {
    pub a_lm: f64,
    pub a_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EccentricityGate {
    /// Too close to the fovea to be worth modulating.
    NoModulation,
    Modulate(f64),
}

pub fn clamp_eccentricity(ecc_deg: f64) -> Result<EccentricityGate> {
    if !(ecc_deg >= 0.0) {
        return Err(Error::Domain(format!("eccentricity must be >= 0, got {ecc_deg}")));
    }
    Ok(if ecc_deg < ECC_MIN_DEG {
        EccentricityGate::NoModulation
    } else {
        EccentricityGate::Modulate(ecc_deg.min(ECC_MAX_DEG))
    })
}

/// Collapse raw staircase records into one conservative sample per
/// (reference color, eccentricity): the narrower of the two opposing
/// thresholds on each axis, then the smallest across participants.
pub fn preprocess_thresholds(records: &[RawThresholdRecord]) -> Result<Vec<ThresholdSample>> {
    #[derive(PartialEq)]
    struct Key([f64; 3]);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        }
    }

    // (ecc, k_lm, k_s) -> participant -> per-direction minimum
    let mut groups: BTreeMap<Key, BTreeMap<&str, [Option<f64>; 4]>> = BTreeMap::new();
    for r in records {
        if !(r.threshold > 0.0 && r.threshold.is_finite()) {
            return Err(Error::Domain(format!(
                "threshold must be positive, got {} (participant {}, {})",
                r.threshold, r.participant, r.direction
            )));
        }
        let slots = groups
            .entry(Key([r.ecc_deg, r.k_lm, r.k_s]))
            .or_default()
            .entry(r.participant.as_str())
            .or_insert([None; 4]);
        let i = Direction::ALL.iter().position(|d| *d == r.direction).unwrap();
        slots[i] = Some(slots[i].map_or(r.threshold, |v: f64| v.min(r.threshold)));
    }

    let mut out = Vec::with_capacity(groups.len());
    for (Key([ecc, k_lm, k_s]), participants) in groups {
        let mut alpha = [f64::INFINITY; 2];
        for (participant, slots) in participants {
            for (i, slot) in slots.iter().enumerate() {
                if slot.is_none() {
                    return Err(Error::IncompleteData(format!(
                        "participant {participant} has no {} record at k=({k_lm}, {k_s}), ecc={ecc}",
                        Direction::ALL[i]
                    )));
                }
            }
            let v = slots.map(Option::unwrap);
            alpha[0] = alpha[0].min(v[0].min(v[1]));
            alpha[1] = alpha[1].min(v[2].min(v[3]));
        }
        out.push(ThresholdSample {
            k_lm,
            k_s,
            ecc_deg: ecc,
            alpha_lm: alpha[0],
            alpha_s: alpha[1],
        });
    }
    Ok(out)
}

/// Ellipse semi-axes in absolute i-DKL units for test color `t` under
/// adaptation `b`. `ecc_deg` must already be clamped.
pub fn ellipse_axes(m: &RbfnnModel, t: Idkl, b: Idkl, ecc_deg: f64) -> Result<EllipseAxes> {
    let [k_lm, k_s] = chromatic_contrast(t, b)?;
    let alpha = m.eval([k_lm, k_s, ecc_deg]);
    Ok(EllipseAxes {
        a_lm: alpha[0] * b.d_lm.abs(),
        a_s: alpha[1] * b.d_s.abs(),
    })
}

/// Negative inside the ellipse, zero on it, positive outside. Only the two
/// chromatic coordinates take part.
pub fn ellipse_eval(x: Idkl, t: Idkl, a: EllipseAxes) -> Result<f64> {
    if !(a.a_lm > 0.0 && a.a_s > 0.0) {
        return Err(Error::DegenerateEllipse(a.a_lm, a.a_s));
    }
    Ok(((x.d_lm - t.d_lm) / a.a_lm).powi(2) + ((x.d_s - t.d_s) / a.a_s).powi(2) - 1.0)
}

/// Output scale of the threshold network: the largest chromatic contrast the
/// display can produce, taken over the sRGB cube corners, each against its
/// own-luminance adaptation color.
pub fn display_eta() -> [f64; 2] {
    let mut eta = [0.0f64; 2];
    for v in LinearRgb::cube_vertices() {
        let t = linear_to_idkl(v);
        if t.d_lum <= 0.0 {
            continue;
        }
        if let Ok(k) = chromatic_contrast(t, adaptation_for(t)) {
            eta[0] = eta[0].max(k[0].abs());
            eta[1] = eta[1].max(k[1].abs());
        }
    }
    eta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: &str, d: Direction, thr: f64) -> RawThresholdRecord {
        RawThresholdRecord {
            participant: p.into(),
            direction: d,
            ecc_deg: 25.0,
            k_lm: 0.1,
            k_s: 0.0,
            threshold: thr,
        }
    }

    fn full(p: &str, lm: (f64, f64), s: (f64, f64)) -> Vec<RawThresholdRecord> {
        vec![
            rec(p, Direction::PlusLm, lm.0),
            rec(p, Direction::MinusLm, lm.1),
            rec(p, Direction::PlusS, s.0),
            rec(p, Direction::MinusS, s.1),
        ]
    }

    #[test]
    fn narrower_of_opposing_thresholds() {
        let out = preprocess_thresholds(&full("p1", (0.05, 0.03), (0.01, 0.02))).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].alpha_lm, 0.03);
        assert_eq!(out[0].alpha_s, 0.01);
    }

    #[test]
    fn smallest_across_participants() {
        let mut recs = full("p1", (0.03, 0.03), (0.01, 0.01));
        recs.extend(full("p2", (0.02, 0.04), (0.02, 0.02)));
        let out = preprocess_thresholds(&recs).unwrap();
        assert_eq!(out[0].alpha_lm, 0.02);
        assert_eq!(out[0].alpha_s, 0.01);
    }

    #[test]
    fn symmetric_thresholds() {
        let out = preprocess_thresholds(&full("p1", (0.04, 0.04), (0.04, 0.04))).unwrap();
        assert_eq!(out[0].alpha_lm, 0.04);
    }

    #[test]
    fn missing_direction_is_named() {
        let mut recs = full("p1", (0.04, 0.04), (0.04, 0.04));
        recs.remove(3);
        let err = preprocess_thresholds(&recs).unwrap_err();
        match err {
            Error::IncompleteData(msg) => assert!(msg.contains("-S") && msg.contains("p1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn output_never_exceeds_inputs() {
        let mut recs = full("a", (0.05, 0.07), (0.01, 0.03));
        recs.extend(full("b", (0.06, 0.02), (0.04, 0.005)));
        let out = preprocess_thresholds(&recs).unwrap();
        for r in &recs {
            let v = if r.direction.axis() == 0 { out[0].alpha_lm } else { out[0].alpha_s };
            assert!(v <= r.threshold);
        }
    }

    #[test]
    fn eccentricity_gate() {
        assert_eq!(clamp_eccentricity(5.0).unwrap(), EccentricityGate::NoModulation);
        assert_eq!(clamp_eccentricity(10.0).unwrap(), EccentricityGate::Modulate(10.0));
        assert_eq!(clamp_eccentricity(20.0).unwrap(), EccentricityGate::Modulate(20.0));
        assert_eq!(clamp_eccentricity(60.0).unwrap(), EccentricityGate::Modulate(35.0));
        assert!(matches!(clamp_eccentricity(-1.0), Err(Error::Domain(_))));
        assert!(clamp_eccentricity(f64::NAN).is_err());
    }

    #[test]
    fn ellipse_axes_scale_by_adaptation() {
        // Constant model: alpha = eta / 2 = (0.04, 0.04).
        let m = RbfnnModel::constant(5, [0.0, 0.0], [0.08, 0.08]);
        let b = Idkl::new(0.5, -0.5, 1.0);
        let a = ellipse_axes(&m, b, b, 20.0).unwrap();
        assert!((a.a_lm - 0.02).abs() < 1e-15);
        assert!((a.a_s - 0.02).abs() < 1e-15);

        let black = Idkl::default();
        assert!(matches!(
            ellipse_axes(&m, black, adaptation_for(black), 20.0),
            Err(Error::DegenerateAdaptation(_))
        ));
    }

    #[test]
    fn ellipse_eval_examples() {
        let t = Idkl::new(0.1, -0.5, 0.4);
        let a = EllipseAxes { a_lm: 0.02, a_s: 0.01 };
        assert_eq!(ellipse_eval(t, t, a).unwrap(), -1.0);
        let v = ellipse_eval(Idkl::new(t.d_lm + 0.02, t.d_s, 0.9), t, a).unwrap();
        assert!(v.abs() < 1e-12);
        let v = ellipse_eval(Idkl::new(t.d_lm + 0.04, t.d_s, t.d_lum), t, a).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert!(ellipse_eval(t, t, EllipseAxes { a_lm: 0.0, a_s: 1.0 }).is_err());
    }

    #[test]
    fn ellipse_is_midpoint_convex() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t = Idkl::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.5);
            let a = EllipseAxes {
                a_lm: rng.random_range(0.01..1.0),
                a_s: rng.random_range(0.01..1.0),
            };
            let x = Idkl::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.5);
            let y = Idkl::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.5);
            let mid = (x + y).scale(0.5);
            let lhs = ellipse_eval(mid, t, a).unwrap();
            let rhs = 0.5 * (ellipse_eval(x, t, a).unwrap() + ellipse_eval(y, t, a).unwrap());
            assert!(lhs <= rhs + 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn display_eta_is_positive() {
        let eta = display_eta();
        assert!(eta[0] > 1.0 && eta[0] < 1.5, "{eta:?}");
        assert!(eta[1] > 0.05 && eta[1] < 0.2, "{eta:?}");
    }
}
