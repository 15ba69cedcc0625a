//! Conversions between 8-bit sRGB, linear sRGB, Smith-Pokorny LMS and the
//! intermediate cone-opponent space i-DKL `(L-M, S-(L+M), L+M)`.
//!
//! Every conversion except the transfer function is a fixed linear map. The
//! LMS fundamentals are normalized so that `L + M` is exactly CIE luminance
//! `Y`, which makes the third i-DKL coordinate the luminance of the color.
//! Nothing here clamps silently: use [`in_gamut`] to test displayability.

mod constants;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use constants::{colorimetry, mat_mul, mat_transpose, mat_vec, Colorimetry, Mat3, TransferParams};

/// Gamut tolerance used throughout the crate.
pub const GAMUT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EncodedRgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearRgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Lms {
    pub l: f64,
    pub m: f64,
    pub s: f64,
}

/// Coordinates in i-DKL. `d_lum` equals CIE luminance `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Idkl {
    pub d_lm: f64,
    pub d_s: f64,
    pub d_lum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContrastVec {
    pub k_lm: f64,
    pub k_s: f64,
    pub k_lum: f64,
}

macro_rules! vec3_conversions {
    ($ty:ident, $a:ident, $b:ident, $c:ident) => {
        impl $ty {
            pub const fn new($a: f64, $b: f64, $c: f64) -> Self {
                Self { $a, $b, $c }
            }

            pub const fn to_array(self) -> [f64; 3] {
                [self.$a, self.$b, self.$c]
            }

            pub const fn from_array(v: [f64; 3]) -> Self {
                Self {
                    $a: v[0],
                    $b: v[1],
                    $c: v[2],
                }
            }

            pub fn is_finite(self) -> bool {
                self.$a.is_finite() && self.$b.is_finite() && self.$c.is_finite()
            }
        }
    };
}

vec3_conversions!(LinearRgb, r, g, b);
vec3_conversions!(Lms, l, m, s);
vec3_conversions!(Idkl, d_lm, d_s, d_lum);
vec3_conversions!(ContrastVec, k_lm, k_s, k_lum);

impl EncodedRgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

impl LinearRgb {
    pub const BLACK: LinearRgb = LinearRgb::new(0.0, 0.0, 0.0);
    pub const WHITE: LinearRgb = LinearRgb::new(1.0, 1.0, 1.0);

    /// The eight corners of the sRGB cube, black first.
    pub fn cube_vertices() -> [LinearRgb; 8] {
        let mut out = [LinearRgb::BLACK; 8];
        for (i, v) in out.iter_mut().enumerate() {
            *v = LinearRgb::new((i & 4 != 0) as u8 as f64, (i & 2 != 0) as u8 as f64, (i & 1 != 0) as u8 as f64);
        }
        out
    }
}

impl Idkl {
    pub fn scale(self, k: f64) -> Idkl {
        Idkl::new(self.d_lm * k, self.d_s * k, self.d_lum * k)
    }
}

impl std::ops::Add for Idkl {
    type Output = Idkl;
    fn add(self, o: Idkl) -> Idkl {
        Idkl::new(self.d_lm + o.d_lm, self.d_s + o.d_s, self.d_lum + o.d_lum)
    }
}

impl std::ops::Sub for Idkl {
    type Output = Idkl;
    fn sub(self, o: Idkl) -> Idkl {
        Idkl::new(self.d_lm - o.d_lm, self.d_s - o.d_s, self.d_lum - o.d_lum)
    }
}

/// sRGB decode of a single 8-bit code.
#[inline]
pub fn decode_channel(code: u8) -> f64 {
    colorimetry().decode(code)
}

/// sRGB encode of a single linear value in `[0, 1]`, rounded to the nearest code.
#[inline]
pub fn encode_channel(linear: f64) -> u8 {
    colorimetry().encode(linear)
}

/// Continuous sRGB transfer function (linear -> encoded, unquantized).
pub fn encode_transfer(linear: f64) -> f64 {
    constants::encode_transfer(&colorimetry().transfer, linear)
}

/// Continuous inverse transfer function (encoded -> linear).
pub fn decode_transfer(encoded: f64) -> f64 {
    constants::decode_transfer(&colorimetry().transfer, encoded)
}

pub fn srgb_decode(c: EncodedRgb) -> LinearRgb {
    LinearRgb::new(decode_channel(c.r), decode_channel(c.g), decode_channel(c.b))
}

pub fn srgb_encode(c: LinearRgb) -> Result<EncodedRgb> {
    if !in_gamut(c, GAMUT_EPS) {
        return Err(Error::Gamut(format!("({}, {}, {})", c.r, c.g, c.b)));
    }
    Ok(EncodedRgb::new(
        encode_channel(c.r.clamp(0.0, 1.0)),
        encode_channel(c.g.clamp(0.0, 1.0)),
        encode_channel(c.b.clamp(0.0, 1.0)),
    ))
}

pub fn in_gamut(c: LinearRgb, eps: f64) -> bool {
    c.to_array().iter().all(|&v| v >= -eps && v <= 1.0 + eps)
}

/// CIE luminance `Y` straight from the sRGB -> XYZ matrix.
pub fn luminance(c: LinearRgb) -> f64 {
    let row = colorimetry().srgb_to_xyz[1];
    row[0] * c.r + row[1] * c.g + row[2] * c.b
}

pub fn linear_to_lms(c: LinearRgb) -> Lms {
    Lms::from_array(mat_vec(&colorimetry().linear_to_lms, c.to_array()))
}

pub fn lms_to_linear(c: Lms) -> LinearRgb {
    LinearRgb::from_array(mat_vec(&colorimetry().lms_to_linear, c.to_array()))
}

pub fn lms_to_idkl(c: Lms) -> Idkl {
    Idkl::new(c.l - c.m, c.s - (c.l + c.m), c.l + c.m)
}

pub fn idkl_to_lms(c: Idkl) -> Lms {
    Lms::new(
        (c.d_lum + c.d_lm) / 2.0,
        (c.d_lum - c.d_lm) / 2.0,
        c.d_s + c.d_lum,
    )
}

/// Linear sRGB straight to i-DKL through the composed matrix.
#[inline]
pub fn linear_to_idkl(c: LinearRgb) -> Idkl {
    Idkl::from_array(mat_vec(&colorimetry().linear_to_idkl, c.to_array()))
}

#[inline]
pub fn idkl_to_linear(c: Idkl) -> LinearRgb {
    LinearRgb::from_array(mat_vec(&colorimetry().idkl_to_linear, c.to_array()))
}

/// Component-wise color contrast `(t - b) / b`. All three adaptation
/// components must be non-zero.
pub fn contrast(t: Idkl, b: Idkl) -> Result<ContrastVec> {
    if b.d_lum == 0.0 {
        return Err(Error::DegenerateAdaptation("L+M component is zero".into()));
    }
    let [k_lm, k_s] = chromatic_contrast(t, b)?;
    Ok(ContrastVec::new(k_lm, k_s, (t.d_lum - b.d_lum) / b.d_lum))
}

/// Contrast along the two chromatic axes only.
pub fn chromatic_contrast(t: Idkl, b: Idkl) -> Result<[f64; 2]> {
    if b.d_lm == 0.0 {
        return Err(Error::DegenerateAdaptation("L-M component is zero".into()));
    }
    if b.d_s == 0.0 {
        return Err(Error::DegenerateAdaptation("S-(L+M) component is zero".into()));
    }
    Ok([(t.d_lm - b.d_lm) / b.d_lm, (t.d_s - b.d_s) / b.d_s])
}

/// D65-chromaticity adaptation color at the luminance of `t`.
pub fn adaptation_for(t: Idkl) -> Idkl {
    Idkl::from_array(colorimetry().white_idkl).scale(t.d_lum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn decode_fixed_points() {
        assert_eq!(srgb_decode(EncodedRgb::new(0, 0, 0)), LinearRgb::BLACK);
        assert_eq!(srgb_decode(EncodedRgb::new(255, 255, 255)), LinearRgb::WHITE);
    }

    #[test]
    fn decode_mid_gray_matches_reference_value() {
        // ((128/255 + 0.055) / 1.055)^2.4, evaluated independently.
        let g = srgb_decode(EncodedRgb::new(128, 128, 128));
        assert!(close(g.r, 0.215_860_500_113_899_26, 1e-15));
        assert_eq!(g.r, g.g);
        assert_eq!(g.g, g.b);
    }

    #[test]
    fn encode_fixed_points_and_gamut_error() {
        assert_eq!(srgb_encode(LinearRgb::WHITE).unwrap(), EncodedRgb::new(255, 255, 255));
        assert_eq!(srgb_encode(LinearRgb::BLACK).unwrap(), EncodedRgb::new(0, 0, 0));
        assert!(matches!(
            srgb_encode(LinearRgb::new(1.1, 0.0, 0.0)),
            Err(Error::Gamut(_))
        ));
        assert!(srgb_encode(LinearRgb::new(-1e-12, 1.0 + 1e-12, 0.5)).is_ok());
    }

    #[test]
    fn encode_lattice_round_trip() {
        let steps: Vec<u8> = (0..17).map(|i| (i * 255 / 16) as u8).collect();
        for &r in &steps {
            for &g in &steps {
                for &b in &steps {
                    let c = EncodedRgb::new(r, g, b);
                    assert_eq!(srgb_encode(srgb_decode(c)).unwrap(), c);
                }
            }
        }
    }

    #[test]
    fn encode_lut_matches_rounded_transfer() {
        // Dense sweep; skip values within 1e-12 of a rounding boundary.
        for i in 0..=200_000 {
            let l = i as f64 / 200_000.0;
            let exact = 255.0 * encode_transfer(l);
            if (exact - exact.floor() - 0.5).abs() < 1e-9 {
                continue;
            }
            assert_eq!(encode_channel(l), exact.round() as u8, "l = {l}");
        }
    }

    #[test]
    fn bucketed_encode_matches_bound_search() {
        let bounds = &colorimetry().encode_bounds;
        let search = |l: f64| bounds.partition_point(|&b| b <= l) as u8;
        let mut probes = vec![-0.1, 0.0, 1.0, 1.5];
        for &b in bounds.iter() {
            probes.extend([b, b.next_down(), b.next_up()]);
        }
        for i in 0..=constants::ENCODE_BUCKETS {
            let e = i as f64 / constants::ENCODE_BUCKETS as f64;
            probes.extend([e, e.next_down(), e.next_up()]);
        }
        for l in probes {
            assert_eq!(encode_channel(l), search(l), "l = {l}");
        }
    }

    #[test]
    fn lms_luminance_identity() {
        let c = LinearRgb::new(0.3, 0.6, 0.1);
        let lms = linear_to_lms(c);
        assert!(close(lms.l + lms.m, luminance(c), 1e-12));
    }

    #[test]
    fn white_lms_two_ways() {
        let lms = linear_to_lms(LinearRgb::WHITE);
        assert!(close(lms.l + lms.m, 1.0, 1e-12));
        let cm = colorimetry();
        // S row of the composed matrix summed, versus S row of XYZ->LMS applied to white XYZ.
        let s_row_sum: f64 = cm.linear_to_lms[2].iter().sum();
        let white_xyz: Vec<f64> = cm.srgb_to_xyz.iter().map(|r| r.iter().sum()).collect();
        let s_via_xyz: f64 = (0..3).map(|k| cm.xyz_to_lms[2][k] * white_xyz[k]).sum();
        assert!(close(lms.s, s_row_sum, 1e-15));
        assert!(close(lms.s, s_via_xyz, 1e-15));
    }

    #[test]
    fn lms_zero_and_white_inverse() {
        assert_eq!(lms_to_linear(Lms::default()), LinearRgb::BLACK);
        let w = lms_to_linear(linear_to_lms(LinearRgb::WHITE));
        for v in w.to_array() {
            assert!(close(v, 1.0, 1e-9));
        }
    }

    #[test]
    fn idkl_examples() {
        let d = lms_to_idkl(Lms::new(0.6, 0.3, 0.1));
        assert!(close(d.d_lm, 0.3, 1e-15));
        assert!(close(d.d_s, -0.8, 1e-15));
        assert!(close(d.d_lum, 0.9, 1e-15));
        assert_eq!(lms_to_idkl(Lms::default()), Idkl::default());
        assert_eq!(lms_to_idkl(Lms::new(0.4, 0.4, 0.2)).d_lm, 0.0);

        let l = idkl_to_lms(Idkl::new(0.3, -0.8, 0.9));
        assert!(close(l.l, 0.6, 1e-15) && close(l.m, 0.3, 1e-15) && close(l.s, 0.1, 1e-15));
        assert_eq!(idkl_to_lms(Idkl::new(0.0, 0.0, 1.0)), Lms::new(0.5, 0.5, 1.0));
    }

    #[test]
    fn contrast_examples() {
        let b = Idkl::new(0.3, -0.9, 1.0);
        assert_eq!(contrast(b, b).unwrap(), ContrastVec::default());
        let k = contrast(b.scale(1.5), b).unwrap();
        for v in k.to_array() {
            assert!(close(v, 0.5, 1e-15));
        }
        assert!(matches!(
            contrast(b, Idkl::new(0.0, -0.9, 1.0)),
            Err(Error::DegenerateAdaptation(_))
        ));
    }

    #[test]
    fn adaptation_examples() {
        assert_eq!(adaptation_for(Idkl::new(0.2, 0.1, 0.0)), Idkl::new(0.0, 0.0, 0.0));
        let t = Idkl::new(0.01, -0.3, 0.37);
        assert!(close(adaptation_for(t).d_lum, 0.37, 1e-15));
        // sRGB white is D65, so white adapts to itself.
        let w = linear_to_idkl(LinearRgb::WHITE);
        let a = adaptation_for(w);
        for (x, y) in a.to_array().iter().zip(w.to_array()) {
            assert!(close(*x, y, 1e-9));
        }
    }

    fn linear_rgb() -> impl Strategy<Value = LinearRgb> {
        (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(r, g, b)| LinearRgb::new(r, g, b))
    }

    proptest! {
        #[test]
        fn lms_round_trip(c in linear_rgb()) {
            let back = lms_to_linear(linear_to_lms(c));
            for (x, y) in back.to_array().iter().zip(c.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn idkl_inverse_is_exact_on_dyadics(l in -1000i32..1000, m in -1000i32..1000, s in -1000i32..1000) {
            let c = Lms::new(l as f64 / 1024.0, m as f64 / 1024.0, s as f64 / 1024.0);
            prop_assert_eq!(idkl_to_lms(lms_to_idkl(c)), c);
        }

        #[test]
        fn conversions_are_linear(x in linear_rgb(), y in linear_rgb(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let mix = LinearRgb::from_array([0, 1, 2].map(|i| a * x.to_array()[i] + b * y.to_array()[i]));
            let fx = linear_to_idkl(x).to_array();
            let fy = linear_to_idkl(y).to_array();
            let fm = linear_to_idkl(mix).to_array();
            for i in 0..3 {
                prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-12);
            }
        }

        #[test]
        fn contrast_at_adaptation_is_zero(c in linear_rgb()) {
            let t = linear_to_idkl(c);
            prop_assume!(t.d_lum > 0.0);
            let b = adaptation_for(t);
            prop_assert_eq!(contrast(b, b).unwrap(), ContrastVec::default());
        }
    }
}
