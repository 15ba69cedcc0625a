//! Colorimetric constants, parsed once from the bundled `colorimetry.toml`.

use std::sync::LazyLock;

use nalgebra::Matrix3;
use serde::Deserialize;

pub type Mat3 = [[f64; 3]; 3];

const CONSTANTS_TOML: &str = include_str!("../../data/colorimetry.toml");

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct TransferParams {
    pub gamma: f64,
    pub offset: f64,
    pub linear_slope: f64,
    pub decode_threshold: f64,
    pub encode_threshold: f64,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: Mat3,
}

#[derive(Deserialize)]
struct RawLmsMatrix {
    rows: Mat3,
    normalize_lm_to_y: bool,
}

#[derive(Deserialize)]
struct RawWhite {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawConstants {
    transfer: TransferParams,
    srgb_to_xyz: RawMatrix,
    xyz_to_lms: RawLmsMatrix,
    white: RawWhite,
}

/// Fully derived conversion tables. Obtain via [`colorimetry`].
#[derive(Debug, Clone)]
pub struct Colorimetry {
    pub transfer: TransferParams,
    pub srgb_to_xyz: Mat3,
    pub xyz_to_lms: Mat3,
    pub linear_to_lms: Mat3,
    pub lms_to_linear: Mat3,
    pub linear_to_idkl: Mat3,
    pub idkl_to_linear: Mat3,
    pub white_xy: (f64, f64),
    /// i-DKL coordinates of the D65 white at unit luminance.
    pub white_idkl: [f64; 3],
    pub(crate) decode_lut: [f64; 256],
    /// `encode_bounds[k]` is the smallest linear value that encodes to code `k + 1`.
    pub(crate) encode_bounds: [f64; 255],
    /// `encode_start[i]` counts the bounds below `i / ENCODE_BUCKETS`.
    pub(crate) encode_start: Box<[u8; ENCODE_BUCKETS]>,
}

impl Colorimetry {
    #[inline]
    pub fn decode(&self, code: u8) -> f64 {
        self.decode_lut[code as usize]
    }

    #[inline]
    pub fn encode(&self, linear: f64) -> u8 {
        let i = ((linear * ENCODE_BUCKETS as f64) as usize).min(ENCODE_BUCKETS - 1);
        let k = self.encode_start[i];
        if k < 255 && self.encode_bounds[k as usize] <= linear {
            k + 1
        } else {
            k
        }
    }
}

/// Buckets of the encode index. Narrower than the closest pair of adjacent
/// bounds, so a bucket holds at most one bound.
pub(crate) const ENCODE_BUCKETS: usize = 4096;

/// Rows of the LMS -> i-DKL map: (L-M, S-(L+M), L+M).
pub const LMS_TO_IDKL: Mat3 = [[1.0, -1.0, 0.0], [-1.0, -1.0, 1.0], [1.0, 1.0, 0.0]];

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

fn mat_inverse(m: &Mat3) -> Mat3 {
    let nm = Matrix3::from_fn(|i, j| m[i][j]);
    let inv = nm
        .try_inverse()
        .expect("colorimetry matrices must be invertible");
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = inv[(i, j)];
        }
    }
    out
}

pub(crate) fn decode_transfer(p: &TransferParams, v: f64) -> f64 {
    if v <= p.decode_threshold {
        v / p.linear_slope
    } else {
        ((v + p.offset) / (1.0 + p.offset)).powf(p.gamma)
    }
}

pub(crate) fn encode_transfer(p: &TransferParams, l: f64) -> f64 {
    if l <= p.encode_threshold {
        l * p.linear_slope
    } else {
        (1.0 + p.offset) * l.powf(1.0 / p.gamma) - p.offset
    }
}

impl Colorimetry {
    fn from_toml(text: &str) -> Self {
        let raw: RawConstants = toml::from_str(text).expect("bundled colorimetry.toml is valid");
        let srgb_to_xyz = raw.srgb_to_xyz.rows;
        let mut xyz_to_lms = raw.xyz_to_lms.rows;
        if raw.xyz_to_lms.normalize_lm_to_y {
            let k = xyz_to_lms[0][1] + xyz_to_lms[1][1];
            for row in xyz_to_lms.iter_mut().take(2) {
                for v in row.iter_mut() {
                    *v /= k;
                }
            }
        }
        let linear_to_lms = mat_mul(&xyz_to_lms, &srgb_to_xyz);
        let lms_to_linear = mat_inverse(&linear_to_lms);
        let linear_to_idkl = mat_mul(&LMS_TO_IDKL, &linear_to_lms);
        let idkl_to_linear = mat_inverse(&linear_to_idkl);

        let (wx, wy) = (raw.white.x, raw.white.y);
        let white_xyz = [wx / wy, 1.0, (1.0 - wx - wy) / wy];
        let white_idkl = mat_vec(&LMS_TO_IDKL, mat_vec(&xyz_to_lms, white_xyz));

        let transfer = raw.transfer;
        let mut decode_lut = [0.0; 256];
        for (code, v) in decode_lut.iter_mut().enumerate() {
            *v = decode_transfer(&transfer, code as f64 / 255.0);
        }
        let mut encode_bounds = [0.0; 255];
        for (k, b) in encode_bounds.iter_mut().enumerate() {
            *b = decode_transfer(&transfer, (k as f64 + 0.5) / 255.0);
        }
        let mut encode_start = Box::new([0u8; ENCODE_BUCKETS]);
        for (i, v) in encode_start.iter_mut().enumerate() {
            let lo = i as f64 / ENCODE_BUCKETS as f64;
            *v = encode_bounds.partition_point(|&b| b < lo) as u8;
        }

        Colorimetry {
            transfer,
            srgb_to_xyz,
            xyz_to_lms,
            linear_to_lms,
            lms_to_linear,
            linear_to_idkl,
            idkl_to_linear,
            white_xy: (wx, wy),
            white_idkl,
            decode_lut,
            encode_bounds,
            encode_start,
        }
    }
}

static COLORIMETRY: LazyLock<Colorimetry> =
    LazyLock::new(|| Colorimetry::from_toml(CONSTANTS_TOML));

pub fn colorimetry() -> &'static Colorimetry {
    &COLORIMETRY
}
