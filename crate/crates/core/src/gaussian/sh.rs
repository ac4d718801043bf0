//! Real spherical harmonics up to degree 3, in the Condon-Shortley-phase
//! ordering used by Gaussian splatting (`m = -l..=l` within each band).
//!
//! Coefficients are stored coefficient-major with interleaved RGB:
//! `[c0.r, c0.g, c0.b, c1.r, ...]`. The evaluated color is offset by 0.5 so
//! that an all-zero coefficient set renders mid-gray.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const MAX_SH_DEGREE: u8 = 3;

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const fn coeffs_per_channel(degree: u8) -> usize {
    (degree as usize + 1) * (degree as usize + 1)
}

pub const fn coeffs_len(degree: u8) -> usize {
    3 * coeffs_per_channel(degree)
}

/// SH coefficient whose DC evaluation reproduces `value`.
pub fn dc_from_color(value: f64) -> f64 {
    (value - 0.5) / C0
}

/// Basis values for a unit direction; entries past `coeffs_per_channel(degree)` are zero.
pub fn basis(degree: u8, dir: &Vector3<f64>) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (dir.x, dir.y, dir.z);
    b[1] = -C1 * y;
    b[2] = C1 * z;
    b[3] = -C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = C2[0] * xy;
    b[5] = C2[1] * yz;
    b[6] = C2[2] * (2.0 * zz - xx - yy);
    b[7] = C2[3] * xz;
    b[8] = C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = C3[0] * y * (3.0 * xx - yy);
    b[10] = C3[1] * xy * z;
    b[11] = C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = C3[5] * z * (xx - yy);
    b[15] = C3[6] * x * (xx - 3.0 * yy);
    b
}

fn check(coeffs: &[f64], degree: u8) -> Result<()> {
    if degree > MAX_SH_DEGREE {
        return Err(Error::invalid(format!("SH degree {degree} exceeds {MAX_SH_DEGREE}")));
    }
    if coeffs.len() != coeffs_len(degree) {
        return Err(Error::invalid(format!(
            "{} SH coefficients given, degree {degree} needs {}",
            coeffs.len(),
            coeffs_len(degree)
        )));
    }
    Ok(())
}

/// Color before clamping. `dir` must be unit length.
pub fn evaluate_sh_unclamped(coeffs: &[f64], degree: u8, dir: &Vector3<f64>) -> Result<[f64; 3]> {
    check(coeffs, degree)?;
    Ok(eval_unchecked(coeffs, degree, dir))
}

pub fn evaluate_sh(coeffs: &[f64], degree: u8, dir: &Vector3<f64>) -> Result<[f64; 3]> {
    check(coeffs, degree)?;
    Ok(eval_unchecked(coeffs, degree, dir).map(|c| c.clamp(0.0, 1.0)))
}

pub(crate) fn eval_unchecked(coeffs: &[f64], degree: u8, dir: &Vector3<f64>) -> [f64; 3] {
    let b = basis(degree, dir);
    let mut rgb = [0.5; 3];
    for (k, chunk) in coeffs.chunks_exact(3).enumerate() {
        for c in 0..3 {
            rgb[c] += b[k] * chunk[c];
        }
    }
    rgb
}
