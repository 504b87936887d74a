//! Real spherical harmonics for view-dependent color, degrees 0..=3.
//!
//! Color convention: SH dot-product plus 0.5, clamped at 0.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 3;
pub const MAX_COEFFS: usize = 16;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Inverse of [`coeff_count`] for supported degrees.
pub fn degree_for_count(count: usize) -> Option<usize> {
    match count {
        1 => Some(0),
        4 => Some(1),
        9 => Some(2),
        16 => Some(3),
        _ => None,
    }
}

/// Basis values at a unit direction (x, y, z). Returns the filled prefix of a
/// fixed-size array plus the active count.
pub fn sh_basis(degree: usize, dir: [f64; 3]) -> ([f64; MAX_COEFFS], usize) {
    let (x, y, z) = (dir[0], dir[1], dir[2]);
    let mut b = [0.0; MAX_COEFFS];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = -SH_C1 * y;
        b[2] = SH_C1 * z;
        b[3] = -SH_C1 * x;
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[4] = SH_C2[0] * x * y;
        b[5] = SH_C2[1] * y * z;
        b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        b[7] = SH_C2[3] * x * z;
        b[8] = SH_C2[4] * (xx - yy);
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        b[9] = SH_C3[0] * y * (3.0 * xx - yy);
        b[10] = SH_C3[1] * x * y * z;
        b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
        b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
        b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
        b[14] = SH_C3[5] * z * (xx - yy);
        b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    }
    (b, coeff_count(degree))
}

/// Partial derivatives ∂basis_k/∂(x, y, z) of the polynomial basis, taken in
/// free coordinates; callers project through the normalization Jacobian.
pub fn sh_basis_grad(degree: usize, dir: [f64; 3]) -> [[f64; 3]; MAX_COEFFS] {
    let (x, y, z) = (dir[0], dir[1], dir[2]);
    let mut g = [[0.0; 3]; MAX_COEFFS];
    if degree >= 1 {
        g[1] = [0.0, -SH_C1, 0.0];
        g[2] = [0.0, 0.0, SH_C1];
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        g[4] = [SH_C2[0] * y, SH_C2[0] * x, 0.0];
        g[5] = [0.0, SH_C2[1] * z, SH_C2[1] * y];
        g[6] = [
            SH_C2[2] * -2.0 * x,
            SH_C2[2] * -2.0 * y,
            SH_C2[2] * 4.0 * z,
        ];
        g[7] = [SH_C2[3] * z, 0.0, SH_C2[3] * x];
        g[8] = [SH_C2[4] * 2.0 * x, SH_C2[4] * -2.0 * y, 0.0];
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        g[9] = [SH_C3[0] * 6.0 * x * y, SH_C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
        g[10] = [SH_C3[1] * y * z, SH_C3[1] * x * z, SH_C3[1] * x * y];
        g[11] = [
            SH_C3[2] * -2.0 * x * y,
            SH_C3[2] * (4.0 * zz - xx - 3.0 * yy),
            SH_C3[2] * 8.0 * y * z,
        ];
        g[12] = [
            SH_C3[3] * -6.0 * x * z,
            SH_C3[3] * -6.0 * y * z,
            SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ];
        g[13] = [
            SH_C3[4] * (4.0 * zz - 3.0 * xx - yy),
            SH_C3[4] * -2.0 * x * y,
            SH_C3[4] * 8.0 * x * z,
        ];
        g[14] = [SH_C3[5] * 2.0 * x * z, SH_C3[5] * -2.0 * y * z, SH_C3[5] * (xx - yy)];
        g[15] = [SH_C3[6] * (3.0 * xx - 3.0 * yy), SH_C3[6] * -6.0 * x * y, 0.0];
    }
    g
}

/// View-dependent RGB: basis(view_dir) · coeffs per channel, plus 0.5,
/// clamped to ≥ 0. The coefficient count must be (L+1)² for L in 0..=3.
pub fn eval_sh_color(sh_coeffs: &[[f64; 3]], view_dir: [f64; 3]) -> Result<[f64; 3]> {
    let degree = degree_for_count(sh_coeffs.len()).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "sh coefficient count {} is not (L+1)^2 for L in 0..=3",
            sh_coeffs.len()
        ))
    })?;
    let (basis, n) = sh_basis(degree, view_dir);
    let mut color = [0.5; 3];
    for k in 0..n {
        for c in 0..3 {
            color[c] += basis[k] * sh_coeffs[k][c];
        }
    }
    Ok([color[0].max(0.0), color[1].max(0.0), color[2].max(0.0)])
}

/// Same as [`eval_sh_color`] but also returns the pre-clamp values, which the
/// backward pass needs to mask the clamp.
pub fn eval_sh_color_pre_clamp(sh_coeffs: &[[f64; 3]], view_dir: [f64; 3]) -> Result<[f64; 3]> {
    let degree = degree_for_count(sh_coeffs.len()).ok_or_else(|| {
        Error::InvalidParameter("unsupported sh coefficient count".into())
    })?;
    let (basis, n) = sh_basis(degree, view_dir);
    let mut color = [0.5; 3];
    for k in 0..n {
        for c in 0..3 {
            color[c] += basis[k] * sh_coeffs[k][c];
        }
    }
    Ok(color)
}
