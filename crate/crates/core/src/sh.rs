//! Real spherical harmonics up to degree 3.
//!
//! Basis functions are laid out band by band (`l` ascending, `m` from `-l` to
//! `l`) with the sign convention used by common Gaussian splatting
//! rasterizers, so band 1 is `(-c1*y, c1*z, -c1*x)`. Color coefficients
//! written with this layout load unchanged in external viewers.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 3;

/// Directions whose norm is off by less than this are renormalized silently.
pub const DIRECTION_RENORM_TOL: f64 = 1e-3;

/// 1 / (2 sqrt(pi))
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// sqrt(3 / (4 pi))
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
/// sqrt(15/pi)/2, -sqrt(15/pi)/2, sqrt(5/pi)/4, -sqrt(15/pi)/2, sqrt(15/pi)/4
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
/// -sqrt(35/(2pi))/4, sqrt(105/pi)/2, -sqrt(21/(2pi))/4, sqrt(7/pi)/4,
/// -sqrt(21/(2pi))/4, sqrt(105/pi)/4, -sqrt(35/(2pi))/4
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of coefficients for a band-limited expansion of the given degree.
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree of each coefficient slot, used to flip odd bands for antipodal
/// evaluation: `Y_lm(-d) = (-1)^l Y_lm(d)`.
const fn band_of(index: usize) -> usize {
    match index {
        0 => 0,
        1..=3 => 1,
        4..=8 => 2,
        _ => 3,
    }
}

/// Checks that `dir` is close enough to unit length and returns it normalized.
pub fn unit_direction(dir: &Vector3<f64>) -> Result<Vector3<f64>> {
    let norm = dir.norm();
    if !norm.is_finite() || (norm - 1.0).abs() >= DIRECTION_RENORM_TOL {
        return Err(Error::Contract(format!(
            "direction must be unit length, got norm {norm}"
        )));
    }
    Ok(dir / norm)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "SH degree must be in [0, {MAX_DEGREE}], got {degree}"
        )));
    }
    Ok(())
}

/// Writes the basis values for an already-normalized direction into `out`.
///
/// `out.len()` selects the degree and must be one of 1, 4, 9 or 16. This is
/// the unchecked kernel behind [`eval_basis`]; hot loops call it directly.
pub fn basis_into(dir: &Vector3<f64>, out: &mut [f64]) {
    let (x, y, z) = (dir.x, dir.y, dir.z);
    debug_assert!(matches!(out.len(), 1 | 4 | 9 | 16));
    out[0] = SH_C0;
    if out.len() < 4 {
        return;
    }
    out[1] = -SH_C1 * y;
    out[2] = SH_C1 * z;
    out[3] = -SH_C1 * x;
    if out.len() < 9 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    out[4] = SH_C2[0] * x * y;
    out[5] = SH_C2[1] * y * z;
    out[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    out[7] = SH_C2[3] * x * z;
    out[8] = SH_C2[4] * (xx - yy);
    if out.len() < 16 {
        return;
    }
    out[9] = SH_C3[0] * y * (3.0 * xx - yy);
    out[10] = SH_C3[1] * x * y * z;
    out[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = SH_C3[5] * z * (xx - yy);
    out[15] = SH_C3[6] * x * (xx - 3.0 * yy);
}

/// Evaluates every basis function of degree `<= degree` at `dir`.
pub fn eval_basis(dir: &Vector3<f64>, degree: usize) -> Result<Vec<f64>> {
    check_degree(degree)?;
    let dir = unit_direction(dir)?;
    let mut out = vec![0.0; num_coeffs(degree)];
    basis_into(&dir, &mut out);
    Ok(out)
}

/// Turns basis values at `d` into basis values at `-d` in place.
pub fn flip_to_antipode(basis: &mut [f64]) {
    for (i, v) in basis.iter_mut().enumerate() {
        if band_of(i) % 2 == 1 {
            *v = -*v;
        }
    }
}

/// Coefficient vector of a band-limited real SH expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffs {
    degree: usize,
    values: Vec<f64>,
}

impl ShCoeffs {
    pub fn new(degree: usize, values: Vec<f64>) -> Result<Self> {
        check_degree(degree)?;
        if values.len() != num_coeffs(degree) {
            return Err(Error::InvalidArgument(format!(
                "degree {degree} needs {} coefficients, got {}",
                num_coeffs(degree),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "coefficient {i} is not finite"
            )));
        }
        Ok(Self { degree, values })
    }

    pub fn zeros(degree: usize) -> Result<Self> {
        check_degree(degree)?;
        Ok(Self {
            degree,
            values: vec![0.0; num_coeffs(degree)],
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for optimizers. Callers must keep the values finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Field value for a pre-normalized direction; no checks.
    pub fn eval_unit(&self, dir: &Vector3<f64>) -> f64 {
        let mut basis = [0.0; 16];
        let basis = &mut basis[..self.values.len()];
        basis_into(dir, basis);
        dot(&self.values, basis)
    }

    /// `a*self + b*other`; both operands must share a degree.
    pub fn linear_combination(&self, a: f64, other: &ShCoeffs, b: f64) -> Result<ShCoeffs> {
        if self.degree != other.degree {
            return Err(Error::InvalidArgument(format!(
                "degree mismatch: {} vs {}",
                self.degree, other.degree
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        ShCoeffs::new(self.degree, values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value of the expansion `coeffs` in direction `dir`.
pub fn eval_field(coeffs: &ShCoeffs, dir: &Vector3<f64>) -> Result<f64> {
    let dir = unit_direction(dir)?;
    Ok(coeffs.eval_unit(&dir))
}

/// Gradient of [`eval_field`] with respect to the coefficients.
///
/// The field is linear in its coefficients, so this is the basis itself.
pub fn field_gradient(coeffs: &ShCoeffs, dir: &Vector3<f64>) -> Result<Vec<f64>> {
    eval_basis(dir, coeffs.degree())
}
