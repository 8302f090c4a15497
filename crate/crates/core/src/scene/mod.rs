//! Gaussian scene and camera data model, plus their on-disk formats.

mod camera;
mod ply;

pub use camera::{cameras_to_json, load_cameras, parse_cameras, save_cameras, Camera};
pub use ply::{load_scene, parse_scene, ply_header, save_scene, scene_to_ply_bytes};

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::sh::{self, ShCoeffs};

/// Default SH degree of the per-gaussian uncertainty field.
pub const DEFAULT_UNCERT_DEGREE: usize = 2;

/// Color SH are always stored at the maximum degree.
pub const COLOR_DEGREE: usize = sh::MAX_DEGREE;

const QUAT_NORM_TOL: f64 = 1e-6;

/// Keeps sigmoid outputs strictly inside (0, 1) in f64.
const SIGMOID_EPS: f64 = 1e-15;

pub fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub position: Vector3<f64>,
    /// Rotation quaternion; unit norm within 1e-6.
    pub rotation: Quaternion<f64>,
    /// Linear per-axis standard deviations.
    pub scale: Vector3<f64>,
    /// Opacity in (0, 1).
    pub opacity: f64,
    /// One degree-3 expansion per RGB channel, in the "+0.5 dc offset" convention.
    pub color_sh: [ShCoeffs; 3],
    pub uncert_sh: ShCoeffs,
}

impl Gaussian {
    /// An isotropic gaussian with flat color `rgb` and a zeroed uncertainty field.
    pub fn isotropic(position: Vector3<f64>, scale: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        let color_sh = rgb.map(|c| {
            let mut coeffs = ShCoeffs::zeros(COLOR_DEGREE).expect("valid degree");
            coeffs.values_mut()[0] = rgb_to_dc(c);
            coeffs
        });
        Self {
            position,
            rotation: Quaternion::identity(),
            scale: Vector3::repeat(scale),
            opacity,
            color_sh,
            uncert_sh: ShCoeffs::zeros(DEFAULT_UNCERT_DEGREE).expect("valid degree"),
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        UnitQuaternion::from_quaternion(self.rotation).to_rotation_matrix().into_inner()
    }

    /// World-space covariance `R S S^T R^T`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let rs = self.rotation_matrix() * Matrix3::from_diagonal(&self.scale);
        rs * rs.transpose()
    }

    /// Color seen from `dir` (unit, gaussian toward viewer), clamped at zero.
    pub fn color(&self, dir: &Vector3<f64>) -> [f64; 3] {
        let mut basis = [0.0; 16];
        sh::basis_into(dir, &mut basis);
        self.color_sh
            .each_ref()
            .map(|c| (sh::dot(c.values(), &basis) + 0.5).max(0.0))
    }

    /// Uncertainty for a pre-normalized direction.
    pub fn uncertainty_unit(&self, dir: &Vector3<f64>) -> f64 {
        sigmoid(self.uncert_sh.eval_unit(dir))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.position.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
            && self.scale.iter().all(|v| v.is_finite())
            && self.opacity.is_finite();
        if !finite {
            return Err(Error::Validation("non-finite gaussian parameter".into()));
        }
        if (self.rotation.norm() - 1.0).abs() > QUAT_NORM_TOL {
            return Err(Error::Validation(format!(
                "rotation quaternion norm {} is not 1",
                self.rotation.norm()
            )));
        }
        if self.scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::Validation("scales must be positive".into()));
        }
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(Error::Validation(format!(
                "opacity {} outside (0, 1)",
                self.opacity
            )));
        }
        if self.color_sh.iter().any(|c| c.degree() != COLOR_DEGREE) {
            return Err(Error::Validation("color SH must be degree 3".into()));
        }
        if self.covariance().cholesky().is_none() {
            return Err(Error::Validation(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// DC coefficient that renders as `c` under the "+0.5" color convention.
pub fn rgb_to_dc(c: f64) -> f64 {
    (c - 0.5) / sh::SH_C0
}

/// Uncertainty of `g` seen from `dir`: the sigmoid of its SH field.
pub fn uncertainty_value(g: &Gaussian, dir: &Vector3<f64>) -> Result<f64> {
    let dir = sh::unit_direction(dir)?;
    Ok(g.uncertainty_unit(&dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gaussians: Vec<Gaussian>,
    pub background: [f64; 3],
}

impl Scene {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        Self {
            gaussians,
            background: [0.0; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Degree shared by every uncertainty field, or the default for an empty scene.
    pub fn uncert_degree(&self) -> usize {
        self.gaussians
            .first()
            .map_or(DEFAULT_UNCERT_DEGREE, |g| g.uncert_sh.degree())
    }

    /// Checks every element invariant, reporting the first offending index.
    pub fn validate(&self) -> Result<()> {
        if self.gaussians.is_empty() {
            return Err(Error::EmptyScene);
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Validation("background outside [0, 1]".into()));
        }
        let degree = self.uncert_degree();
        for (i, g) in self.gaussians.iter().enumerate() {
            g.validate()
                .map_err(|e| Error::Validation(format!("gaussian {i}: {e}")))?;
            if g.uncert_sh.degree() != degree {
                return Err(Error::Validation(format!(
                    "gaussian {i}: uncertainty degree {} differs from {degree}",
                    g.uncert_sh.degree()
                )));
            }
        }
        Ok(())
    }

    /// True when position, shape and opacity agree bit-for-bit with `other`.
    pub fn same_geometry(&self, other: &Scene) -> bool {
        self.gaussians.len() == other.gaussians.len()
            && self.gaussians.iter().zip(&other.gaussians).all(|(a, b)| {
                a.position == b.position
                    && a.rotation == b.rotation
                    && a.scale == b.scale
                    && a.opacity == b.opacity
            })
    }

    /// Replaces every uncertainty field with zeros of `degree`.
    pub fn reset_uncertainty(&mut self, degree: usize) -> Result<()> {
        let zeros = ShCoeffs::zeros(degree)?;
        for g in &mut self.gaussians {
            g.uncert_sh = zeros.clone();
        }
        Ok(())
    }
}
