//! The spacetime Gaussian primitive and its closed-form math: isoclinic
//! rotation pairs, covariance assembly, temporal conditioning, density.
//!
//! Coordinate order everywhere is (x, y, z, t): spatial components first,
//! time last. Quaternions are (w, x, y, z).

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

/// Below this temporal variance, conditioning on time is refused.
pub const TEMPORAL_VARIANCE_FLOOR: f64 = 1e-12;

/// One spacetime Gaussian. Scales are stored as logs and opacity as a logit
/// so that unconstrained optimization cannot produce invalid parameters.
/// Time lives in normalized [0, 1] across the input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian4D {
    /// Spacetime mean (x, y, z, t).
    pub mu: [f64; 4],
    /// Natural log of per-axis scaling factors; exp forms the diagonal S.
    pub log_scale: [f64; 4],
    /// Left isoclinic factor of the 4D rotation, (w, x, y, z).
    pub rot_left: [f64; 4],
    /// Right isoclinic factor, (w, x, y, z).
    pub rot_right: [f64; 4],
    /// Opacity α = sigmoid(opacity_logit).
    pub opacity_logit: f64,
    /// Spherical-harmonic RGB coefficients, length (L+1)² for degree L.
    pub sh_coeffs: Vec<[f64; 3]>,
}

impl Gaussian4D {
    /// Isotropic unit Gaussian at the origin with identity rotation,
    /// opacity 0.5 and the given SH degree (all coefficients zero).
    pub fn unit(sh_degree: usize) -> Self {
        Self {
            mu: [0.0; 4],
            log_scale: [0.0; 4],
            rot_left: [1.0, 0.0, 0.0, 0.0],
            rot_right: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: 0.0,
            sh_coeffs: vec![[0.0; 3]; crate::sh::coeff_count(sh_degree)],
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn sh_degree(&self) -> Option<usize> {
        crate::sh::degree_for_count(self.sh_coeffs.len())
    }

    /// Re-normalize both rotation quaternions in place.
    pub fn normalize_rotations(&mut self) {
        self.rot_left = normalize_quat(self.rot_left);
        self.rot_right = normalize_quat(self.rot_right);
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.mu.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh_coeffs.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "gaussian has non-finite parameters".into(),
            ));
        }
        if quat_norm(self.rot_left) < 1e-12 || quat_norm(self.rot_right) < 1e-12 {
            return Err(Error::InvalidParameter("zero-norm quaternion".into()));
        }
        if self.sh_degree().is_none() {
            return Err(Error::InvalidParameter(format!(
                "sh coefficient count {} is not (L+1)^2 for L in 0..=3",
                self.sh_coeffs.len()
            )));
        }
        Ok(())
    }
}

/// Full 4×4 covariance Σ = R S Sᵀ Rᵀ with named block views.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance4 {
    pub sigma: Matrix4<f64>,
}

impl Covariance4 {
    /// Spatial 3×3 block Σ_x.
    pub fn spatial(&self) -> Matrix3<f64> {
        self.sigma.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Space-time cross column Σ_{x,t}.
    pub fn cross(&self) -> Vector3<f64> {
        Vector3::new(self.sigma[(0, 3)], self.sigma[(1, 3)], self.sigma[(2, 3)])
    }

    /// Temporal variance Σ_t.
    pub fn temporal(&self) -> f64 {
        self.sigma[(3, 3)]
    }
}

/// The 3D Gaussian obtained by conditioning a 4D Gaussian on a timestamp,
/// plus the temporal marginal evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional3D {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
    /// G_t(t | μ_t, Σ_t) ∈ (0, 1], equal to 1 iff t = μ_t.
    pub temporal_weight: f64,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn quat_norm(q: [f64; 4]) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
}

#[inline]
pub fn normalize_quat(q: [f64; 4]) -> [f64; 4] {
    let n = quat_norm(q);
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Maps point index (x, y, z, t) to quaternion component index (w, x, y, z):
/// a point is read as the quaternion t + x·i + y·j + z·k.
const QUAT_IDX: [usize; 4] = [1, 2, 3, 0];

/// 4×4 matrix of quaternion left-multiplication by `q`, expressed in
/// (x, y, z, t) point order. Linear in `q`.
pub fn left_isoclinic(q: [f64; 4]) -> Matrix4<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    // Rows/cols in quaternion (w, x, y, z) order.
    let m = [
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ];
    permute_to_point_order(&m)
}

/// 4×4 matrix of quaternion right-multiplication by `q`, in point order.
pub fn right_isoclinic(q: [f64; 4]) -> Matrix4<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let m = [
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ];
    permute_to_point_order(&m)
}

fn permute_to_point_order(m: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| m[QUAT_IDX[r]][QUAT_IDX[c]])
}

/// R = L(q_l)·Rt(q_r): the 4D rotation spanned by a pair of isoclinic
/// factors. Quaternions are normalized internally; zero quaternions are
/// rejected.
pub fn build_rotation(rot_left: [f64; 4], rot_right: [f64; 4]) -> Result<Matrix4<f64>> {
    if quat_norm(rot_left) < 1e-12 || quat_norm(rot_right) < 1e-12 {
        return Err(Error::InvalidParameter("zero-norm quaternion".into()));
    }
    let ql = normalize_quat(rot_left);
    let qr = normalize_quat(rot_right);
    Ok(left_isoclinic(ql) * right_isoclinic(qr))
}

/// Σ = R S Sᵀ Rᵀ with S = diag(exp(log_scale)).
pub fn build_covariance(g: &Gaussian4D) -> Result<Covariance4> {
    let r = build_rotation(g.rot_left, g.rot_right)?;
    let d = Vector4::new(
        (2.0 * g.log_scale[0]).exp(),
        (2.0 * g.log_scale[1]).exp(),
        (2.0 * g.log_scale[2]).exp(),
        (2.0 * g.log_scale[3]).exp(),
    );
    let sigma = r * Matrix4::from_diagonal(&d) * r.transpose();
    Ok(Covariance4 { sigma })
}

/// Condition the 4D Gaussian on time t: Schur-complement mean and covariance
/// of the spatial block, plus the temporal marginal weight.
pub fn condition_on_time(cov: &Covariance4, mu: [f64; 4], t: f64) -> Result<Conditional3D> {
    let sigma_t = cov.temporal();
    if sigma_t < TEMPORAL_VARIANCE_FLOOR {
        return Err(Error::DegenerateTemporal {
            sigma_t,
            threshold: TEMPORAL_VARIANCE_FLOOR,
        });
    }
    let cross = cov.cross();
    let dt = t - mu[3];
    let mean = Vector3::new(mu[0], mu[1], mu[2]) + cross * (dt / sigma_t);
    let cov3 = cov.spatial() - cross * cross.transpose() / sigma_t;
    let temporal_weight = (-0.5 * dt * dt / sigma_t).exp();
    Ok(Conditional3D {
        mean,
        cov: cov3,
        temporal_weight,
    })
}

/// Unnormalized density exp(−½ (p−μ)ᵀ Σ⁻¹ (p−μ)); peak value 1 at p = μ.
pub fn eval_density(g: &Gaussian4D, p: [f64; 4]) -> Result<f64> {
    let cov = build_covariance(g)?;
    let delta = Vector4::new(
        p[0] - g.mu[0],
        p[1] - g.mu[1],
        p[2] - g.mu[2],
        p[3] - g.mu[3],
    );
    if delta == Vector4::zeros() {
        return Ok(1.0);
    }
    match cov.sigma.try_inverse() {
        Some(inv) => Ok((-0.5 * (delta.transpose() * inv * delta)[(0, 0)]).exp()),
        // Numerically singular covariance: off-mean density is indistinguishable from 0.
        None => Ok(0.0),
    }
}

/// Standard 3×3 rotation matrix of a unit quaternion (w, x, y, z).
pub fn quat_to_rotation3(q: [f64; 4]) -> Matrix3<f64> {
    let q = normalize_quat(q);
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}
