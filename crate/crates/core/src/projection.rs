//! EWA projection of conditional 3D Gaussians to screen space, plus the
//! depth ordering used by the compositor.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::camera::Camera;
use crate::error::Result;
use crate::gaussian::Conditional3D;
use crate::sh;

/// Default near-plane distance in world units.
pub const DEFAULT_NEAR: f64 = 0.01;
/// Default screen-space dilation added to 2D covariances (px²).
pub const DEFAULT_DILATION: f64 = 0.3;
/// Default screen-space cutoff in standard deviations.
pub const DEFAULT_SIGMA_CUTOFF: f64 = 3.0;

/// A Gaussian projected to screen space.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub mean2d: Vector2<f64>,
    /// 2×2 covariance in px², after dilation.
    pub cov2d: Matrix2<f64>,
    /// View-space z of the conditional mean.
    pub depth: f64,
    pub temporal_weight: f64,
    pub color: [f64; 3],
    pub opacity: f64,
}

/// Perspective projection of a world point: pixel coordinates plus depth.
/// Returns `None` when the point is behind the near plane (culled).
pub fn project_point(cam: &Camera, x_world: Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
    project_point_near(cam, x_world, DEFAULT_NEAR)
}

pub fn project_point_near(
    cam: &Camera,
    x_world: Vector3<f64>,
    near: f64,
) -> Option<(Vector2<f64>, f64)> {
    let v = cam.world_to_view(x_world);
    if v[2] <= near {
        return None;
    }
    let u = cam.fx * v[0] / v[2] + cam.cx;
    let w = cam.fy * v[1] / v[2] + cam.cy;
    Some((Vector2::new(u, w), v[2]))
}

/// Jacobian of the pinhole map at a view-space point.
/// Returns `None` when the point is behind the near plane.
pub fn projection_jacobian(cam: &Camera, x_view: Vector3<f64>) -> Option<Matrix2x3<f64>> {
    projection_jacobian_near(cam, x_view, DEFAULT_NEAR)
}

pub fn projection_jacobian_near(
    cam: &Camera,
    x_view: Vector3<f64>,
    near: f64,
) -> Option<Matrix2x3<f64>> {
    let (x, y, z) = (x_view[0], x_view[1], x_view[2]);
    if z <= near {
        return None;
    }
    Some(Matrix2x3::new(
        cam.fx / z,
        0.0,
        -cam.fx * x / (z * z),
        0.0,
        cam.fy / z,
        -cam.fy * y / (z * z),
    ))
}

/// EWA projection: cov2d = J W Σ_{x|t} Wᵀ Jᵀ + ε·I, with the SH color
/// evaluated along the world-space direction from the camera center to the
/// conditional mean. Returns `None` when the Gaussian is behind the camera
/// or its 3σ screen extent misses the image entirely.
pub fn project_gaussian(
    cam: &Camera,
    cond: &Conditional3D,
    sh_coeffs: &[[f64; 3]],
    opacity: f64,
    dilation: f64,
    near: f64,
    sigma_cutoff: f64,
) -> Result<Option<Splat2D>> {
    let x_view = cam.world_to_view(cond.mean);
    if x_view[2] <= near {
        return Ok(None);
    }
    let jac = projection_jacobian_near(cam, x_view, near).expect("z checked above");
    let w = cam.rotation_matrix();
    let cov_view: Matrix3<f64> = w * cond.cov * w.transpose();
    let cov2d: Matrix2<f64> =
        jac * cov_view * jac.transpose() + Matrix2::identity() * dilation;

    let mean2d = Vector2::new(
        cam.fx * x_view[0] / x_view[2] + cam.cx,
        cam.fy * x_view[1] / x_view[2] + cam.cy,
    );

    // Tight axis-aligned bounds of the cutoff ellipse.
    let rx = sigma_cutoff * cov2d[(0, 0)].max(0.0).sqrt();
    let ry = sigma_cutoff * cov2d[(1, 1)].max(0.0).sqrt();
    if mean2d[0] + rx < 0.0
        || mean2d[0] - rx > cam.width as f64
        || mean2d[1] + ry < 0.0
        || mean2d[1] - ry > cam.height as f64
    {
        return Ok(None);
    }

    let color = splat_color(cam, cond, sh_coeffs)?;
    Ok(Some(Splat2D {
        mean2d,
        cov2d,
        depth: x_view[2],
        temporal_weight: cond.temporal_weight,
        color,
        opacity,
    }))
}

pub(crate) fn splat_color(
    cam: &Camera,
    cond: &Conditional3D,
    sh_coeffs: &[[f64; 3]],
) -> Result<[f64; 3]> {
    let dir = view_direction(cam, cond.mean);
    sh::eval_sh_color(sh_coeffs, dir)
}

/// Unit world-space direction from the camera center to a point; +z when the
/// point coincides with the center.
pub(crate) fn view_direction(cam: &Camera, point: Vector3<f64>) -> [f64; 3] {
    let v = point - cam.center();
    let n = v.norm();
    if n < 1e-12 {
        [0.0, 0.0, 1.0]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

/// Stable ascending sort by depth; ties keep original order.
/// Returns the permutation: `perm[k]` is the index of the k-th nearest splat.
pub fn sort_by_depth(splats: &[Splat2D]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..splats.len()).collect();
    perm.sort_by(|&a, &b| {
        splats[a]
            .depth
            .partial_cmp(&splats[b].depth)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    perm
}
