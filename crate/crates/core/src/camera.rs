//! Pinhole camera: intrinsics plus a world-to-view rigid transform.
//!
//! Convention: the camera looks along +z in view space, image origin is the
//! top-left corner, pixel centers sit at integer + 0.5.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World-to-view rotation, row-major.
    pub rotation: [[f64; 3]; 3],
    /// World-to-view translation: x_view = R x_world + t.
    pub translation: [f64; 3],
}

impl Camera {
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation[r][c])
    }

    pub fn translation_vec(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.translation)
    }

    /// Camera center in world coordinates: −Rᵀ t.
    pub fn center(&self) -> Vector3<f64> {
        -self.rotation_matrix().transpose() * self.translation_vec()
    }

    pub fn world_to_view(&self, x_world: Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * x_world + self.translation_vec()
    }

    /// Camera positioned at `eye` looking at `target`, with a world up vector.
    /// Falls back to +x up when the viewing axis is parallel to `up`.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::x());
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -rot * eye;
        Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation: [
                [rot[(0, 0)], rot[(0, 1)], rot[(0, 2)]],
                [rot[(1, 0)], rot[(1, 1)], rot[(1, 2)]],
                [rot[(2, 0)], rot[(2, 1)], rot[(2, 2)]],
            ],
            translation: [t[0], t[1], t[2]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidParameter("focal lengths must be > 0".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be > 0".into()));
        }
        let r = self.rotation_matrix();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "extrinsic rotation not orthogonal (error {err:.2e})"
            )));
        }
        Ok(())
    }
}
