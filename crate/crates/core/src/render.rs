//! Differentiable forward rendering: front-to-back alpha compositing of
//! depth-sorted splats, with the temporal marginal folded into each splat's
//! influence.
//!
//! Determinism: pixels are independent and each pixel accumulates its splats
//! in the depth-sorted order, so the output is bit-identical regardless of
//! how rows are partitioned across threads. Row bands have a fixed size
//! independent of the worker count.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::frame::{Image, Map};
use crate::gaussian::{build_covariance, condition_on_time, sigmoid, Gaussian4D};
use crate::projection::{self, projection_jacobian_near};
use crate::sh;

/// Rows per compositing band. Fixed so results do not depend on thread count.
pub(crate) const BAND_ROWS: usize = 16;

#[derive(Debug, Clone)]
pub struct RenderSettings {
    /// Residual-transmittance background color.
    pub background: [f64; 3],
    /// Per-pixel early termination threshold on transmittance.
    pub early_stop: f64,
    /// Screen-space influence cutoff in standard deviations.
    pub sigma_cutoff: f64,
    /// Temporal cutoff in standard deviations of the marginal.
    pub temporal_cutoff: f64,
    /// Screen-space dilation added to 2D covariances (px²).
    pub dilation: f64,
    /// Near-plane distance (world units).
    pub near: f64,
    /// 1 = sequential execution (bit-exact deterministic mode); any other
    /// value defers to the ambient rayon pool.
    pub threads: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            background: [1.0, 1.0, 1.0],
            early_stop: 1e-4,
            sigma_cutoff: projection::DEFAULT_SIGMA_CUTOFF,
            temporal_cutoff: 6.0,
            dilation: projection::DEFAULT_DILATION,
            near: projection::DEFAULT_NEAR,
            threads: 1,
        }
    }
}

impl RenderSettings {
    pub fn parallel(mut self) -> Self {
        self.threads = 0;
        self
    }

    pub fn with_background(mut self, background: [f64; 3]) -> Self {
        self.background = background;
        self
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    /// Composited linear RGB.
    pub image: Image,
    /// Accumulated opacity 1 − T_final.
    pub alpha: Map,
    /// Per-pixel contributor counts (diagnostics).
    pub contributors: Vec<u32>,
}

/// A Gaussian prepared for compositing, with the intermediates the backward
/// pass replays.
#[derive(Debug, Clone)]
pub(crate) struct PreparedSplat {
    pub gauss_index: usize,
    pub dt: f64,
    pub sigma_t: f64,
    pub cross: Vector3<f64>,
    pub cond_cov: Matrix3<f64>,
    pub temporal_weight: f64,
    pub x_view: Vector3<f64>,
    pub jac: Matrix2x3<f64>,
    pub mean2d: Vector2<f64>,
    pub conic: Matrix2<f64>,
    pub view_dir: [f64; 3],
    pub dir_len: f64,
    pub color: [f64; 3],
    pub sh_pre_clamp: [f64; 3],
    pub opacity: f64,
    pub depth: f64,
    /// Pixel bounds, half-open, clipped to the image.
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

/// Condition, cull, and project every Gaussian. Splats come back in scene
/// order; callers sort by depth.
pub(crate) fn prepare_splats(
    scene: &[Gaussian4D],
    cam: &Camera,
    t: f64,
    settings: &RenderSettings,
) -> Result<Vec<PreparedSplat>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    cam.validate()?;

    let prepare_one = |(gauss_index, g): (usize, &Gaussian4D)| -> Result<Option<PreparedSplat>> {
        let cov = build_covariance(g)?;
        let sigma_t = cov.temporal();
        if sigma_t < crate::gaussian::TEMPORAL_VARIANCE_FLOOR {
            return Err(Error::DegenerateTemporal {
                sigma_t,
                threshold: crate::gaussian::TEMPORAL_VARIANCE_FLOOR,
            });
        }
        let dt = t - g.mu[3];
        if dt.abs() > settings.temporal_cutoff * sigma_t.sqrt() {
            return Ok(None);
        }
        let cond = condition_on_time(&cov, g.mu, t)?;

        let x_view = cam.world_to_view(cond.mean);
        if x_view[2] <= settings.near {
            return Ok(None);
        }
        let jac = projection_jacobian_near(cam, x_view, settings.near).expect("z checked");
        let w_rot = cam.rotation_matrix();
        let cov_view = w_rot * cond.cov * w_rot.transpose();
        let cov2d: Matrix2<f64> =
            jac * cov_view * jac.transpose() + Matrix2::identity() * settings.dilation;
        let mean2d = Vector2::new(
            cam.fx * x_view[0] / x_view[2] + cam.cx,
            cam.fy * x_view[1] / x_view[2] + cam.cy,
        );

        let rx = settings.sigma_cutoff * cov2d[(0, 0)].max(0.0).sqrt();
        let ry = settings.sigma_cutoff * cov2d[(1, 1)].max(0.0).sqrt();
        let x0 = (mean2d[0] - rx).floor().max(0.0) as usize;
        let x1 = ((mean2d[0] + rx).ceil().max(0.0) as usize).min(cam.width as usize);
        let y0 = (mean2d[1] - ry).floor().max(0.0) as usize;
        let y1 = ((mean2d[1] + ry).ceil().max(0.0) as usize).min(cam.height as usize);
        if x0 >= x1 || y0 >= y1 {
            return Ok(None);
        }

        let det = cov2d[(0, 0)] * cov2d[(1, 1)] - cov2d[(0, 1)] * cov2d[(1, 0)];
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::NumericFailure(format!(
                "non-positive-definite 2D covariance (det {det:.3e})"
            )));
        }
        let conic = Matrix2::new(
            cov2d[(1, 1)] / det,
            -cov2d[(0, 1)] / det,
            -cov2d[(1, 0)] / det,
            cov2d[(0, 0)] / det,
        );

        let center = cam.center();
        let v = cond.mean - center;
        let dir_len = v.norm();
        let view_dir = if dir_len < 1e-12 {
            [0.0, 0.0, 1.0]
        } else {
            [v[0] / dir_len, v[1] / dir_len, v[2] / dir_len]
        };
        let sh_pre_clamp = sh::eval_sh_color_pre_clamp(&g.sh_coeffs, view_dir)?;
        let color = [
            sh_pre_clamp[0].max(0.0),
            sh_pre_clamp[1].max(0.0),
            sh_pre_clamp[2].max(0.0),
        ];

        Ok(Some(PreparedSplat {
            gauss_index,
            dt,
            sigma_t,
            cross: cov.cross(),
            cond_cov: cond.cov,
            temporal_weight: cond.temporal_weight,
            x_view,
            jac,
            mean2d,
            conic,
            view_dir,
            dir_len,
            color,
            sh_pre_clamp,
            opacity: sigmoid(g.opacity_logit),
            depth: x_view[2],
            x0,
            x1,
            y0,
            y1,
        }))
    };

    let results: Vec<Result<Option<PreparedSplat>>> = if settings.threads == 1 {
        scene.iter().enumerate().map(prepare_one).collect()
    } else {
        scene.par_iter().enumerate().map(prepare_one).collect()
    };
    let mut splats = Vec::with_capacity(results.len());
    for r in results {
        if let Some(s) = r? {
            splats.push(s);
        }
    }
    Ok(splats)
}

/// Stable ascending depth order over prepared splats (ties keep scene order,
/// which the scene-order construction of `prepare_splats` guarantees).
pub(crate) fn depth_order(splats: &[PreparedSplat]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_by(|&a, &b| {
        splats[a]
            .depth
            .partial_cmp(&splats[b].depth)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// Render the scene at timestamp `t`. Each pixel composites the depth-sorted
/// splats front to back; the influence of a splat is its temporal marginal
/// times the 2D Gaussian at the pixel center, evaluated inside the
/// `sigma_cutoff` ellipse only.
pub fn render(
    scene: &[Gaussian4D],
    cam: &Camera,
    t: f64,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    let splats = prepare_splats(scene, cam, t, settings)?;
    let order = depth_order(&splats);

    let width = cam.width as usize;
    let height = cam.height as usize;
    let mut image = Image::new(width, height);
    let mut alpha = Map::new(width, height);
    let mut contributors = vec![0u32; width * height];

    if settings.threads == 1 {
        image
            .data_mut()
            .chunks_mut(BAND_ROWS * width * 3)
            .zip(alpha.data_mut().chunks_mut(BAND_ROWS * width))
            .zip(contributors.chunks_mut(BAND_ROWS * width))
            .enumerate()
            .for_each(|(band, ((img, alpha), counts))| {
                composite_band(
                    band * BAND_ROWS,
                    alpha.len() / width,
                    width,
                    &splats,
                    &order,
                    settings,
                    img,
                    alpha,
                    counts,
                )
            });
    } else {
        image
            .data_mut()
            .par_chunks_mut(BAND_ROWS * width * 3)
            .zip(alpha.data_mut().par_chunks_mut(BAND_ROWS * width))
            .zip(contributors.par_chunks_mut(BAND_ROWS * width))
            .enumerate()
            .for_each(|(band, ((img, alpha), counts))| {
                composite_band(
                    band * BAND_ROWS,
                    alpha.len() / width,
                    width,
                    &splats,
                    &order,
                    settings,
                    img,
                    alpha,
                    counts,
                )
            });
    }

    Ok(RenderOutput {
        image,
        alpha,
        contributors,
    })
}

#[allow(clippy::too_many_arguments)]
fn composite_band(
    band_y0: usize,
    rows: usize,
    width: usize,
    splats: &[PreparedSplat],
    order: &[usize],
    settings: &RenderSettings,
    img: &mut [f64],
    alpha: &mut [f64],
    counts: &mut [u32],
) {
    let mut trans = vec![1.0f64; rows * width];
    let band_y1 = band_y0 + rows;
    let cutoff_sq = settings.sigma_cutoff * settings.sigma_cutoff;

    for &si in order {
        let s = &splats[si];
        if s.y1 <= band_y0 || s.y0 >= band_y1 {
            continue;
        }
        let ys = s.y0.max(band_y0);
        let ye = s.y1.min(band_y1);
        for y in ys..ye {
            let py = y as f64 + 0.5;
            let row = (y - band_y0) * width;
            for x in s.x0..s.x1 {
                let idx = row + x;
                let t_cur = trans[idx];
                if t_cur < settings.early_stop {
                    continue;
                }
                let dx = x as f64 + 0.5 - s.mean2d[0];
                let dy = py - s.mean2d[1];
                let q = s.conic[(0, 0)] * dx * dx
                    + 2.0 * s.conic[(0, 1)] * dx * dy
                    + s.conic[(1, 1)] * dy * dy;
                if q > cutoff_sq {
                    continue;
                }
                let f = s.temporal_weight * (-0.5 * q).exp();
                let w_blend = f * s.opacity; // < 1 since f ≤ 1 and α < 1
                let contribution = w_blend * t_cur;
                let pi = idx * 3;
                img[pi] += contribution * s.color[0];
                img[pi + 1] += contribution * s.color[1];
                img[pi + 2] += contribution * s.color[2];
                counts[idx] += 1;
                trans[idx] = t_cur * (1.0 - w_blend);
            }
        }
    }

    for idx in 0..rows * width {
        let t_final = trans[idx];
        let pi = idx * 3;
        img[pi] += t_final * settings.background[0];
        img[pi + 1] += t_final * settings.background[1];
        img[pi + 2] += t_final * settings.background[2];
        alpha[idx] = 1.0 - t_final;
    }
}
