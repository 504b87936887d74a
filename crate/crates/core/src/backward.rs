//! Analytic backward pass of the rasterizer: reverse accumulation through
//! compositing, 2D Gaussian evaluation, EWA projection, temporal
//! conditioning, covariance assembly, activations, and SH color.
//!
//! The backward replays exactly the forward pass's culling, cutoff, and
//! early-termination decisions. Per pixel, contributors are replayed
//! front-to-back and then walked in reverse while maintaining the color
//! composited behind each splat, which avoids any division by (1 − w).

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3};
use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::frame::Image;
use crate::gaussian::{
    left_isoclinic, normalize_quat, quat_norm, right_isoclinic, Gaussian4D,
};
use crate::render::{depth_order, prepare_splats, PreparedSplat, RenderSettings, BAND_ROWS};
use crate::sh;

/// Gradients for one Gaussian, same shapes as [`Gaussian4D`]'s fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGrad {
    pub mu: [f64; 4],
    pub log_scale: [f64; 4],
    pub rot_left: [f64; 4],
    pub rot_right: [f64; 4],
    pub opacity_logit: f64,
    pub sh: Vec<[f64; 3]>,
}

impl GaussianGrad {
    pub fn zeros(sh_len: usize) -> Self {
        Self {
            mu: [0.0; 4],
            log_scale: [0.0; 4],
            rot_left: [0.0; 4],
            rot_right: [0.0; 4],
            opacity_logit: 0.0,
            sh: vec![[0.0; 3]; sh_len],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.rot_left.iter().all(|v| v.is_finite())
            && self.rot_right.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
            && self.sh.iter().flatten().all(|v| v.is_finite())
    }
}

/// Per-Gaussian gradients for a whole scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub per_gaussian: Vec<GaussianGrad>,
}

impl ParamGradients {
    pub fn zeros(scene: &[Gaussian4D]) -> Self {
        Self {
            per_gaussian: scene
                .iter()
                .map(|g| GaussianGrad::zeros(g.sh_coeffs.len()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGradients) {
        assert_eq!(self.per_gaussian.len(), other.per_gaussian.len());
        for (a, b) in self.per_gaussian.iter_mut().zip(&other.per_gaussian) {
            for k in 0..4 {
                a.mu[k] += b.mu[k];
                a.log_scale[k] += b.log_scale[k];
                a.rot_left[k] += b.rot_left[k];
                a.rot_right[k] += b.rot_right[k];
            }
            a.opacity_logit += b.opacity_logit;
            for (s, o) in a.sh.iter_mut().zip(&b.sh) {
                for c in 0..3 {
                    s[c] += o[c];
                }
            }
        }
    }
}

/// Pixel-stage gradient sums for one splat.
#[derive(Debug, Clone)]
struct SplatAccum {
    d_mean2d: Vector2<f64>,
    d_conic: Matrix2<f64>,
    d_color: [f64; 3],
    d_alpha: f64,
    d_wt: f64,
}

impl SplatAccum {
    fn zero() -> Self {
        Self {
            d_mean2d: Vector2::zeros(),
            d_conic: Matrix2::zeros(),
            d_color: [0.0; 3],
            d_alpha: 0.0,
            d_wt: 0.0,
        }
    }

    fn is_zero(&self) -> bool {
        self.d_mean2d == Vector2::zeros()
            && self.d_conic == Matrix2::zeros()
            && self.d_color == [0.0; 3]
            && self.d_alpha == 0.0
            && self.d_wt == 0.0
    }

    fn add_assign(&mut self, other: &SplatAccum) {
        self.d_mean2d += other.d_mean2d;
        self.d_conic += other.d_conic;
        for c in 0..3 {
            self.d_color[c] += other.d_color[c];
        }
        self.d_alpha += other.d_alpha;
        self.d_wt += other.d_wt;
    }
}

/// Gradient of a scalar loss with respect to every Gaussian parameter, given
/// the loss gradient with respect to the rendered image. Culling and
/// termination decisions are identical to the paired forward render.
pub fn render_backward(
    scene: &[Gaussian4D],
    cam: &Camera,
    t: f64,
    d_image: &Image,
    settings: &RenderSettings,
) -> Result<ParamGradients> {
    if d_image.width() != cam.width as usize || d_image.height() != cam.height as usize {
        return Err(Error::ShapeMismatch(format!(
            "d_image {}x{} does not match camera {}x{}",
            d_image.width(),
            d_image.height(),
            cam.width,
            cam.height
        )));
    }
    let splats = prepare_splats(scene, cam, t, settings)?;
    let order = depth_order(&splats);
    let width = cam.width as usize;
    let height = cam.height as usize;
    let n_bands = height.div_ceil(BAND_ROWS);

    // Pixel stage: per-band accumulators reduced in fixed band order, so the
    // result is independent of the worker count.
    let band_accums: Vec<Vec<SplatAccum>> = if settings.threads == 1 {
        (0..n_bands)
            .map(|b| backward_band(b, width, height, &splats, &order, settings, d_image))
            .collect()
    } else {
        (0..n_bands)
            .into_par_iter()
            .map(|b| backward_band(b, width, height, &splats, &order, settings, d_image))
            .collect()
    };
    let mut accums = vec![SplatAccum::zero(); splats.len()];
    for band in band_accums {
        for (a, b) in accums.iter_mut().zip(&band) {
            a.add_assign(b);
        }
    }

    // Parameter stage: chain each splat's pixel gradients back to its
    // Gaussian. One splat per Gaussian, so target slots are unique.
    let mut grads = ParamGradients::zeros(scene);
    let chained: Vec<(usize, GaussianGrad)> = if settings.threads == 1 {
        splats
            .iter()
            .zip(&accums)
            .filter(|(_, a)| !a.is_zero())
            .map(|(s, a)| (s.gauss_index, chain_splat(&scene[s.gauss_index], s, a, cam)))
            .collect()
    } else {
        splats
            .par_iter()
            .zip(&accums)
            .filter(|(_, a)| !a.is_zero())
            .map(|(s, a)| (s.gauss_index, chain_splat(&scene[s.gauss_index], s, a, cam)))
            .collect()
    };
    for (gi, g) in chained {
        grads.per_gaussian[gi] = g;
    }
    Ok(grads)
}

fn backward_band(
    band: usize,
    width: usize,
    height: usize,
    splats: &[PreparedSplat],
    order: &[usize],
    settings: &RenderSettings,
    d_image: &Image,
) -> Vec<SplatAccum> {
    let band_y0 = band * BAND_ROWS;
    let band_y1 = (band_y0 + BAND_ROWS).min(height);
    let cutoff_sq = settings.sigma_cutoff * settings.sigma_cutoff;

    let band_list: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&si| splats[si].y1 > band_y0 && splats[si].y0 < band_y1)
        .collect();

    let mut accums = vec![SplatAccum::zero(); splats.len()];
    // (splat index, 2D gaussian value, transmittance before the splat)
    let mut contributors: Vec<(usize, f64, f64)> = Vec::new();

    for y in band_y0..band_y1 {
        let py = y as f64 + 0.5;
        for x in 0..width {
            let g = d_image.pixel(x, y);
            if g == [0.0, 0.0, 0.0] {
                // Zero upstream gradient contributes nothing at this pixel.
                continue;
            }
            let px = x as f64 + 0.5;

            // Forward replay.
            contributors.clear();
            let mut trans = 1.0f64;
            for &si in &band_list {
                if trans < settings.early_stop {
                    break;
                }
                let s = &splats[si];
                if y < s.y0 || y >= s.y1 || x < s.x0 || x >= s.x1 {
                    continue;
                }
                let dx = px - s.mean2d[0];
                let dy = py - s.mean2d[1];
                let q = s.conic[(0, 0)] * dx * dx
                    + 2.0 * s.conic[(0, 1)] * dx * dy
                    + s.conic[(1, 1)] * dy * dy;
                if q > cutoff_sq {
                    continue;
                }
                let g2 = (-0.5 * q).exp();
                contributors.push((si, g2, trans));
                let w = s.temporal_weight * g2 * s.opacity;
                trans *= 1.0 - w;
            }

            // Reverse sweep maintaining the color composited behind.
            let mut behind = settings.background;
            for &(si, g2, t_before) in contributors.iter().rev() {
                let s = &splats[si];
                let f = s.temporal_weight * g2;
                let w = f * s.opacity;
                let acc = &mut accums[si];

                let wt = w * t_before;
                acc.d_color[0] += g[0] * wt;
                acc.d_color[1] += g[1] * wt;
                acc.d_color[2] += g[2] * wt;

                let dl_dw = t_before
                    * (g[0] * (s.color[0] - behind[0])
                        + g[1] * (s.color[1] - behind[1])
                        + g[2] * (s.color[2] - behind[2]));
                let dl_df = dl_dw * s.opacity;
                acc.d_alpha += dl_dw * f;
                acc.d_wt += dl_df * g2;

                let dl_dg2 = dl_df * s.temporal_weight;
                let dl_dq = -0.5 * g2 * dl_dg2;
                let dx = px - s.mean2d[0];
                let dy = py - s.mean2d[1];
                let ad_x = s.conic[(0, 0)] * dx + s.conic[(0, 1)] * dy;
                let ad_y = s.conic[(1, 0)] * dx + s.conic[(1, 1)] * dy;
                acc.d_mean2d[0] += dl_dq * (-2.0 * ad_x);
                acc.d_mean2d[1] += dl_dq * (-2.0 * ad_y);
                acc.d_conic[(0, 0)] += dl_dq * dx * dx;
                acc.d_conic[(0, 1)] += dl_dq * dx * dy;
                acc.d_conic[(1, 0)] += dl_dq * dy * dx;
                acc.d_conic[(1, 1)] += dl_dq * dy * dy;

                behind = [
                    w * s.color[0] + (1.0 - w) * behind[0],
                    w * s.color[1] + (1.0 - w) * behind[1],
                    w * s.color[2] + (1.0 - w) * behind[2],
                ];
            }
        }
    }
    accums
}

/// Chain one splat's pixel-stage gradients back to its Gaussian parameters.
fn chain_splat(
    g: &Gaussian4D,
    s: &PreparedSplat,
    acc: &SplatAccum,
    cam: &Camera,
) -> GaussianGrad {
    let mut out = GaussianGrad::zeros(g.sh_coeffs.len());

    // Opacity: α = sigmoid(logit).
    let alpha = s.opacity;
    out.opacity_logit = acc.d_alpha * alpha * (1.0 - alpha);

    // Conic → 2D covariance: A = C⁻¹ ⇒ dL/dC = −A (dL/dA) A.
    let d_cov2d: Matrix2<f64> = -s.conic * acc.d_conic * s.conic;

    // cov2d = J (W Σc Wᵀ) Jᵀ + εI.
    let w_rot = cam.rotation_matrix();
    let m_view: Matrix3<f64> = w_rot * s.cond_cov * w_rot.transpose();
    let d_m: Matrix3<f64> = s.jac.transpose() * d_cov2d * s.jac;
    let d_cond_cov: Matrix3<f64> = w_rot.transpose() * d_m * w_rot;
    let d_jac = 2.0 * d_cov2d * s.jac * m_view;

    // J and the projection both depend on the view-space position.
    let (xv, yv, zv) = (s.x_view[0], s.x_view[1], s.x_view[2]);
    let (fx, fy) = (cam.fx, cam.fy);
    let z2 = zv * zv;
    let z3 = z2 * zv;
    let mut d_xview = Vector3::zeros();
    d_xview[0] += d_jac[(0, 2)] * (-fx / z2);
    d_xview[1] += d_jac[(1, 2)] * (-fy / z2);
    d_xview[2] += d_jac[(0, 0)] * (-fx / z2)
        + d_jac[(1, 1)] * (-fy / z2)
        + d_jac[(0, 2)] * (2.0 * fx * xv / z3)
        + d_jac[(1, 2)] * (2.0 * fy * yv / z3);
    d_xview += s.jac.transpose() * acc.d_mean2d;

    let mut d_cond_mean: Vector3<f64> = w_rot.transpose() * d_xview;

    // SH color, masked by the clamp at 0, chained through direction
    // normalization into the conditional mean.
    let degree = g.sh_degree().expect("validated by prepare");
    let (basis, n_coeffs) = sh::sh_basis(degree, s.view_dir);
    let d_shval = [
        if s.sh_pre_clamp[0] > 0.0 { acc.d_color[0] } else { 0.0 },
        if s.sh_pre_clamp[1] > 0.0 { acc.d_color[1] } else { 0.0 },
        if s.sh_pre_clamp[2] > 0.0 { acc.d_color[2] } else { 0.0 },
    ];
    for k in 0..n_coeffs {
        for c in 0..3 {
            out.sh[k][c] = d_shval[c] * basis[k];
        }
    }
    if degree > 0 && s.dir_len > 1e-12 {
        let basis_grad = sh::sh_basis_grad(degree, s.view_dir);
        let mut d_dir = Vector3::zeros();
        for k in 1..n_coeffs {
            let scale = d_shval[0] * g.sh_coeffs[k][0]
                + d_shval[1] * g.sh_coeffs[k][1]
                + d_shval[2] * g.sh_coeffs[k][2];
            d_dir[0] += scale * basis_grad[k][0];
            d_dir[1] += scale * basis_grad[k][1];
            d_dir[2] += scale * basis_grad[k][2];
        }
        let dir = Vector3::new(s.view_dir[0], s.view_dir[1], s.view_dir[2]);
        d_cond_mean += (d_dir - dir * dir.dot(&d_dir)) / s.dir_len;
    }

    // Conditional covariance Σc = Σxx − c cᵀ/σt.
    let g3 = d_cond_cov;
    let cross = s.cross;
    let sigma_t = s.sigma_t;
    let mut d_cross: Vector3<f64> = -2.0 * (g3 * cross) / sigma_t;
    let mut d_sigma_t = (cross.transpose() * g3 * cross)[(0, 0)] / (sigma_t * sigma_t);

    // Conditional mean μc = μx + c·(dt/σt).
    let dt = s.dt;
    let dot_dc = d_cond_mean.dot(&cross);
    let d_mu_x = d_cond_mean;
    d_cross += d_cond_mean * (dt / sigma_t);
    let mut d_dt = dot_dc / sigma_t;
    d_sigma_t -= dot_dc * dt / (sigma_t * sigma_t);

    // Temporal marginal wt = exp(−½ dt²/σt).
    let wt = s.temporal_weight;
    d_dt += acc.d_wt * wt * (-dt / sigma_t);
    d_sigma_t += acc.d_wt * wt * 0.5 * dt * dt / (sigma_t * sigma_t);

    // dt = t − μt.
    let d_mu_t = -d_dt;
    out.mu = [d_mu_x[0], d_mu_x[1], d_mu_x[2], d_mu_t];

    // Assemble the gradient on the full 4×4 covariance. The forward reads the
    // spatial block, the (·,3) cross column, and the (3,3) entry.
    let mut g4 = Matrix4::zeros();
    for r in 0..3 {
        for c in 0..3 {
            g4[(r, c)] = g3[(r, c)];
        }
        g4[(r, 3)] = d_cross[r];
    }
    g4[(3, 3)] = d_sigma_t;

    // Σ4 = R D Rᵀ with D = diag(exp(2·log_scale)).
    let ql = normalize_quat(g.rot_left);
    let qr = normalize_quat(g.rot_right);
    let l_mat = left_isoclinic(ql);
    let r_mat = right_isoclinic(qr);
    let rot = l_mat * r_mat;
    let d_vals = [
        (2.0 * g.log_scale[0]).exp(),
        (2.0 * g.log_scale[1]).exp(),
        (2.0 * g.log_scale[2]).exp(),
        (2.0 * g.log_scale[3]).exp(),
    ];
    let d_diag = Matrix4::from_diagonal(&nalgebra::Vector4::from_row_slice(&d_vals));

    let d_rot: Matrix4<f64> = (g4 + g4.transpose()) * rot * d_diag;
    let rt_g4t_r = rot.transpose() * g4.transpose() * rot;
    for k in 0..4 {
        out.log_scale[k] = 2.0 * d_vals[k] * rt_g4t_r[(k, k)];
    }

    // R = L(q̂l)·Rt(q̂r); both factors are linear in their quaternions.
    let d_l = d_rot * r_mat.transpose();
    let d_r = l_mat.transpose() * d_rot;
    let mut d_ql_hat = [0.0; 4];
    let mut d_qr_hat = [0.0; 4];
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        d_ql_hat[k] = frobenius(&d_l, &left_isoclinic(e));
        d_qr_hat[k] = frobenius(&d_r, &right_isoclinic(e));
    }
    out.rot_left = quat_normalization_chain(g.rot_left, ql, d_ql_hat);
    out.rot_right = quat_normalization_chain(g.rot_right, qr, d_qr_hat);

    out
}

fn frobenius(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    let mut sum = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            sum += a[(r, c)] * b[(r, c)];
        }
    }
    sum
}

/// Chain through q̂ = q/‖q‖: dL/dq = (dL/dq̂ − q̂·(q̂ · dL/dq̂)) / ‖q‖.
fn quat_normalization_chain(q_raw: [f64; 4], q_hat: [f64; 4], d_hat: [f64; 4]) -> [f64; 4] {
    let n = quat_norm(q_raw);
    let dot = q_hat[0] * d_hat[0] + q_hat[1] * d_hat[1] + q_hat[2] * d_hat[2] + q_hat[3] * d_hat[3];
    [
        (d_hat[0] - q_hat[0] * dot) / n,
        (d_hat[1] - q_hat[1] * dot) / n,
        (d_hat[2] - q_hat[2] * dot) / n,
        (d_hat[3] - q_hat[3] * dot) / n,
    ]
}
