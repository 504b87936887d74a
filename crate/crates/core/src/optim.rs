//! Adam with per-parameter-group learning rates over a Gaussian scene.

use crate::backward::{GaussianGrad, ParamGradients};
use crate::error::{Error, Result};
use crate::gaussian::Gaussian4D;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Per-group learning rates, scaled to a 0.5-radius scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub position: f64,
    pub log_scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 1.6e-3,
            log_scale: 5e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            sh: 2.5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Position,
    LogScale,
    Rotation,
    Opacity,
    Sh,
}

pub const PARAM_GROUPS: [ParamGroup; 5] = [
    ParamGroup::Position,
    ParamGroup::LogScale,
    ParamGroup::Rotation,
    ParamGroup::Opacity,
    ParamGroup::Sh,
];

/// First/second moment buffers plus the step counter and non-finite-skip
/// diagnostics per group.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<GaussianGrad>,
    pub v: Vec<GaussianGrad>,
    pub step: u64,
    pub skipped: [u64; 5],
}

impl AdamState {
    pub fn new(scene: &[Gaussian4D]) -> Self {
        Self {
            m: scene
                .iter()
                .map(|g| GaussianGrad::zeros(g.sh_coeffs.len()))
                .collect(),
            v: scene
                .iter()
                .map(|g| GaussianGrad::zeros(g.sh_coeffs.len()))
                .collect(),
            step: 0,
            skipped: [0; 5],
        }
    }

    /// Drop state rows for pruned Gaussians; `keep` is parallel to the scene.
    pub fn retain(&mut self, keep: &[bool]) {
        let mut it = keep.iter();
        self.m.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.v.retain(|_| *it.next().unwrap());
    }

    pub fn total_skipped(&self) -> u64 {
        self.skipped.iter().sum()
    }
}

fn group_is_finite(grads: &ParamGradients, group: ParamGroup) -> bool {
    grads.per_gaussian.iter().all(|g| match group {
        ParamGroup::Position => g.mu.iter().all(|v| v.is_finite()),
        ParamGroup::LogScale => g.log_scale.iter().all(|v| v.is_finite()),
        ParamGroup::Rotation => {
            g.rot_left.iter().all(|v| v.is_finite())
                && g.rot_right.iter().all(|v| v.is_finite())
        }
        ParamGroup::Opacity => g.opacity_logit.is_finite(),
        ParamGroup::Sh => g.sh.iter().flatten().all(|v| v.is_finite()),
    })
}

#[inline]
fn adam_update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, bc1: f64, bc2: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
}

/// One bias-corrected Adam step. Parameter groups containing a non-finite
/// gradient are skipped for the whole step and counted in the diagnostics.
/// Rotation quaternions are re-normalized afterwards.
pub fn adam_step(
    scene: &mut [Gaussian4D],
    grads: &ParamGradients,
    state: &mut AdamState,
    lrs: &LearningRates,
) -> Result<()> {
    if grads.per_gaussian.len() != scene.len() || state.m.len() != scene.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam over {} gaussians with {} gradients and {} state rows",
            scene.len(),
            grads.per_gaussian.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);

    let mut active = [true; 5];
    for (i, group) in PARAM_GROUPS.iter().enumerate() {
        if !group_is_finite(grads, *group) {
            active[i] = false;
            state.skipped[i] += 1;
            log::warn!("skipping {group:?} update: non-finite gradient at step {}", state.step);
        }
    }

    for (((p, g), m), v) in scene
        .iter_mut()
        .zip(&grads.per_gaussian)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if active[0] {
            for k in 0..4 {
                adam_update(&mut p.mu[k], g.mu[k], &mut m.mu[k], &mut v.mu[k], lrs.position, bc1, bc2);
            }
        }
        if active[1] {
            for k in 0..4 {
                adam_update(
                    &mut p.log_scale[k],
                    g.log_scale[k],
                    &mut m.log_scale[k],
                    &mut v.log_scale[k],
                    lrs.log_scale,
                    bc1,
                    bc2,
                );
            }
        }
        if active[2] {
            for k in 0..4 {
                adam_update(
                    &mut p.rot_left[k],
                    g.rot_left[k],
                    &mut m.rot_left[k],
                    &mut v.rot_left[k],
                    lrs.rotation,
                    bc1,
                    bc2,
                );
                adam_update(
                    &mut p.rot_right[k],
                    g.rot_right[k],
                    &mut m.rot_right[k],
                    &mut v.rot_right[k],
                    lrs.rotation,
                    bc1,
                    bc2,
                );
            }
        }
        if active[3] {
            adam_update(
                &mut p.opacity_logit,
                g.opacity_logit,
                &mut m.opacity_logit,
                &mut v.opacity_logit,
                lrs.opacity,
                bc1,
                bc2,
            );
        }
        if active[4] {
            for (k, coeff) in p.sh_coeffs.iter_mut().enumerate() {
                for c in 0..3 {
                    adam_update(
                        &mut coeff[c],
                        g.sh[k][c],
                        &mut m.sh[k][c],
                        &mut v.sh[k][c],
                        lrs.sh,
                        bc1,
                        bc2,
                    );
                }
            }
        }
        p.normalize_rotations();
    }
    Ok(())
}
