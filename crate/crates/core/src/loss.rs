//! Confidence-weighted image loss and the pluggable guidance seam.
//!
//! The total training signal on a rendered image is the gradient of
//! λ̃_rgb·⟨C_rgb, L1⟩ + λ̃_ssim·⟨C_ssim, 1 − SSIM⟩ plus an optional
//! guidance gradient injected directly in image space.

use crate::confidence::ConfidenceMaps;
use crate::error::{Error, Result};
use crate::frame::{Image, Map};
use crate::ssim;

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// λ̃_rgb, the fixed RGB weight.
    pub lambda_rgb_base: f64,
    /// λ̃_ssim, the fixed SSIM weight.
    pub lambda_ssim_base: f64,
    /// λ_SDS; 0 disables guidance.
    pub lambda_sds: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_rgb_base: 8000.0,
            lambda_ssim_base: 2000.0,
            lambda_sds: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_rgb_base < 0.0 || self.lambda_ssim_base < 0.0 || self.lambda_sds < 0.0 {
            return Err(Error::InvalidParameter(
                "loss weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Scalar terms of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// λ̃_rgb · mean(C_rgb ⊙ |render − target|).
    pub rgb_term: f64,
    /// λ̃_ssim · mean(C_ssim ⊙ (1 − ssim)).
    pub ssim_term: f64,
}

/// Confidence-weighted loss and its analytic gradient with respect to the
/// rendered image. The SSIM window shrinks to fit small images.
pub fn loss_img_conf(
    render: &Image,
    target: &Image,
    maps: &ConfidenceMaps,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Image)> {
    if !render.same_shape(target) {
        return Err(Error::ShapeMismatch(format!(
            "render {}x{} vs target {}x{}",
            render.width(),
            render.height(),
            target.width(),
            target.height()
        )));
    }
    let (w, h) = (render.width(), render.height());
    if maps.c_rgb.width() != w || maps.c_rgb.height() != h {
        return Err(Error::ShapeMismatch("confidence maps".into()));
    }
    weights.validate()?;

    let n_rgb = (w * h * 3) as f64;
    let n_pix = (w * h) as f64;

    // L1 term with per-pixel confidence broadcast over channels.
    let mut rgb_sum = 0.0;
    let mut grad = Image::new(w, h);
    {
        let gdata = grad.data_mut();
        for y in 0..h {
            for x in 0..w {
                let c = maps.c_rgb.get(x, y);
                let r = render.pixel(x, y);
                let t = target.pixel(x, y);
                let base = (y * w + x) * 3;
                for ch in 0..3 {
                    let d = r[ch] - t[ch];
                    rgb_sum += c * d.abs();
                    gdata[base + ch] =
                        weights.lambda_rgb_base * c * sign(d) / n_rgb;
                }
            }
        }
    }
    let rgb_term = weights.lambda_rgb_base * rgb_sum / n_rgb;

    // SSIM term: mean of C_ssim ⊙ (1 − ssim_map).
    let window = ssim::effective_window(h, w);
    let smap = ssim::ssim_map_windowed(render, target, window)?;
    let mut ssim_sum = 0.0;
    for (s, c) in smap.data().iter().zip(maps.c_ssim.data()) {
        ssim_sum += c * (1.0 - s);
    }
    let ssim_term = weights.lambda_ssim_base * ssim_sum / n_pix;

    if weights.lambda_ssim_base != 0.0 {
        // d/d render of λ̃_ssim/n · Σ C(1 − s): upstream on ssim is −λ̃_ssim·C/n.
        let upstream = Map::from_data(
            w,
            h,
            maps.c_ssim
                .data()
                .iter()
                .map(|c| -weights.lambda_ssim_base * c / n_pix)
                .collect(),
        )?;
        let ssim_grad = ssim::ssim_map_backward(render, target, window, &upstream)?;
        grad.add_assign(&ssim_grad)?;
    }

    Ok((
        LossBreakdown {
            total: rgb_term + ssim_term,
            rgb_term,
            ssim_term,
        },
        grad,
    ))
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Image-space gradient provider: the seam where a score-distillation signal
/// from a generative model would plug in. Implementations return a per-pixel
/// gradient of the same shape as the render, plus a scalar weight.
pub trait GuidanceProvider: Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether [`GuidanceProvider::gradient`] requires a conditioning image.
    fn requires_condition(&self) -> bool;
    fn gradient(&self, render: &Image, condition: Option<&Image>) -> Result<(Image, f64)>;
}

/// No guidance: zero gradient.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullGuidance;

impl GuidanceProvider for NullGuidance {
    fn name(&self) -> &'static str {
        "null"
    }

    fn requires_condition(&self) -> bool {
        false
    }

    fn gradient(&self, render: &Image, _condition: Option<&Image>) -> Result<(Image, f64)> {
        Ok((Image::new(render.width(), render.height()), 1.0))
    }
}

/// Plumbing-test provider: gradient of ½‖render − condition‖², i.e. a pull
/// toward the conditioning image.
#[derive(Debug, Default, Clone, Copy)]
pub struct DebugPullGuidance;

impl GuidanceProvider for DebugPullGuidance {
    fn name(&self) -> &'static str {
        "debug-pull"
    }

    fn requires_condition(&self) -> bool {
        true
    }

    fn gradient(&self, render: &Image, condition: Option<&Image>) -> Result<(Image, f64)> {
        let cond = condition.ok_or_else(|| {
            Error::InvalidParameter("debug-pull guidance requires a condition image".into())
        })?;
        if !render.same_shape(cond) {
            return Err(Error::ShapeMismatch("guidance condition".into()));
        }
        let data = render
            .data()
            .iter()
            .zip(cond.data())
            .map(|(r, c)| r - c)
            .collect();
        Ok((Image::from_data(render.width(), render.height(), data)?, 1.0))
    }
}

/// λ_SDS-scaled guidance gradient for a rendered image.
pub fn apply_guidance(
    provider: &dyn GuidanceProvider,
    render: &Image,
    condition: Option<&Image>,
    lambda_sds: f64,
) -> Result<Image> {
    if provider.requires_condition() && condition.is_none() {
        return Err(Error::InvalidParameter(format!(
            "guidance provider '{}' requires a condition image",
            provider.name()
        )));
    }
    let (mut grad, weight) = provider.gradient(render, condition)?;
    let scale = lambda_sds * weight;
    for v in grad.data_mut() {
        *v *= scale;
    }
    Ok(grad)
}
