//! Per-pixel confidence from temporal self-consistency: a frame is compared
//! against midpoint interpolations of its adjacent four frames, giving an
//! RGB-difference map and an SSIM map that down-weight inconsistent regions
//! in the reconstruction loss. Also provides PSNR for evaluation.

use crate::error::{Error, Result};
use crate::frame::{Image, Map};
use crate::ssim;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Per-frame, per-pixel confidence weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMaps {
    /// 1 − mean-channel absolute difference against interpolated estimates, in [0, 1].
    pub c_rgb: Map,
    /// Mean SSIM against the estimates; SSIM range, practically [0, 1].
    pub c_ssim: Map,
}

impl ConfidenceMaps {
    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            c_rgb: Map::constant(width, height, 1.0),
            c_ssim: Map::constant(width, height, 1.0),
        }
    }
}

/// Deterministic stand-in for a learned frame interpolator: the per-pixel
/// midpoint (a + b)/2. Exact on linear-in-time sequences.
pub fn interp_midpoint(a: &Image, b: &Image) -> Result<Image> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "interp inputs {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    Image::from_data(a.width(), a.height(), data)
}

/// The injectable frame-interpolation seam used by the confidence estimates.
pub trait FrameInterpolator: Send + Sync {
    fn name(&self) -> &'static str;
    fn interpolate(&self, a: &Image, b: &Image) -> Result<Image>;
}

/// Plain per-pixel midpoint blending.
#[derive(Debug, Default, Clone, Copy)]
pub struct MidpointInterpolator;

impl FrameInterpolator for MidpointInterpolator {
    fn name(&self) -> &'static str {
        "midpoint"
    }

    fn interpolate(&self, a: &Image, b: &Image) -> Result<Image> {
        interp_midpoint(a, b)
    }
}

/// Motion-compensated midpoint: per-block integer translations between the
/// two frames from an exhaustive search (ties resolved toward zero motion),
/// then the blend samples each frame half a step along the flow. Reduces
/// exactly to the plain midpoint on static or ambiguous content, which keeps
/// ghosting out of the confidence estimates for small motions.
#[derive(Debug, Clone, Copy)]
pub struct FlowMidpointInterpolator {
    pub block: usize,
    pub radius: isize,
}

impl Default for FlowMidpointInterpolator {
    fn default() -> Self {
        Self { block: 8, radius: 3 }
    }
}

impl FrameInterpolator for FlowMidpointInterpolator {
    fn name(&self) -> &'static str {
        "flow-midpoint"
    }

    fn interpolate(&self, a: &Image, b: &Image) -> Result<Image> {
        if !a.same_shape(b) {
            return Err(Error::ShapeMismatch("interp inputs differ in shape".into()));
        }
        let (w, h) = (a.width(), a.height());
        if self.block == 0 || w < self.block || h < self.block {
            return interp_midpoint(a, b);
        }
        let luma = |img: &Image| -> Vec<f64> {
            img.data()
                .chunks_exact(3)
                .map(|p| (p[0] + p[1] + p[2]) / 3.0)
                .collect()
        };
        let la = luma(a);
        let lb = luma(b);

        // Offsets in order of increasing |d|²; strict improvement required,
        // so ambiguous blocks keep zero flow.
        let mut offsets: Vec<(isize, isize)> = Vec::new();
        for dy in -self.radius..=self.radius {
            for dx in -self.radius..=self.radius {
                offsets.push((dx, dy));
            }
        }
        offsets.sort_by_key(|(dx, dy)| (dx * dx + dy * dy, *dy, *dx));

        let bw = w.div_ceil(self.block);
        let bh = h.div_ceil(self.block);
        let mut flow = vec![(0isize, 0isize); bw * bh];
        for by in 0..bh {
            for bx in 0..bw {
                let x0 = bx * self.block;
                let y0 = by * self.block;
                let x1 = (x0 + self.block).min(w);
                let y1 = (y0 + self.block).min(h);
                let mut best = (0isize, 0isize);
                let mut best_ssd = f64::INFINITY;
                for &(dx, dy) in &offsets {
                    let mut ssd = 0.0;
                    let mut count = 0usize;
                    for y in y0..y1 {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for x in x0..x1 {
                            let sx = x as isize + dx;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let d = la[y * w + x] - lb[sy as usize * w + sx as usize];
                            ssd += d * d;
                            count += 1;
                        }
                    }
                    let area = (x1 - x0) * (y1 - y0);
                    if count * 2 < area {
                        continue;
                    }
                    let score = ssd / count as f64;
                    if score < best_ssd - 1e-12 {
                        best_ssd = score;
                        best = (dx, dy);
                    }
                }
                flow[by * bw + bx] = best;
            }
        }

        let mut out = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = flow[(y / self.block) * bw + x / self.block];
                let (hx, hy) = (dx as f64 / 2.0, dy as f64 / 2.0);
                let pa = sample_bilinear(a, x as f64 - hx, y as f64 - hy);
                let pb = sample_bilinear(b, x as f64 + hx, y as f64 + hy);
                out.set_pixel(
                    x,
                    y,
                    [
                        0.5 * (pa[0] + pb[0]),
                        0.5 * (pa[1] + pb[1]),
                        0.5 * (pa[2] + pb[2]),
                    ],
                );
            }
        }
        Ok(out)
    }
}

fn sample_bilinear(img: &Image, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p00 = img.pixel(x0, y0);
    let p10 = img.pixel(x1, y0);
    let p01 = img.pixel(x0, y1);
    let p11 = img.pixel(x1, y1);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bot = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Confidence maps for frame `index` (0-based) of one temporal column, with
/// midpoint-blend estimates.
///
/// Estimates: Î₁ from the ±1 neighbors, Î₂ from the ±2 neighbors. Boundary
/// frames use whichever estimates exist; with none the confidence is 1.
/// c_rgb = 1 − mean over estimates of the channel-mean absolute difference;
/// c_ssim = mean over estimates of the SSIM map.
pub fn confidence_for_frame(column: &[Image], index: usize) -> Result<ConfidenceMaps> {
    confidence_for_frame_with(&MidpointInterpolator, column, index)
}

/// [`confidence_for_frame`] with an explicit interpolator.
pub fn confidence_for_frame_with(
    interp: &dyn FrameInterpolator,
    column: &[Image],
    index: usize,
) -> Result<ConfidenceMaps> {
    if column.is_empty() {
        return Err(Error::InvalidParameter("empty frame column".into()));
    }
    if index >= column.len() {
        return Err(Error::InvalidParameter(format!(
            "frame index {index} out of range for column of {}",
            column.len()
        )));
    }
    let m = column.len();
    let frame = column[index].clamped01();
    for other in column {
        if !other.same_shape(&frame) {
            return Err(Error::ShapeMismatch("column images differ in shape".into()));
        }
    }
    let (w, h) = (frame.width(), frame.height());

    let mut estimates: Vec<Image> = Vec::new();
    for span in [1usize, 2] {
        if index >= span && index + span < m {
            let prev = column[index - span].clamped01();
            let next = column[index + span].clamped01();
            estimates.push(interp.interpolate(&prev, &next)?);
        }
    }
    if estimates.is_empty() {
        return Ok(ConfidenceMaps::ones(w, h));
    }

    let window = ssim::effective_window(h, w);
    let mut c_rgb = Map::new(w, h);
    let mut c_ssim = Map::new(w, h);
    for est in &estimates {
        for y in 0..h {
            for x in 0..w {
                let a = frame.pixel(x, y);
                let b = est.pixel(x, y);
                let d =
                    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0;
                c_rgb.set(x, y, c_rgb.get(x, y) + d);
            }
        }
        let s = ssim::ssim_map_windowed(&frame, est, window)?;
        for (acc, v) in c_ssim.data_mut().iter_mut().zip(s.data()) {
            *acc += v;
        }
    }
    let k = estimates.len() as f64;
    for v in c_rgb.data_mut() {
        *v = 1.0 - *v / k;
    }
    for v in c_ssim.data_mut() {
        *v /= k;
    }
    Ok(ConfidenceMaps { c_rgb, c_ssim })
}

/// Confidence maps for every frame of a column.
pub fn confidence_for_column(column: &[Image]) -> Result<Vec<ConfidenceMaps>> {
    (0..column.len())
        .map(|i| confidence_for_frame(column, i))
        .collect()
}

/// Peak signal-to-noise ratio in dB for unit dynamic range, capped at
/// [`PSNR_CAP_DB`] for (near-)identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let mse = a.mse(b)?;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}
