//! Windowed SSIM with an 11×11 Gaussian window (σ = 1.5), constants
//! C1 = 0.01², C2 = 0.03² for unit dynamic range, symmetric border padding.
//! Includes the exact adjoint (reverse accumulation through the windowed
//! statistics) needed by the confidence-weighted loss.

use crate::error::{Error, Result};
use crate::frame::{Image, Map};

pub const DEFAULT_WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Symmetric (mirror) padding index: ... b a | a b c | c b ...
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - 1 - i
    } else {
        i
    };
    j as usize
}

/// Largest odd window that fits both image dimensions, at most the default.
pub fn effective_window(height: usize, width: usize) -> usize {
    let mut w = DEFAULT_WINDOW.min(height).min(width);
    if w % 2 == 0 {
        w -= 1;
    }
    w.max(1)
}

struct WindowStats {
    mu_a: f64,
    mu_b: f64,
    s_aa: f64,
    s_bb: f64,
    s_ab: f64,
}

fn window_stats(
    a: &[f64],
    b: &[f64],
    h: usize,
    w: usize,
    x: usize,
    y: usize,
    kernel: &[f64],
) -> WindowStats {
    let half = (kernel.len() / 2) as isize;
    let mut st = WindowStats {
        mu_a: 0.0,
        mu_b: 0.0,
        s_aa: 0.0,
        s_bb: 0.0,
        s_ab: 0.0,
    };
    for (ky, kwy) in kernel.iter().enumerate() {
        let sy = mirror(y as isize + ky as isize - half, h);
        let row = sy * w;
        for (kx, kwx) in kernel.iter().enumerate() {
            let sx = mirror(x as isize + kx as isize - half, w);
            let kw = kwy * kwx;
            let av = a[row + sx];
            let bv = b[row + sx];
            st.mu_a += kw * av;
            st.mu_b += kw * bv;
            st.s_aa += kw * av * av;
            st.s_bb += kw * bv * bv;
            st.s_ab += kw * av * bv;
        }
    }
    st
}

#[inline]
fn ssim_from_stats(st: &WindowStats) -> f64 {
    let var_a = st.s_aa - st.mu_a * st.mu_a;
    let var_b = st.s_bb - st.mu_b * st.mu_b;
    let cov = st.s_ab - st.mu_a * st.mu_b;
    let a1 = 2.0 * st.mu_a * st.mu_b + C1;
    let a2 = 2.0 * cov + C2;
    let b1 = st.mu_a * st.mu_a + st.mu_b * st.mu_b + C1;
    let b2 = var_a + var_b + C2;
    (a1 * a2) / (b1 * b2)
}

/// SSIM map of one channel plane.
fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, window: usize) -> Vec<f64> {
    let kernel = gaussian_kernel(window, WINDOW_SIGMA);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let st = window_stats(a, b, h, w, x, y, &kernel);
            out[y * w + x] = ssim_from_stats(&st);
        }
    }
    out
}

/// Adjoint of `ssim_plane` with respect to `a`: scatter `upstream` (∂L/∂ssim
/// per output pixel) back through the windowed statistics.
fn ssim_plane_backward(
    a: &[f64],
    b: &[f64],
    h: usize,
    w: usize,
    window: usize,
    upstream: &[f64],
) -> Vec<f64> {
    let kernel = gaussian_kernel(window, WINDOW_SIGMA);
    let half = (kernel.len() / 2) as isize;
    let mut grad = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let u = upstream[y * w + x];
            if u == 0.0 {
                continue;
            }
            let st = window_stats(a, b, h, w, x, y, &kernel);
            let var_a = st.s_aa - st.mu_a * st.mu_a;
            let var_b = st.s_bb - st.mu_b * st.mu_b;
            let cov = st.s_ab - st.mu_a * st.mu_b;
            let a1 = 2.0 * st.mu_a * st.mu_b + C1;
            let a2 = 2.0 * cov + C2;
            let b1 = st.mu_a * st.mu_a + st.mu_b * st.mu_b + C1;
            let b2 = var_a + var_b + C2;
            let s = (a1 * a2) / (b1 * b2);

            let d_a1 = u * a2 / (b1 * b2);
            let d_a2 = u * a1 / (b1 * b2);
            let d_b1 = -u * s / b1;
            let d_b2 = -u * s / b2;

            // a1 = 2 μa μb + C1; a2 = 2(Sab − μa μb) + C2;
            // b1 = μa² + μb² + C1; b2 = (Saa − μa²) + (Sbb − μb²) + C2.
            let d_mu_a = 2.0 * st.mu_b * d_a1 - 2.0 * st.mu_b * d_a2 + 2.0 * st.mu_a * d_b1
                - 2.0 * st.mu_a * d_b2;
            let d_s_aa = d_b2;
            let d_s_ab = 2.0 * d_a2;

            for (ky, kwy) in kernel.iter().enumerate() {
                let sy = mirror(y as isize + ky as isize - half, h);
                let row = sy * w;
                for (kx, kwx) in kernel.iter().enumerate() {
                    let sx = mirror(x as isize + kx as isize - half, w);
                    let kw = kwy * kwx;
                    let idx = row + sx;
                    grad[idx] += kw * (d_mu_a + 2.0 * a[idx] * d_s_aa + b[idx] * d_s_ab);
                }
            }
        }
    }
    grad
}

fn check_shapes(a: &Image, b: &Image, window: usize) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "ssim inputs {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "ssim window must be odd and positive, got {window}"
        )));
    }
    if a.width() < window || a.height() < window {
        return Err(Error::InvalidParameter(format!(
            "image {}x{} smaller than ssim window {window}",
            a.width(),
            a.height()
        )));
    }
    Ok(())
}

/// Per-pixel SSIM with the default 11×11 window, channels averaged.
/// Images smaller than the window are rejected.
pub fn ssim_map(a: &Image, b: &Image) -> Result<Map> {
    ssim_map_windowed(a, b, DEFAULT_WINDOW)
}

/// Per-pixel SSIM with an explicit odd window size.
pub fn ssim_map_windowed(a: &Image, b: &Image, window: usize) -> Result<Map> {
    check_shapes(a, b, window)?;
    let (w, h) = (a.width(), a.height());
    let mut acc = vec![0.0; w * h];
    for c in 0..3 {
        let pa = a.channel(c);
        let pb = b.channel(c);
        let m = ssim_plane(&pa, &pb, h, w, window);
        for (v, s) in acc.iter_mut().zip(&m) {
            *v += s / 3.0;
        }
    }
    Map::from_data(w, h, acc)
}

/// Gradient of Σ_p upstream(p)·ssim(p) with respect to `a` (3-channel,
/// each channel receiving its share of the channel average).
pub fn ssim_map_backward(a: &Image, b: &Image, window: usize, upstream: &Map) -> Result<Image> {
    check_shapes(a, b, window)?;
    if upstream.width() != a.width() || upstream.height() != a.height() {
        return Err(Error::ShapeMismatch("ssim upstream map".into()));
    }
    let (w, h) = (a.width(), a.height());
    let scaled: Vec<f64> = upstream.data().iter().map(|v| v / 3.0).collect();
    let mut out = Image::new(w, h);
    for c in 0..3 {
        let pa = a.channel(c);
        let pb = b.channel(c);
        let g = ssim_plane_backward(&pa, &pb, h, w, window, &scaled);
        let data = out.data_mut();
        for (i, v) in g.iter().enumerate() {
            data[i * 3 + c] = *v;
        }
    }
    Ok(out)
}

/// Mean SSIM over the map (evaluation convenience; window shrinks to fit
/// small images).
pub fn mean_ssim(a: &Image, b: &Image) -> Result<f64> {
    let window = effective_window(a.height(), a.width());
    Ok(ssim_map_windowed(a, b, window)?.mean())
}
