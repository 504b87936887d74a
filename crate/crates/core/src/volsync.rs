//! Time-synchronous spatial-volume smoothing, the two-frame fusion operator,
//! the frame-count weight schedule, and recursive midpoint frame
//! interpolation. This is the seam where a multi-view generator's denoising
//! loop would plug in; volumes here are plain numeric tensors.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::confidence::interp_midpoint;
use crate::error::{Error, Result};
use crate::frame::Image;

pub const VOLUME_MAGIC: u32 = u32::from_le_bytes(*b"4VOL");
pub const VOLUME_VERSION: u32 = 1;

/// An F×V×V×V feature tensor attached to one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub channels: usize,
    pub resolution: usize,
    pub frame_index: u32,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(channels: usize, resolution: usize, frame_index: u32) -> Self {
        Self {
            channels,
            resolution,
            frame_index,
            data: vec![0.0; channels * resolution * resolution * resolution],
        }
    }

    pub fn from_data(
        channels: usize,
        resolution: usize,
        frame_index: u32,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != channels * resolution.pow(3) {
            return Err(Error::ShapeMismatch(format!(
                "volume data length {} does not match {}x{}^3",
                data.len(),
                channels,
                resolution
            )));
        }
        Ok(Self {
            channels,
            resolution,
            frame_index,
            data,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &FeatureVolume) -> bool {
        self.channels == other.channels && self.resolution == other.resolution
    }
}

/// Symmetric smoothing taps (w_{−k}..w_k), normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingWeights {
    taps: Vec<f64>,
}

impl SmoothingWeights {
    /// Normalizes the taps; they must be nonnegative, odd in count, and not
    /// all zero.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.len() % 2 == 0 {
            return Err(Error::InvalidParameter(
                "smoothing weights need an odd tap count".into(),
            ));
        }
        if taps.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter(
                "smoothing weights must be nonnegative".into(),
            ));
        }
        let sum: f64 = taps.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("smoothing weights sum to 0".into()));
        }
        Ok(Self {
            taps: taps.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn middle(&self) -> f64 {
        self.taps[self.taps.len() / 2]
    }
}

/// The frame-count-dependent smoothing schedule, normalized to sum 1. Fewer
/// than 3 frames get the identity weight (the two-frame case is covered by
/// [`fuse_pair`]).
pub fn weight_schedule(n_frames: usize) -> Result<SmoothingWeights> {
    if n_frames < 1 {
        return Err(Error::InvalidParameter("n_frames must be >= 1".into()));
    }
    let raw: Vec<f64> = match n_frames {
        1..=2 => vec![1.0],
        3..=4 => vec![1.5, 7.0, 1.5],
        5..=6 => vec![1.0, 1.0, 6.0, 1.0, 1.0],
        7..=12 => vec![1.0, 1.0, 1.0, 6.0, 1.0, 1.0, 1.0],
        _ => vec![
            1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 14.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0,
        ],
    };
    SmoothingWeights::new(raw)
}

/// Ṽ_i = Σ_j w_j V_{i+j}: convex combination over the tap window. Taps whose
/// frame index falls outside the sequence are dropped and the surviving taps
/// renormalized, so edge outputs remain convex combinations.
pub fn smooth_volumes(
    vols: &[FeatureVolume],
    weights: &SmoothingWeights,
) -> Result<Vec<FeatureVolume>> {
    if vols.is_empty() {
        return Err(Error::InvalidParameter("no volumes to smooth".into()));
    }
    for v in vols {
        if !v.same_shape(&vols[0]) {
            return Err(Error::ShapeMismatch("volumes differ in shape".into()));
        }
    }
    let m = vols.len() as isize;
    let k = weights.half_width() as isize;
    let mut out = Vec::with_capacity(vols.len());
    for i in 0..m {
        let mut taps: Vec<(usize, f64)> = Vec::with_capacity(weights.taps().len());
        let mut mass = 0.0;
        for (j, w) in weights.taps().iter().enumerate() {
            let idx = i + j as isize - k;
            if idx >= 0 && idx < m && *w > 0.0 {
                taps.push((idx as usize, *w));
                mass += *w;
            }
        }
        let mut acc = FeatureVolume::zeros(
            vols[0].channels,
            vols[0].resolution,
            vols[i as usize].frame_index,
        );
        for (idx, w) in taps {
            let scale = w / mass;
            for (o, v) in acc.data.iter_mut().zip(&vols[idx].data) {
                *o += scale * v;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Two-frame fusion: Ṽ_i = (1−w)·V_i + w·V_{3−i}. The fusion ratio trades
/// temporal consistency against motion independence; w must be in [0, 0.5].
pub fn fuse_pair(
    v1: &FeatureVolume,
    v2: &FeatureVolume,
    w: f64,
) -> Result<(FeatureVolume, FeatureVolume)> {
    if !v1.same_shape(v2) {
        return Err(Error::ShapeMismatch("fuse_pair volumes".into()));
    }
    if !(0.0..=0.5).contains(&w) {
        return Err(Error::InvalidParameter(format!(
            "fusion ratio {w} outside [0, 0.5]"
        )));
    }
    let blend = |a: &FeatureVolume, b: &FeatureVolume| {
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect();
        FeatureVolume {
            channels: a.channels,
            resolution: a.resolution,
            frame_index: a.frame_index,
            data,
        }
    };
    Ok((blend(v1, v2), blend(v2, v1)))
}

/// Two recursive midpoint passes over a column of K frames, yielding exactly
/// 4K−3 frames with the originals bit-preserved at stride-4 positions.
pub fn interpolate_column(frames: &[Image]) -> Result<Vec<Image>> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter("empty frame column".into()));
    }
    let pass = |input: &[Image]| -> Result<Vec<Image>> {
        let mut out = Vec::with_capacity(input.len() * 2 - 1);
        out.push(input[0].clone());
        for pair in input.windows(2) {
            out.push(interp_midpoint(&pair[0], &pair[1])?);
            out.push(pair[1].clone());
        }
        Ok(out)
    };
    if frames.len() == 1 {
        return Ok(vec![frames[0].clone()]);
    }
    pass(&pass(frames)?)
}

/// Write a volume: 8 little-endian u32 header words
/// (magic, version, F, V, V, V, frame_index, reserved), then F·V³ f32 values.
pub fn save_volume(vol: &FeatureVolume, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + vol.data.len() * 4);
    for word in [
        VOLUME_MAGIC,
        VOLUME_VERSION,
        vol.channels as u32,
        vol.resolution as u32,
        vol.resolution as u32,
        vol.resolution as u32,
        vol.frame_index,
        0,
    ] {
        buf.extend_from_slice(&word.to_le_bytes());
    }
    for v in &vol.data {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_volume(path: &Path) -> Result<FeatureVolume> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(Error::Truncated(format!("{}: header", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap());
    if word(0) != VOLUME_MAGIC {
        return Err(Error::DataFormat(format!(
            "{}: bad volume magic",
            path.display()
        )));
    }
    if word(1) != VOLUME_VERSION {
        return Err(Error::VersionMismatch {
            expected: VOLUME_VERSION,
            found: word(1),
        });
    }
    let channels = word(2) as usize;
    let (v1, v2, v3) = (word(3) as usize, word(4) as usize, word(5) as usize);
    if v1 != v2 || v2 != v3 {
        return Err(Error::DataFormat(format!(
            "{}: non-cubic volume {v1}x{v2}x{v3}",
            path.display()
        )));
    }
    let frame_index = word(6);
    let count = channels * v1 * v2 * v3;
    let expected = 32 + count * 4;
    if bytes.len() != expected {
        return Err(Error::Truncated(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[32..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureVolume::from_data(channels, v1, frame_index, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_volume(f: usize, v: usize, idx: u32, seed: u64) -> FeatureVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..f * v * v * v).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureVolume::from_data(f, v, idx, data).unwrap()
    }

    #[test]
    fn schedule_reproduces_the_table() {
        let w = weight_schedule(4).unwrap();
        assert_eq!(w.taps(), &[0.15, 0.7, 0.15]);
        let w = weight_schedule(6).unwrap();
        assert_eq!(w.taps(), &[0.1, 0.1, 0.6, 0.1, 0.1]);
        let w = weight_schedule(8).unwrap();
        let expected = [1.0, 1.0, 1.0, 6.0, 1.0, 1.0, 1.0].map(|x: f64| x / 12.0);
        for (a, b) in w.taps().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let w = weight_schedule(20).unwrap();
        assert_eq!(w.taps().len(), 13);
        assert_abs_diff_eq!(w.taps().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.middle(), 0.5, epsilon = 1e-15);
        // Identity below the table's range; error below 1.
        assert_eq!(weight_schedule(2).unwrap().taps(), &[1.0]);
        assert!(weight_schedule(0).is_err());
    }

    #[test]
    fn schedule_middle_weight_is_at_least_half() {
        for n in 3..40 {
            let w = weight_schedule(n).unwrap();
            assert!(w.middle() >= 0.5, "n={n}: middle {}", w.middle());
            assert_abs_diff_eq!(w.taps().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_weights_are_a_no_op() {
        let vols: Vec<FeatureVolume> = (0..4).map(|i| random_volume(2, 3, i, i as u64)).collect();
        let w = SmoothingWeights::new(vec![1.0]).unwrap();
        let out = smooth_volumes(&vols, &w).unwrap();
        assert_eq!(out, vols);
    }

    #[test]
    fn identical_volumes_are_a_fixed_point() {
        let v = random_volume(2, 3, 0, 7);
        let vols = vec![v.clone(), v.clone(), v.clone(), v.clone()];
        let w = weight_schedule(4).unwrap();
        let out = smooth_volumes(&vols, &w).unwrap();
        for o in &out {
            for (a, b) in o.data().iter().zip(v.data()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn middle_output_matches_direct_weighted_sum() {
        let vols: Vec<FeatureVolume> =
            (0..3).map(|i| random_volume(2, 4, i, 100 + i as u64)).collect();
        let w = weight_schedule(3).unwrap();
        let out = smooth_volumes(&vols, &w).unwrap();
        for (j, _) in vols[0].data().iter().enumerate() {
            let expected =
                0.15 * vols[0].data()[j] + 0.7 * vols[1].data()[j] + 0.15 * vols[2].data()[j];
            assert_abs_diff_eq!(out[1].data()[j], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_is_linear() {
        let xs: Vec<FeatureVolume> = (0..5).map(|i| random_volume(1, 4, i, i as u64)).collect();
        let ys: Vec<FeatureVolume> =
            (0..5).map(|i| random_volume(1, 4, i, 50 + i as u64)).collect();
        let (a, b) = (0.7, -1.3);
        let combo: Vec<FeatureVolume> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let data = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(xv, yv)| a * xv + b * yv)
                    .collect();
                FeatureVolume::from_data(1, 4, x.frame_index, data).unwrap()
            })
            .collect();
        let w = weight_schedule(5).unwrap();
        let s_combo = smooth_volumes(&combo, &w).unwrap();
        let s_x = smooth_volumes(&xs, &w).unwrap();
        let s_y = smooth_volumes(&ys, &w).unwrap();
        for i in 0..5 {
            for (j, v) in s_combo[i].data().iter().enumerate() {
                let expected = a * s_x[i].data()[j] + b * s_y[i].data()[j];
                assert!((v - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fusion_endpoints_and_quarter() {
        let v1 = random_volume(2, 3, 1, 1);
        let v2 = random_volume(2, 3, 2, 2);
        let (a, b) = fuse_pair(&v1, &v2, 0.0).unwrap();
        assert_eq!(a, v1);
        assert_eq!(b.data(), v2.data());
        let (a, b) = fuse_pair(&v1, &v2, 0.5).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let (a, _) = fuse_pair(&v1, &v2, 0.25).unwrap();
        for (i, v) in a.data().iter().enumerate() {
            assert_abs_diff_eq!(
                v,
                &(0.75 * v1.data()[i] + 0.25 * v2.data()[i]),
                epsilon = 1e-12
            );
        }
        assert!(fuse_pair(&v1, &v2, 0.6).is_err());
        assert!(fuse_pair(&v1, &v2, -0.1).is_err());
    }

    #[test]
    fn fusion_commutes_with_swapping() {
        let v1 = random_volume(1, 3, 1, 3);
        let v2 = random_volume(1, 3, 2, 4);
        let (a, b) = fuse_pair(&v1, &v2, 0.3).unwrap();
        let (b2, a2) = fuse_pair(&v2, &v1, 0.3).unwrap();
        assert_eq!(a.data(), a2.data());
        assert_eq!(b.data(), b2.data());
    }

    #[test]
    fn interpolation_count_and_stride() {
        for k in 1..=32usize {
            let frames: Vec<Image> = (0..k)
                .map(|i| Image::constant(4, 4, [i as f64 / k as f64; 3]))
                .collect();
            let out = interpolate_column(&frames).unwrap();
            assert_eq!(out.len(), 4 * k - 3);
            for (i, f) in frames.iter().enumerate() {
                assert_eq!(&out[4 * i], f, "original {i} not bit-preserved");
            }
        }
        assert!(interpolate_column(&[]).is_err());
    }

    #[test]
    fn two_frame_interpolation_yields_quarters() {
        let a = Image::constant(4, 4, [0.0; 3]);
        let b = Image::constant(4, 4, [1.0; 3]);
        let out = interpolate_column(&[a, b]).unwrap();
        assert_eq!(out.len(), 5);
        for (i, expected) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            assert_abs_diff_eq!(out[i].pixel(0, 0)[0], *expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn volume_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.bin");
        // f32-representable values round-trip exactly.
        let mut vol = random_volume(2, 4, 9, 5);
        for v in vol.data_mut() {
            *v = *v as f32 as f64;
        }
        save_volume(&vol, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back, vol);

        // Truncation and bad magic are distinct errors.
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_volume(&path), Err(Error::Truncated(_))));
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_volume(&path), Err(Error::DataFormat(_))));
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        fs::write(&path, &wrong_version).unwrap();
        assert!(matches!(
            load_volume(&path),
            Err(Error::VersionMismatch { .. })
        ));
    }
}
