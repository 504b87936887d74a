//! Image-matrix datasets (the M×N grid of multi-view, multi-timestamp
//! frames), orbit camera rigs, the synthetic ground-truth scene generator,
//! and persistence for datasets, scenes, and confidence maps.
//!
//! Dataset directory layout:
//! ```text
//! manifest.json                      version, grid shape, timestamps, cameras
//! frames/view_{nn}_time_{mmm}.png    8-bit RGB, values treated as linear
//! conf/meta.json                     confidence sidecar (optional)
//! conf/view_{nn}_time_{mmm}.bin      c_rgb then c_ssim, f32 LE, small header
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::confidence::ConfidenceMaps;
use crate::error::{Error, Result};
use crate::frame::{Image, Map};
use crate::gaussian::{logit, normalize_quat, Gaussian4D};
use crate::render::{render, RenderSettings};
use crate::sh;

pub const DATASET_VERSION: u32 = 1;
pub const SCENE_MAGIC: u32 = u32::from_le_bytes(*b"GS4D");
pub const SCENE_VERSION: u32 = 1;
pub const CONF_MAGIC: u32 = u32::from_le_bytes(*b"CMAP");
pub const CONF_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Synthetic,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub name: String,
    pub source: SourceTag,
}

/// The M×N image matrix: rows are timestamps, columns are views. Column 0 is
/// the input-video column used for guidance conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    /// Indexed `[time][view]`.
    pub images: Vec<Vec<Image>>,
    /// M strictly increasing values in [0, 1].
    pub timestamps: Vec<f64>,
    /// One camera per view column.
    pub cameras: Vec<Camera>,
    pub meta: DatasetMeta,
}

impl ImageMatrix {
    pub fn n_times(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_views(&self) -> usize {
        self.cameras.len()
    }

    pub fn width(&self) -> usize {
        self.images
            .first()
            .and_then(|row| row.first())
            .map_or(0, Image::width)
    }

    pub fn height(&self) -> usize {
        self.images
            .first()
            .and_then(|row| row.first())
            .map_or(0, Image::height)
    }

    /// One temporal column: every frame of view `n`, in time order.
    pub fn column(&self, n: usize) -> Vec<Image> {
        self.images.iter().map(|row| row[n].clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.timestamps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} image rows vs {} timestamps",
                self.images.len(),
                self.timestamps.len()
            )));
        }
        for (i, row) in self.images.iter().enumerate() {
            if row.len() != self.cameras.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} images for {} cameras",
                    row.len(),
                    self.cameras.len()
                )));
            }
        }
        let (w, h) = (self.width(), self.height());
        for row in &self.images {
            for img in row {
                if img.width() != w || img.height() != h {
                    return Err(Error::ShapeMismatch("images differ in shape".into()));
                }
            }
        }
        for (i, pair) in self.timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::NonMonotoneTimestamps(i + 1));
            }
        }
        for t in &self.timestamps {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::TimeOutOfRange(*t));
            }
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        Ok(())
    }
}

/// Circular camera rig at fixed elevation, all cameras looking at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitRig {
    pub n_views: usize,
    pub elevation_deg: f64,
    pub radius: f64,
    pub fov_y_deg: f64,
    /// Added to every azimuth; lets a rig sit between another rig's views.
    pub azimuth_offset_deg: f64,
}

impl Default for OrbitRig {
    fn default() -> Self {
        Self {
            n_views: 16,
            elevation_deg: 30.0,
            radius: 1.5,
            fov_y_deg: 50.0,
            azimuth_offset_deg: 0.0,
        }
    }
}

/// Cameras evenly spaced in azimuth at the rig's elevation, world +z up.
pub fn build_orbit_rig(rig: &OrbitRig, width: u32, height: u32) -> Result<Vec<Camera>> {
    if rig.n_views == 0 {
        return Err(Error::InvalidParameter("rig needs at least one view".into()));
    }
    if !(rig.radius > 0.0) || !(rig.fov_y_deg > 0.0 && rig.fov_y_deg < 180.0) {
        return Err(Error::InvalidParameter("invalid rig geometry".into()));
    }
    let fy = height as f64 / 2.0 / (rig.fov_y_deg.to_radians() / 2.0).tan();
    let fx = fy;
    let cx = width as f64 / 2.0;
    let cy = height as f64 / 2.0;
    let elev = rig.elevation_deg.to_radians();
    Ok((0..rig.n_views)
        .map(|k| {
            let az = rig.azimuth_offset_deg.to_radians()
                + 2.0 * std::f64::consts::PI * k as f64 / rig.n_views as f64;
            let eye = nalgebra::Vector3::new(
                rig.radius * elev.cos() * az.cos(),
                rig.radius * elev.cos() * az.sin(),
                rig.radius * elev.sin(),
            );
            Camera::look_at(
                eye,
                nalgebra::Vector3::zeros(),
                nalgebra::Vector3::z(),
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            )
        })
        .collect())
}

/// Seeded random ground-truth scene inside the 0.5-radius ball. Spacetime
/// correlation comes from small random isoclinic pairs whose angle scales
/// with `motion_amplitude`, giving each Gaussian a roughly linear drift.
/// Amplitude 0 yields a fully static scene: zero drift, and the temporal
/// sigma is widened so the marginal stays flat across the whole clip.
pub fn synth_scene(n: usize, seed: u64, motion_amplitude: f64) -> Vec<Gaussian4D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let pos = loop {
                let p: [f64; 3] = [
                    rng.gen_range(-0.5..=0.5),
                    rng.gen_range(-0.5..=0.5),
                    rng.gen_range(-0.5..=0.5),
                ];
                if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= 0.5 {
                    break p;
                }
            };
            let small_rotation = |rng: &mut ChaCha8Rng| {
                normalize_quat([
                    1.0,
                    motion_amplitude * rng.gen_range(-1.0..1.0),
                    motion_amplitude * rng.gen_range(-1.0..1.0),
                    motion_amplitude * rng.gen_range(-1.0..1.0),
                ])
            };
            let color = [
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
            ];
            let temporal_sigma = rng.gen_range(0.2f64..0.6);
            Gaussian4D {
                mu: [pos[0], pos[1], pos[2], rng.gen_range(0.0..=1.0)],
                log_scale: [
                    rng.gen_range(0.01f64..0.05).ln(),
                    rng.gen_range(0.01f64..0.05).ln(),
                    rng.gen_range(0.01f64..0.05).ln(),
                    if motion_amplitude == 0.0 {
                        1e3f64.ln()
                    } else {
                        temporal_sigma.ln()
                    },
                ],
                rot_left: small_rotation(&mut rng),
                rot_right: small_rotation(&mut rng),
                opacity_logit: logit(rng.gen_range(0.5..1.0)),
                sh_coeffs: vec![[
                    (color[0] - 0.5) / sh::SH_C0,
                    (color[1] - 0.5) / sh::SH_C0,
                    (color[2] - 0.5) / sh::SH_C0,
                ]],
            }
        })
        .collect()
}

/// Render every (view, time) cell of the grid on the settings' background.
pub fn render_dataset(
    scene: &[Gaussian4D],
    cameras: &[Camera],
    timestamps: &[f64],
    settings: &RenderSettings,
) -> Result<ImageMatrix> {
    let mut images = Vec::with_capacity(timestamps.len());
    for &t in timestamps {
        let mut row = Vec::with_capacity(cameras.len());
        for cam in cameras {
            row.push(render(scene, cam, t, settings)?.image);
        }
        images.push(row);
    }
    let ds = ImageMatrix {
        images,
        timestamps: timestamps.to_vec(),
        cameras: cameras.to_vec(),
        meta: DatasetMeta {
            name: "synthetic".into(),
            source: SourceTag::Synthetic,
        },
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// 3×4 world-to-view matrix [R | t], row-major.
    world_to_view: [[f64; 4]; 3],
}

impl CameraRecord {
    fn from_camera(cam: &Camera) -> Self {
        let mut m = [[0.0; 4]; 3];
        for r in 0..3 {
            m[r][..3].copy_from_slice(&cam.rotation[r]);
            m[r][3] = cam.translation[r];
        }
        Self {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            world_to_view: m,
        }
    }

    fn into_camera(self, width: u32, height: u32) -> Camera {
        let mut rotation = [[0.0; 3]; 3];
        let mut translation = [0.0; 3];
        for r in 0..3 {
            rotation[r].copy_from_slice(&self.world_to_view[r][..3]);
            translation[r] = self.world_to_view[r][3];
        }
        Camera {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width,
            height,
            rotation,
            translation,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    times: usize,
    views: usize,
    height: usize,
    width: usize,
    timestamps: Vec<f64>,
    cameras: Vec<CameraRecord>,
    source: SourceTag,
    name: String,
}

pub fn frame_file_name(view: usize, time: usize) -> String {
    format!("view_{view:02}_time_{time:03}.png")
}

/// Write the dataset directory: manifest plus 8-bit PNG frames.
pub fn save_dataset(dataset: &ImageMatrix, dir: &Path) -> Result<()> {
    dataset.validate()?;
    let frames = dir.join("frames");
    fs::create_dir_all(&frames)?;
    let manifest = Manifest {
        version: DATASET_VERSION,
        times: dataset.n_times(),
        views: dataset.n_views(),
        height: dataset.height(),
        width: dataset.width(),
        timestamps: dataset.timestamps.clone(),
        cameras: dataset.cameras.iter().map(CameraRecord::from_camera).collect(),
        source: dataset.meta.source,
        name: dataset.meta.name.clone(),
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for (m, row) in dataset.images.iter().enumerate() {
        for (n, img) in row.iter().enumerate() {
            save_png(img, &frames.join(frame_file_name(n, m)))?;
        }
    }
    Ok(())
}

/// Load a dataset directory, checking the frame count, image shapes, and
/// timestamp monotonicity.
pub fn load_dataset(dir: &Path) -> Result<ImageMatrix> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::DataFormat(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_VERSION,
            found: manifest.version,
        });
    }
    if manifest.timestamps.len() != manifest.times || manifest.cameras.len() != manifest.views {
        return Err(Error::DataFormat(
            "manifest counts disagree with listed timestamps/cameras".into(),
        ));
    }
    for (i, pair) in manifest.timestamps.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::NonMonotoneTimestamps(i + 1));
        }
    }

    let frames = dir.join("frames");
    let expected = manifest.times * manifest.views;
    let mut found = 0usize;
    for m in 0..manifest.times {
        for n in 0..manifest.views {
            if frames.join(frame_file_name(n, m)).exists() {
                found += 1;
            }
        }
    }
    if found != expected {
        return Err(Error::CountMismatch { expected, found });
    }

    let mut images = Vec::with_capacity(manifest.times);
    for m in 0..manifest.times {
        let mut row = Vec::with_capacity(manifest.views);
        for n in 0..manifest.views {
            let img = load_png(&frames.join(frame_file_name(n, m)))?;
            if img.width() != manifest.width || img.height() != manifest.height {
                return Err(Error::DataFormat(format!(
                    "frame view {n} time {m} has unexpected size {}x{}",
                    img.width(),
                    img.height()
                )));
            }
            row.push(img);
        }
        images.push(row);
    }

    let cameras = manifest
        .cameras
        .into_iter()
        .map(|c| c.into_camera(manifest.width as u32, manifest.height as u32))
        .collect();
    let dataset = ImageMatrix {
        images,
        timestamps: manifest.timestamps,
        cameras,
        meta: DatasetMeta {
            name: manifest.name,
            source: manifest.source,
        },
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let mut out = image::RgbImage::new(img.width() as u32, img.height() as u32);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = img.pixel(x, y);
            out.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([
                    (p[0].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (p[1].clamp(0.0, 1.0) * 255.0).round() as u8,
                    (p[2].clamp(0.0, 1.0) * 255.0).round() as u8,
                ]),
            );
        }
    }
    out.save(path)?;
    Ok(())
}

pub fn load_png(path: &Path) -> Result<Image> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x as u32, y as u32);
            out.set_pixel(
                x,
                y,
                [
                    p[0] as f64 / 255.0,
                    p[1] as f64 / 255.0,
                    p[2] as f64 / 255.0,
                ],
            );
        }
    }
    Ok(out)
}

/// Scene file: 24-byte header (magic, version, count u64, sh_degree,
/// reserved), then fixed-width little-endian f64 records per Gaussian:
/// 4 mean, 4 log-scale, 8 quaternion pair, 1 opacity logit, 3·(L+1)² SH.
pub fn save_scene(scene: &[Gaussian4D], path: &Path) -> Result<()> {
    let sh_degree = if scene.is_empty() {
        0
    } else {
        scene[0].sh_degree().ok_or_else(|| {
            Error::InvalidParameter("scene has unsupported sh coefficient count".into())
        })?
    };
    let n_coeffs = sh::coeff_count(sh_degree);
    for g in scene {
        if g.sh_coeffs.len() != n_coeffs {
            return Err(Error::InvalidParameter(
                "scene Gaussians have mixed sh degrees".into(),
            ));
        }
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(&SCENE_MAGIC.to_le_bytes());
    buf.extend_from_slice(&SCENE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(scene.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(sh_degree as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for g in scene {
        for v in g
            .mu
            .iter()
            .chain(&g.log_scale)
            .chain(&g.rot_left)
            .chain(&g.rot_right)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&g.opacity_logit.to_le_bytes());
        for c in &g.sh_coeffs {
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_scene(path: &Path) -> Result<Vec<Gaussian4D>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        return Err(Error::Truncated(format!("{}: header", path.display())));
    }
    let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != SCENE_MAGIC {
        return Err(Error::DataFormat(format!(
            "{}: bad scene magic",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SCENE_VERSION {
        return Err(Error::VersionMismatch {
            expected: SCENE_VERSION,
            found: version,
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let sh_degree = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    if sh_degree > sh::MAX_DEGREE {
        return Err(Error::DataFormat(format!(
            "{}: sh degree {sh_degree} unsupported",
            path.display()
        )));
    }
    let n_coeffs = sh::coeff_count(sh_degree);
    let record_len = (4 + 4 + 8 + 1 + 3 * n_coeffs) * 8;
    let expected = 24 + count * record_len;
    if bytes.len() != expected {
        return Err(Error::Truncated(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }

    let mut scene = Vec::with_capacity(count);
    let mut off = 24;
    let read_f64 = |bytes: &[u8], off: &mut usize| {
        let v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    for _ in 0..count {
        let mut g = Gaussian4D::unit(sh_degree);
        for k in 0..4 {
            g.mu[k] = read_f64(&bytes, &mut off);
        }
        for k in 0..4 {
            g.log_scale[k] = read_f64(&bytes, &mut off);
        }
        for k in 0..4 {
            g.rot_left[k] = read_f64(&bytes, &mut off);
        }
        for k in 0..4 {
            g.rot_right[k] = read_f64(&bytes, &mut off);
        }
        g.opacity_logit = read_f64(&bytes, &mut off);
        for c in g.sh_coeffs.iter_mut() {
            for k in 0..3 {
                c[k] = read_f64(&bytes, &mut off);
            }
        }
        scene.push(g);
    }
    Ok(scene)
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfSidecar {
    version: u32,
    times: usize,
    views: usize,
    height: usize,
    width: usize,
    /// Layout of each .bin: header then c_rgb plane then c_ssim plane.
    layout: String,
}

pub fn conf_file_name(view: usize, time: usize) -> String {
    format!("view_{view:02}_time_{time:03}.bin")
}

fn write_conf_sidecar(
    conf_dir: &Path,
    times: usize,
    views: usize,
    width: usize,
    height: usize,
) -> Result<()> {
    let sidecar = ConfSidecar {
        version: CONF_VERSION,
        times,
        views,
        height,
        width,
        layout: "header[8xu32 LE: magic,version,height,width,view,time,planes,reserved] c_rgb[f32 LE] c_ssim[f32 LE]".into(),
    };
    fs::write(
        conf_dir.join("meta.json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

fn write_conf_frame(conf_dir: &Path, view: usize, time: usize, cm: &ConfidenceMaps) -> Result<()> {
    let (w, h) = (cm.c_rgb.width(), cm.c_rgb.height());
    let mut buf = Vec::with_capacity(32 + 8 * w * h);
    for word in [
        CONF_MAGIC,
        CONF_VERSION,
        h as u32,
        w as u32,
        view as u32,
        time as u32,
        2,
        0,
    ] {
        buf.extend_from_slice(&word.to_le_bytes());
    }
    for v in cm.c_rgb.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for v in cm.c_ssim.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(conf_dir.join(conf_file_name(view, time)), &buf)?;
    Ok(())
}

/// Persist confidence maps under `<dir>/conf/` as f32 planes with a JSON
/// sidecar; `maps` is indexed `[time][view]`.
pub fn save_confidence_maps(dir: &Path, maps: &[Vec<ConfidenceMaps>]) -> Result<()> {
    let conf_dir = dir.join("conf");
    fs::create_dir_all(&conf_dir)?;
    let times = maps.len();
    let views = maps.first().map_or(0, Vec::len);
    let (w, h) = maps
        .first()
        .and_then(|r| r.first())
        .map(|m| (m.c_rgb.width(), m.c_rgb.height()))
        .unwrap_or((0, 0));
    write_conf_sidecar(&conf_dir, times, views, w, h)?;
    for (m, row) in maps.iter().enumerate() {
        for (n, cm) in row.iter().enumerate() {
            write_conf_frame(&conf_dir, n, m, cm)?;
        }
    }
    Ok(())
}

/// Persist one view column of confidence maps. The resulting cache is
/// partial, so [`load_confidence_maps`] reports it as absent until every
/// column has been written.
pub fn save_confidence_column(
    dir: &Path,
    view: usize,
    views_total: usize,
    column: &[ConfidenceMaps],
) -> Result<()> {
    let conf_dir = dir.join("conf");
    fs::create_dir_all(&conf_dir)?;
    let (w, h) = column
        .first()
        .map(|m| (m.c_rgb.width(), m.c_rgb.height()))
        .unwrap_or((0, 0));
    write_conf_sidecar(&conf_dir, column.len(), views_total, w, h)?;
    for (m, cm) in column.iter().enumerate() {
        write_conf_frame(&conf_dir, view, m, cm)?;
    }
    Ok(())
}

/// Load the confidence maps saved by [`save_confidence_maps`], if present.
pub fn load_confidence_maps(dir: &Path) -> Result<Option<Vec<Vec<ConfidenceMaps>>>> {
    let conf_dir = dir.join("conf");
    let meta_path = conf_dir.join("meta.json");
    if !meta_path.exists() {
        return Ok(None);
    }
    let sidecar: ConfSidecar = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    if sidecar.version != CONF_VERSION {
        return Err(Error::VersionMismatch {
            expected: CONF_VERSION,
            found: sidecar.version,
        });
    }
    let plane = sidecar.width * sidecar.height;
    let mut out = Vec::with_capacity(sidecar.times);
    for m in 0..sidecar.times {
        let mut row = Vec::with_capacity(sidecar.views);
        for n in 0..sidecar.views {
            let path = conf_dir.join(conf_file_name(n, m));
            if !path.exists() {
                // Incomplete cache (e.g. a single-column run): treat as absent.
                return Ok(None);
            }
            let bytes = fs::read(&path)?;
            let expected = 32 + 8 * plane;
            if bytes.len() != expected {
                return Err(Error::Truncated(format!(
                    "{}: expected {expected} bytes, found {}",
                    path.display(),
                    bytes.len()
                )));
            }
            let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
            if magic != CONF_MAGIC {
                return Err(Error::DataFormat(format!(
                    "{}: bad confidence magic",
                    path.display()
                )));
            }
            let read_plane = |offset: usize| -> Vec<f64> {
                bytes[offset..offset + 4 * plane]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect()
            };
            row.push(ConfidenceMaps {
                c_rgb: Map::from_data(sidecar.width, sidecar.height, read_plane(32))?,
                c_ssim: Map::from_data(sidecar.width, sidecar.height, read_plane(32 + 4 * plane))?,
            });
        }
        out.push(row);
    }
    Ok(Some(out))
}

/// Run manifest written next to every command's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub start_unix_secs: f64,
    pub end_unix_secs: f64,
    pub outputs: Vec<PathBuf>,
    pub code_version: String,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
