//! Implementations of the five subcommands plus config-file merging.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use splat4d::confidence::{confidence_for_column, psnr, ConfidenceMaps};
use splat4d::dataio::{
    build_orbit_rig, load_confidence_maps, load_dataset, load_scene, render_dataset,
    save_confidence_maps, save_dataset, save_png, save_scene, synth_scene, ImageMatrix, OrbitRig,
    RunManifest,
};
use splat4d::loss::{DebugPullGuidance, GuidanceProvider, LossWeights, NullGuidance};
use splat4d::optim::LearningRates;
use splat4d::render::{render, RenderSettings};
use splat4d::ssim::mean_ssim;
use splat4d::train::{loss_history_csv, train as train_scene, TrainConfig};

use crate::{Cli, ConfidenceArgs, EvalArgs, RenderArgs, SynthArgs, TrainArgs};

#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Lib(splat4d::Error),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(msg) => write!(f, "{msg}"),
            CmdError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<splat4d::Error> for CmdError {
    fn from(e: splat4d::Error) -> Self {
        CmdError::Lib(e)
    }
}

pub fn exit_code(err: &CmdError) -> u8 {
    match err {
        CmdError::Usage(_) => 1,
        CmdError::Lib(e) => {
            if e.is_data_error() {
                2
            } else if e.is_numeric_error() {
                3
            } else {
                1
            }
        }
    }
}

type CmdResult = Result<(), CmdError>;

// ---- config file -----------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    rig: RigSection,
    synth: SynthSection,
    train: TrainSection,
    render: RenderSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RigSection {
    elevation_deg: Option<f64>,
    radius: Option<f64>,
    fov_y_deg: Option<f64>,
    azimuth_offset_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthSection {
    gaussians: Option<usize>,
    views: Option<usize>,
    times: Option<usize>,
    res: Option<String>,
    motion: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    iters: Option<u32>,
    init: Option<usize>,
    init_radius: Option<f64>,
    batch_size: Option<u32>,
    lrgb: Option<f64>,
    lssim: Option<f64>,
    lsds: Option<f64>,
    guidance: Option<String>,
    seed: Option<u64>,
    prune_opacity_threshold: Option<f64>,
    prune_interval: Option<u32>,
    sh_degree: Option<usize>,
    lr_position: Option<f64>,
    lr_log_scale: Option<f64>,
    lr_rotation: Option<f64>,
    lr_opacity: Option<f64>,
    lr_sh: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RenderSection {
    traj: Option<String>,
    frames: Option<usize>,
    time_range: Option<String>,
    res: Option<String>,
}

fn load_config(cli: &Cli) -> Result<FileConfig, CmdError> {
    match &cli.config {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CmdError::Usage(format!("--config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CmdError::Usage(format!("--config {}: {e}", path.display())))
        }
    }
}

fn rig_from(section: &RigSection, n_views: usize) -> OrbitRig {
    let base = OrbitRig::default();
    OrbitRig {
        n_views,
        elevation_deg: section.elevation_deg.unwrap_or(base.elevation_deg),
        radius: section.radius.unwrap_or(base.radius),
        fov_y_deg: section.fov_y_deg.unwrap_or(base.fov_y_deg),
        azimuth_offset_deg: section
            .azimuth_offset_deg
            .unwrap_or(base.azimuth_offset_deg),
    }
}

fn parse_res(s: &str) -> Result<(u32, u32), CmdError> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| CmdError::Usage(format!("--res '{s}' is not WxH")))?;
    let w: u32 = w
        .parse()
        .map_err(|_| CmdError::Usage(format!("--res width '{w}' is not a number")))?;
    let h: u32 = h
        .parse()
        .map_err(|_| CmdError::Usage(format!("--res height '{h}' is not a number")))?;
    if w == 0 || h == 0 {
        return Err(CmdError::Usage("--res must be positive".into()));
    }
    Ok((w, h))
}

fn parse_time_range(s: &str) -> Result<(f64, f64), CmdError> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| CmdError::Usage(format!("--time-range '{s}' is not a..b")))?;
    let a: f64 = a
        .parse()
        .map_err(|_| CmdError::Usage(format!("--time-range start '{a}' is not a number")))?;
    let b: f64 = b
        .parse()
        .map_err(|_| CmdError::Usage(format!("--time-range end '{b}' is not a number")))?;
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
        return Err(CmdError::Usage(format!(
            "--time-range {a}..{b} must satisfy 0 <= a <= b <= 1"
        )));
    }
    Ok((a, b))
}

fn unix_secs() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn linspace01(n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| if n == 1 { 0.0 } else { m as f64 / (n - 1) as f64 })
        .collect()
}

fn settings_for(cli: &Cli) -> RenderSettings {
    RenderSettings {
        threads: cli.threads,
        ..RenderSettings::default()
    }
}

/// Per-column confidence maps for the whole grid, `[time][view]`.
fn compute_all_confidence(dataset: &ImageMatrix) -> Result<Vec<Vec<ConfidenceMaps>>, CmdError> {
    let mut maps = vec![Vec::with_capacity(dataset.n_views()); dataset.n_times()];
    for n in 0..dataset.n_views() {
        let col = dataset.column(n);
        let col_maps = confidence_for_column(&col).map_err(CmdError::Lib)?;
        for (m, cm) in col_maps.into_iter().enumerate() {
            maps[m].push(cm);
        }
    }
    Ok(maps)
}

// ---- synth ------------------------------------------------------------------

pub fn synth(args: &SynthArgs, cli: &Cli) -> CmdResult {
    let cfg = load_config(cli)?;
    let start = unix_secs();
    let gaussians = args.gaussians.or(cfg.synth.gaussians).unwrap_or(200);
    let views = args.views.or(cfg.synth.views).unwrap_or(16);
    let times = args.times.or(cfg.synth.times).unwrap_or(5);
    let res = args
        .res
        .clone()
        .or(cfg.synth.res.clone())
        .unwrap_or_else(|| "64x64".into());
    let (width, height) = parse_res(&res)?;
    let motion = args.motion.or(cfg.synth.motion).unwrap_or(0.1);
    let seed = args.seed.or(cfg.synth.seed).unwrap_or(7);
    if times == 0 || views == 0 || gaussians == 0 {
        return Err(CmdError::Usage(
            "--times, --views, --gaussians must be positive".into(),
        ));
    }

    let scene = synth_scene(gaussians, seed, motion);
    let rig = rig_from(&cfg.rig, views);
    let cameras = build_orbit_rig(&rig, width, height)?;
    let timestamps = linspace01(times);
    let dataset = render_dataset(&scene, &cameras, &timestamps, &settings_for(cli))?;

    fs::create_dir_all(&args.out).map_err(splat4d::Error::from)?;
    save_dataset(&dataset, &args.out)?;
    let scene_path = args.out.join("gt_scene.bin");
    save_scene(&scene, &scene_path)?;

    RunManifest {
        command: "synth".into(),
        config: serde_json::json!({
            "gaussians": gaussians, "views": views, "times": times,
            "width": width, "height": height, "motion": motion,
            "rig": {
                "elevation_deg": rig.elevation_deg, "radius": rig.radius,
                "fov_y_deg": rig.fov_y_deg, "azimuth_offset_deg": rig.azimuth_offset_deg,
            },
        }),
        seed,
        start_unix_secs: start,
        end_unix_secs: unix_secs(),
        outputs: vec![args.out.clone(), scene_path],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
    .save(&args.out.join("run_manifest.json"))?;

    println!(
        "wrote {views}x{times} dataset at {width}x{height} ({gaussians} gaussians, motion {motion}, seed {seed}) to {}",
        args.out.display()
    );
    Ok(())
}

// ---- confidence --------------------------------------------------------------

pub fn confidence(args: &ConfidenceArgs, cli: &Cli) -> CmdResult {
    let _ = load_config(cli)?;
    let start = unix_secs();
    let dataset = load_dataset(&args.data)?;
    if dataset.n_times() < 3 {
        log::warn!(
            "column length {} < 3: no interpolation estimates, confidence defaults to 1",
            dataset.n_times()
        );
    }
    let columns: Vec<usize> = match args.column {
        Some(j) if j >= dataset.n_views() => {
            return Err(CmdError::Usage(format!(
                "--column {j} out of range for {} views",
                dataset.n_views()
            )));
        }
        Some(j) => vec![j],
        None => (0..dataset.n_views()).collect(),
    };

    let mut grid: Vec<Vec<ConfidenceMaps>> = Vec::new();
    if columns.len() == dataset.n_views() {
        grid = compute_all_confidence(&dataset)?;
        save_confidence_maps(&args.data, &grid)?;
    }
    for &n in &columns {
        let col_maps = if grid.is_empty() {
            let col = confidence_for_column(&dataset.column(n)).map_err(CmdError::Lib)?;
            // Partial caches read back as absent, so training recomputes.
            splat4d::dataio::save_confidence_column(&args.data, n, dataset.n_views(), &col)?;
            col
        } else {
            grid.iter().map(|row| row[n].clone()).collect()
        };
        let mean_rgb: f64 =
            col_maps.iter().map(|m| m.c_rgb.mean()).sum::<f64>() / col_maps.len() as f64;
        let mean_ssim_v: f64 =
            col_maps.iter().map(|m| m.c_ssim.mean()).sum::<f64>() / col_maps.len() as f64;
        println!("column {n:2}: mean c_rgb {mean_rgb:.3}, mean c_ssim {mean_ssim_v:.3}");
    }

    RunManifest {
        command: "confidence".into(),
        config: serde_json::json!({ "column": args.column }),
        seed: 0,
        start_unix_secs: start,
        end_unix_secs: unix_secs(),
        outputs: vec![args.data.join("conf")],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
    .save(&args.data.join("conf_manifest.json"))?;
    Ok(())
}

// ---- train --------------------------------------------------------------------

pub fn train(args: &TrainArgs, cli: &Cli) -> CmdResult {
    let cfg = load_config(cli)?;
    let start = unix_secs();
    let dataset = load_dataset(&args.data)?;

    let base_lrs = LearningRates::default();
    let train_cfg = TrainConfig {
        iterations: args.iters.or(cfg.train.iters).unwrap_or(500),
        batch_size: cfg.train.batch_size.unwrap_or(1),
        init_count: args.init.or(cfg.train.init).unwrap_or(2000),
        init_radius: cfg.train.init_radius.unwrap_or(0.5),
        learning_rates: LearningRates {
            position: cfg.train.lr_position.unwrap_or(base_lrs.position),
            log_scale: cfg.train.lr_log_scale.unwrap_or(base_lrs.log_scale),
            rotation: cfg.train.lr_rotation.unwrap_or(base_lrs.rotation),
            opacity: cfg.train.lr_opacity.unwrap_or(base_lrs.opacity),
            sh: cfg.train.lr_sh.unwrap_or(base_lrs.sh),
        },
        prune_opacity_threshold: cfg.train.prune_opacity_threshold.unwrap_or(0.005),
        prune_interval: cfg.train.prune_interval.unwrap_or(100),
        densify: false,
        sh_degree: cfg.train.sh_degree.unwrap_or(2),
        seed: args.seed.or(cfg.train.seed).unwrap_or(0),
        threads: cli.threads,
    };
    let weights = LossWeights {
        lambda_rgb_base: args.lrgb.or(cfg.train.lrgb).unwrap_or(8000.0),
        lambda_ssim_base: args.lssim.or(cfg.train.lssim).unwrap_or(2000.0),
        lambda_sds: args.lsds.or(cfg.train.lsds).unwrap_or(0.0),
    };
    let guidance_name = args
        .guidance
        .clone()
        .or(cfg.train.guidance.clone())
        .unwrap_or_else(|| "null".into());
    let provider: Box<dyn GuidanceProvider> = match guidance_name.as_str() {
        "null" => Box::new(NullGuidance),
        "debug" => Box::new(DebugPullGuidance),
        other => return Err(CmdError::Usage(format!("unknown guidance '{other}'"))),
    };

    let maps = match load_confidence_maps(&args.data)? {
        Some(maps)
            if maps.len() == dataset.n_times()
                && maps.first().map(Vec::len) == Some(dataset.n_views()) =>
        {
            maps
        }
        _ => {
            log::info!("confidence maps missing; computing them now");
            let maps = compute_all_confidence(&dataset)?;
            save_confidence_maps(&args.data, &maps)?;
            // Train on the persisted (f32) maps so a rerun that loads them
            // from disk reproduces this run exactly.
            load_confidence_maps(&args.data)?.ok_or_else(|| {
                splat4d::Error::DataFormat("confidence maps vanished after save".into())
            })?
        }
    };

    let t0 = Instant::now();
    let (scene, history) = train_scene(&dataset, &maps, &train_cfg, &weights, provider.as_ref())?;
    let elapsed = t0.elapsed();

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(splat4d::Error::from)?;
        }
    }
    save_scene(&scene, &args.out)?;
    let csv_path = sibling(&args.out, "loss.csv");
    fs::write(&csv_path, loss_history_csv(&history)).map_err(splat4d::Error::from)?;

    RunManifest {
        command: "train".into(),
        config: serde_json::json!({
            "data": args.data, "iters": train_cfg.iterations,
            "init": train_cfg.init_count, "batch_size": train_cfg.batch_size,
            "lrgb": weights.lambda_rgb_base, "lssim": weights.lambda_ssim_base,
            "lsds": weights.lambda_sds, "guidance": guidance_name,
            "sh_degree": train_cfg.sh_degree,
            "prune_opacity_threshold": train_cfg.prune_opacity_threshold,
            "prune_interval": train_cfg.prune_interval,
        }),
        seed: train_cfg.seed,
        start_unix_secs: start,
        end_unix_secs: unix_secs(),
        outputs: vec![args.out.clone(), csv_path.clone()],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
    .save(&sibling(&args.out, "manifest.json"))?;

    let final_loss = history.last().map_or(0.0, |r| r.total);
    println!(
        "trained {} gaussians in {:.1}s over {} iterations (final loss {final_loss:.3}); scene at {}",
        scene.len(),
        elapsed.as_secs_f64(),
        train_cfg.iterations,
        args.out.display()
    );
    Ok(())
}

/// `scene.bin` -> `scene.bin.<suffix>` next to the original.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

// ---- render ---------------------------------------------------------------------

pub fn render_traj(args: &RenderArgs, cli: &Cli) -> CmdResult {
    let cfg = load_config(cli)?;
    let start = unix_secs();
    let scene = load_scene(&args.scene)?;
    let traj = args
        .traj
        .clone()
        .or(cfg.render.traj.clone())
        .unwrap_or_else(|| "orbit".into());
    let frames = args.frames.or(cfg.render.frames).unwrap_or(16).max(1);
    let time_range = args
        .time_range
        .clone()
        .or(cfg.render.time_range.clone())
        .unwrap_or_else(|| "0..1".into());
    let (t0, t1) = parse_time_range(&time_range)?;
    let res = args
        .res
        .clone()
        .or(cfg.render.res.clone())
        .unwrap_or_else(|| "64x64".into());
    let (width, height) = parse_res(&res)?;

    let cameras: Vec<_> = match traj.as_str() {
        "orbit" => {
            let rig = rig_from(&cfg.rig, frames);
            build_orbit_rig(&rig, width, height)?
        }
        "fixed" => {
            let rig = rig_from(&cfg.rig, 1);
            let cam = build_orbit_rig(&rig, width, height)?.remove(0);
            vec![cam; frames]
        }
        other => return Err(CmdError::Usage(format!("unknown trajectory '{other}'"))),
    };

    fs::create_dir_all(&args.out).map_err(splat4d::Error::from)?;
    let settings = settings_for(cli);
    let mut total_ms = 0.0;
    for (k, cam) in cameras.iter().enumerate() {
        let t = if frames == 1 {
            t0
        } else {
            t0 + (t1 - t0) * k as f64 / (frames - 1) as f64
        };
        let tick = Instant::now();
        let out = render(&scene, cam, t, &settings)?;
        total_ms += tick.elapsed().as_secs_f64() * 1e3;
        save_png(&out.image, &args.out.join(format!("frame_{k:04}.png")))?;
    }
    println!(
        "rendered {frames} frames at {width}x{height} ({traj}); mean {:.2} ms/frame",
        total_ms / frames as f64
    );

    RunManifest {
        command: "render".into(),
        config: serde_json::json!({
            "scene": args.scene, "traj": traj, "frames": frames,
            "time_range": format!("{t0}..{t1}"), "width": width, "height": height,
        }),
        seed: 0,
        start_unix_secs: start,
        end_unix_secs: unix_secs(),
        outputs: vec![args.out.clone()],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
    .save(&args.out.join("run_manifest.json"))?;
    Ok(())
}



// ---- eval -----------------------------------------------------------------------

pub fn eval(args: &EvalArgs, cli: &Cli) -> CmdResult {
    let _ = load_config(cli)?;
    let start = unix_secs();
    let scene = load_scene(&args.scene)?;
    let dataset = load_dataset(&args.data)?;
    let views: Vec<usize> = match &args.holdout_views {
        None => (0..dataset.n_views()).collect(),
        Some(list) if list.trim().is_empty() => (0..dataset.n_views()).collect(),
        Some(list) => {
            let mut out = Vec::new();
            for item in list.split(',') {
                let v: usize = item.trim().parse().map_err(|_| {
                    CmdError::Usage(format!("--holdout-views entry '{item}' is not an index"))
                })?;
                if v >= dataset.n_views() {
                    return Err(CmdError::Usage(format!(
                        "--holdout-views index {v} out of range for {} views",
                        dataset.n_views()
                    )));
                }
                out.push(v);
            }
            out
        }
    };

    let settings = settings_for(cli);
    let mut csv = String::from("view,time_index,timestamp,psnr_db,ssim\n");
    let mut overall_psnr = 0.0;
    let mut overall_ssim = 0.0;
    let mut count = 0usize;
    println!("view    mean PSNR (dB)    mean SSIM");
    for &n in &views {
        // Cameras carry the dataset resolution, so renders match it.
        let cam = &dataset.cameras[n];
        let mut view_psnr = 0.0;
        let mut view_ssim = 0.0;
        for (m, &t) in dataset.timestamps.iter().enumerate() {
            let out = render(&scene, cam, t, &settings)?;
            let p = psnr(&out.image, &dataset.images[m][n])?;
            let s = mean_ssim(&out.image, &dataset.images[m][n])?;
            csv.push_str(&format!("{n},{m},{t:.6},{p:.4},{s:.6}\n"));
            view_psnr += p;
            view_ssim += s;
            overall_psnr += p;
            overall_ssim += s;
            count += 1;
        }
        let nt = dataset.n_times() as f64;
        println!(
            "{n:4}    {:>14.2}    {:>9.4}",
            view_psnr / nt,
            view_ssim / nt
        );
    }
    if count > 0 {
        println!(
            " all    {:>14.2}    {:>9.4}",
            overall_psnr / count as f64,
            overall_ssim / count as f64
        );
    }
    let csv_path = sibling(&args.scene, "eval.csv");
    fs::write(&csv_path, csv).map_err(splat4d::Error::from)?;
    println!("per-cell metrics in {}", csv_path.display());

    RunManifest {
        command: "eval".into(),
        config: serde_json::json!({
            "scene": args.scene, "data": args.data, "holdout_views": views,
        }),
        seed: 0,
        start_unix_secs: start,
        end_unix_secs: unix_secs(),
        outputs: vec![csv_path.clone()],
        code_version: env!("CARGO_PKG_VERSION").into(),
    }
    .save(&sibling(&args.scene, "eval.manifest.json"))?;
    Ok(())
}
