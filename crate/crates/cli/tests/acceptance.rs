//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (run with `--nocapture` to see them).
//!
//! Criteria with runtime budgets hold a shared lock so parallel test
//! scheduling cannot distort their timings.

use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use splat4d::backward::render_backward;
use splat4d::camera::Camera;
use splat4d::confidence::{confidence_for_column, psnr, ConfidenceMaps};
use splat4d::dataio::{
    build_orbit_rig, load_scene, render_dataset, synth_scene, ImageMatrix, OrbitRig,
};
use splat4d::frame::Image;
use splat4d::gaussian::{build_covariance, condition_on_time, eval_density, Gaussian4D};
use splat4d::loss::{loss_img_conf, LossWeights, NullGuidance};
use splat4d::render::{render, RenderSettings};
use splat4d::ssim::{mean_ssim, ssim_map_windowed};
use splat4d::train::{train, TrainConfig};
use splat4d::volsync::{fuse_pair, interpolate_column, weight_schedule, FeatureVolume};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (q.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if n > 0.1 {
            return splat4d::gaussian::normalize_quat(q);
        }
    }
}

fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian4D {
    Gaussian4D {
        mu: [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.0),
        ],
        log_scale: [
            rng.gen_range(-2.0..0.5),
            rng.gen_range(-2.0..0.5),
            rng.gen_range(-2.0..0.5),
            rng.gen_range(-2.0..0.5),
        ],
        rot_left: random_unit_quat(rng),
        rot_right: random_unit_quat(rng),
        opacity_logit: rng.gen_range(-2.0..2.0),
        sh_coeffs: vec![[0.2, -0.1, 0.3]],
    }
}

/// Criterion 1: conditioning matches a dense block-inversion Schur oracle at
/// 1e-10 relative, and the density factorizes, over 1000 seeded Gaussians.
#[test]
fn criterion_1_gaussian_math_oracles() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut max_rel = 0.0f64;
    let mut max_fact = 0.0f64;
    for _ in 0..1000 {
        let g = random_gaussian(&mut rng);
        let cov = build_covariance(&g).unwrap();
        let t = rng.gen_range(0.0..1.0);
        let cond = condition_on_time(&cov, g.mu, t).unwrap();

        // Independent route: conditional stats from the full 4x4 inverse.
        let lambda = cov.sigma.try_inverse().unwrap();
        let lambda_xx = lambda.fixed_view::<3, 3>(0, 0).into_owned();
        let lambda_xt = Vector3::new(lambda[(0, 3)], lambda[(1, 3)], lambda[(2, 3)]);
        let cov_oracle = lambda_xx.try_inverse().unwrap();
        let mean_oracle =
            Vector3::new(g.mu[0], g.mu[1], g.mu[2]) - cov_oracle * lambda_xt * (t - g.mu[3]);

        let cov_scale = cov_oracle.abs().max().max(1.0);
        let mean_scale = mean_oracle.abs().max().max(1.0);
        max_rel = max_rel
            .max((cond.cov - cov_oracle).abs().max() / cov_scale)
            .max((cond.mean - mean_oracle).abs().max() / mean_scale);

        // Factorization identity at a random spacetime point.
        let p = [
            g.mu[0] + rng.gen_range(-1.0..1.0),
            g.mu[1] + rng.gen_range(-1.0..1.0),
            g.mu[2] + rng.gen_range(-1.0..1.0),
            t,
        ];
        let joint = eval_density(&g, p).unwrap();
        let dx = Vector3::new(p[0], p[1], p[2]) - cond.mean;
        let q = (dx.transpose() * cond.cov.try_inverse().unwrap() * dx)[(0, 0)];
        let product = cond.temporal_weight * (-0.5 * q).exp();
        max_fact = max_fact.max((joint - product).abs());
    }
    let elapsed = start.elapsed();
    assert!(max_rel < 1e-10, "Schur oracle relative error {max_rel:.3e}");
    assert!(max_fact < 1e-10, "factorization error {max_fact:.3e}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:.2?}");
    println!(
        "ACCEPTANCE 1 (gaussian-math oracle): PASS — max Schur rel err {max_rel:.2e}, \
         max factorization err {max_fact:.2e}, {} Gaussians in {elapsed:.2?}",
        1000
    );
}

/// Criterion 2: sampled analytic gradients on a 16x16 render of 20 random
/// Gaussians match central finite differences (1e-3 relative or 1e-6
/// absolute), covering all six parameter groups.
#[test]
fn criterion_2_gradient_correctness() {
    let _guard = serial();
    let start = Instant::now();
    let cam = Camera {
        fx: 60.0,
        fy: 60.0,
        cx: 8.0,
        cy: 8.0,
        width: 16,
        height: 16,
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 2.0],
    };
    let settings = RenderSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let scene: Vec<Gaussian4D> = (0..20)
        .map(|_| {
            let mut g = random_gaussian(&mut rng);
            g.mu = [
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(0.0..1.0),
            ];
            g.log_scale = [
                rng.gen_range(0.02f64..0.08).ln(),
                rng.gen_range(0.02f64..0.08).ln(),
                rng.gen_range(0.02f64..0.08).ln(),
                rng.gen_range(0.3f64..0.6).ln(),
            ];
            g.sh_coeffs = vec![
                [
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                ],
                [
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ],
                [
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ],
                [
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ],
            ];
            g
        })
        .collect();
    let weights = Image::from_data(
        16,
        16,
        (0..16 * 16 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let loss = |scene: &[Gaussian4D]| -> f64 {
        let img = render(scene, &cam, 0.55, &settings).unwrap().image;
        img.data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum()
    };
    let grads = render_backward(&scene, &cam, 0.55, &weights, &settings).unwrap();

    let mut checked_per_group = [0usize; 6];
    let mut max_violation = 0.0f64;
    let mut samples = 0;
    while samples < 60 {
        let gi = rng.gen_range(0..scene.len());
        let group = if samples < 6 {
            samples
        } else {
            rng.gen_range(0..6)
        };
        let k = rng.gen_range(0..4usize);
        let (analytic, perturb): (f64, Box<dyn Fn(&mut Gaussian4D, f64)>) = match group {
            0 => (
                grads.per_gaussian[gi].mu[k],
                Box::new(move |g: &mut Gaussian4D, h: f64| g.mu[k] += h),
            ),
            1 => (
                grads.per_gaussian[gi].log_scale[k],
                Box::new(move |g: &mut Gaussian4D, h: f64| g.log_scale[k] += h),
            ),
            2 => (
                grads.per_gaussian[gi].rot_left[k],
                Box::new(move |g: &mut Gaussian4D, h: f64| g.rot_left[k] += h),
            ),
            3 => (
                grads.per_gaussian[gi].rot_right[k],
                Box::new(move |g: &mut Gaussian4D, h: f64| g.rot_right[k] += h),
            ),
            4 => (
                grads.per_gaussian[gi].opacity_logit,
                Box::new(move |g: &mut Gaussian4D, h: f64| g.opacity_logit += h),
            ),
            _ => {
                let kk = rng.gen_range(0..scene[gi].sh_coeffs.len());
                let c = rng.gen_range(0..3usize);
                (
                    grads.per_gaussian[gi].sh[kk][c],
                    Box::new(move |g: &mut Gaussian4D, h: f64| g.sh_coeffs[kk][c] += h),
                )
            }
        };
        let h = 1e-5;
        let mut plus = scene.clone();
        perturb(&mut plus[gi], h);
        let mut minus = scene.clone();
        perturb(&mut minus[gi], -h);
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let tol = (1e-3 * fd.abs().max(analytic.abs())).max(1e-6);
        let err = (fd - analytic).abs();
        assert!(
            err < tol,
            "group {group} gaussian {gi}: fd {fd:.6e} vs analytic {analytic:.6e}"
        );
        max_violation = max_violation.max(err / tol);
        checked_per_group[group] += 1;
        samples += 1;
    }
    let elapsed = start.elapsed();
    assert!(
        checked_per_group.iter().all(|c| *c > 0),
        "all six groups must be sampled: {checked_per_group:?}"
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:.2?}");
    println!(
        "ACCEPTANCE 2 (gradient correctness): PASS — {samples} samples across groups \
         {checked_per_group:?}, worst error at {:.0}% of tolerance, in {elapsed:.2?}",
        max_violation * 100.0
    );
}

fn run_cli(args: &[&str]) {
    let exe = env!("CARGO_BIN_EXE_splat4d");
    let out = Command::new(exe)
        .args(args)
        .output()
        .expect("failed to launch splat4d");
    assert!(
        out.status.success(),
        "splat4d {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn holdout_camera() -> Camera {
    build_orbit_rig(
        &OrbitRig {
            n_views: 1,
            azimuth_offset_deg: 11.25,
            ..Default::default()
        },
        64,
        64,
    )
    .unwrap()
    .remove(0)
}

fn holdout_metrics(
    gt_scene: &[Gaussian4D],
    scene: &[Gaussian4D],
    timestamps: &[f64],
) -> (f64, f64) {
    let cam = holdout_camera();
    let settings = RenderSettings::default().parallel();
    let mut p_total = 0.0;
    let mut s_total = 0.0;
    for &t in timestamps {
        let gt = render(gt_scene, &cam, t, &settings).unwrap().image;
        let pred = render(scene, &cam, t, &settings).unwrap().image;
        p_total += psnr(&pred, &gt).unwrap();
        s_total += mean_ssim(&pred, &gt).unwrap();
    }
    let n = timestamps.len() as f64;
    (p_total / n, s_total / n)
}

/// Criterion 3: full render-and-recover through the CLI: synthesize the
/// dataset, train 2000 fresh Gaussians for 500 iterations under the
/// confidence-weighted loss, and exceed 25 dB / 0.85 SSIM on the held-out
/// view (azimuth offset 11.25°, all 5 times) within 10 minutes.
#[test]
fn criterion_3_render_and_recover() {
    let _guard = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let scene_path = dir.path().join("trained.bin");
    run_cli(&[
        "synth",
        "--gaussians",
        "200",
        "--views",
        "16",
        "--times",
        "5",
        "--res",
        "64x64",
        "--motion",
        "0.1",
        "--seed",
        "7",
        "--out",
        data.to_str().unwrap(),
    ]);
    run_cli(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        scene_path.to_str().unwrap(),
        "--iters",
        "500",
        "--init",
        "2000",
        "--seed",
        "11",
        "--threads",
        "2",
    ]);
    let elapsed = start.elapsed();

    let gt_scene = load_scene(&data.join("gt_scene.bin")).unwrap();
    let trained = load_scene(&scene_path).unwrap();
    let timestamps: Vec<f64> = (0..5).map(|m| m as f64 / 4.0).collect();
    let (mean_psnr, mean_ssim_v) = holdout_metrics(&gt_scene, &trained, &timestamps);

    assert!(
        mean_psnr >= 25.0,
        "held-out PSNR {mean_psnr:.2} dB below 25 dB"
    );
    assert!(mean_ssim_v >= 0.85, "held-out SSIM {mean_ssim_v:.4} below 0.85");
    assert!(
        elapsed.as_secs_f64() <= 600.0,
        "synth+train took {elapsed:.1?}, budget 10 min"
    );
    println!(
        "ACCEPTANCE 3 (render-and-recover): PASS — held-out PSNR {mean_psnr:.2} dB (≥25), \
         SSIM {mean_ssim_v:.4} (≥0.85), synth+train in {elapsed:.1?} (≤10 min)"
    );
}

fn corrupt_block(img: &mut Image) {
    for y in 16..48 {
        for x in 16..48 {
            let p = img.pixel(x, y);
            img.set_pixel(x, y, [1.0 - p[0], 1.0 - p[1], 1.0 - p[2]]);
        }
    }
}

fn grid_confidence(ds: &ImageMatrix) -> Vec<Vec<ConfidenceMaps>> {
    let mut maps = vec![Vec::new(); ds.n_times()];
    for n in 0..ds.n_views() {
        let col_maps = confidence_for_column(&ds.column(n)).unwrap();
        for (m, c) in col_maps.into_iter().enumerate() {
            maps[m].push(c);
        }
    }
    maps
}

/// Criterion 4: confidence efficacy. One frame of the criterion-3 dataset is
/// corrupted (its central 32×32 block — 25% of its pixels — inverted);
/// training with the computed confidence maps must beat training with maps
/// forced to 1 by ≥ 0.5 dB held-out PSNR on 3 seeds out of 3.
///
/// Known-red: at this protocol (500 iterations, batch 1, one corrupted frame
/// in 80) the clean majority heals most of the corruption on its own, so the
/// measured margins sit well below the 0.5 dB bar. The assertion is kept as
/// stated rather than loosened; see README "Acceptance status".
#[test]
fn criterion_4_confidence_efficacy() {
    let _guard = serial();
    let scene_gt = synth_scene(200, 7, 0.1);
    let cameras = build_orbit_rig(&OrbitRig::default(), 64, 64).unwrap();
    let timestamps: Vec<f64> = (0..5).map(|m| m as f64 / 4.0).collect();
    let settings = RenderSettings::default().parallel();
    let mut dataset = render_dataset(&scene_gt, &cameras, &timestamps, &settings).unwrap();
    corrupt_block(&mut dataset.images[2][1]);

    let maps = grid_confidence(&dataset);
    let corrupted_rgb = maps[2][1].c_rgb.mean();
    let corrupted_ssim = maps[2][1].c_ssim.mean();
    let ones: Vec<Vec<ConfidenceMaps>> = (0..5)
        .map(|_| (0..16).map(|_| ConfidenceMaps::ones(64, 64)).collect())
        .collect();
    let weights = LossWeights {
        lambda_sds: 0.0,
        ..Default::default()
    };

    let mut margins = Vec::new();
    for seed in [1u64, 2, 3] {
        let cfg = TrainConfig {
            iterations: 500,
            init_count: 2000,
            seed,
            threads: 0,
            ..Default::default()
        };
        let (with_conf, _) = train(&dataset, &maps, &cfg, &weights, &NullGuidance).unwrap();
        let (without, _) = train(&dataset, &ones, &cfg, &weights, &NullGuidance).unwrap();
        let (p_with, _) = holdout_metrics(&scene_gt, &with_conf, &timestamps);
        let (p_without, _) = holdout_metrics(&scene_gt, &without, &timestamps);
        margins.push(p_with - p_without);
    }
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    println!(
        "ACCEPTANCE 4 (confidence efficacy): margins {:+.2}/{:+.2}/{:+.2} dB (mean {mean:+.2}); \
         corrupted frame detected at mean c_rgb {corrupted_rgb:.3} / c_ssim {corrupted_ssim:.3}",
        margins[0], margins[1], margins[2]
    );
    for (i, m) in margins.iter().enumerate() {
        assert!(
            *m >= 0.5,
            "seed {}: confidence margin {m:+.3} dB below the 0.5 dB bar \
             (all margins {margins:?}, mean {mean:+.3}). One corrupted frame in 80 is \
             largely out-voted by the clean majority at this budget, so suppressing it \
             cannot produce a 0.5 dB held-out gain; see README (Acceptance status).",
            [1, 2, 3][i]
        );
    }
    println!(
        "ACCEPTANCE 4 (confidence efficacy): PASS — margins {:+.2}/{:+.2}/{:+.2} dB, all ≥ 0.5",
        margins[0], margins[1], margins[2]
    );
}

/// Criterion 5: weight schedule table and two-frame fusion closed forms.
#[test]
fn criterion_5_weight_schedule_and_fusion() {
    let _guard = serial();
    // Table after normalization, sum-to-one at 1e-12, middle ≥ 0.5.
    let cases: [(usize, Vec<f64>); 4] = [
        (4, vec![0.15, 0.7, 0.15]),
        (6, vec![0.1, 0.1, 0.6, 0.1, 0.1]),
        (
            8,
            [1.0, 1.0, 1.0, 6.0, 1.0, 1.0, 1.0].iter().map(|x| x / 12.0).collect(),
        ),
        (
            20,
            [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 14.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0]
                .iter()
                .map(|x| x / 28.0)
                .collect(),
        ),
    ];
    for (n, expected) in &cases {
        let w = weight_schedule(*n).unwrap();
        assert_eq!(w.taps().len(), expected.len(), "tap count for N={n}");
        for (a, b) in w.taps().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "N={n}: {a} vs {b}");
        }
        assert!((w.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.middle() >= 0.5);
    }

    // Fusion endpoints and the sparse-input ratio.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let data_a: Vec<f64> = (0..2 * 27).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let data_b: Vec<f64> = (0..2 * 27).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v1 = FeatureVolume::from_data(2, 3, 1, data_a.clone()).unwrap();
    let v2 = FeatureVolume::from_data(2, 3, 2, data_b.clone()).unwrap();
    let (a0, b0) = fuse_pair(&v1, &v2, 0.0).unwrap();
    assert_eq!(a0.data(), v1.data());
    assert_eq!(b0.data(), v2.data());
    let (a5, b5) = fuse_pair(&v1, &v2, 0.5).unwrap();
    for (x, y) in a5.data().iter().zip(b5.data()) {
        assert!((x - y).abs() < 1e-12);
    }
    let (a25, b25) = fuse_pair(&v1, &v2, 0.25).unwrap();
    for i in 0..data_a.len() {
        assert!((a25.data()[i] - (0.75 * data_a[i] + 0.25 * data_b[i])).abs() < 1e-12);
        assert!((b25.data()[i] - (0.75 * data_b[i] + 0.25 * data_a[i])).abs() < 1e-12);
    }
    println!(
        "ACCEPTANCE 5 (weight schedule & fusion): PASS — 4 table rows exact, \
         fusion closed forms at w ∈ {{0, 0.25, 0.5}} within 1e-12"
    );
}

/// Criterion 6: recursive midpoint interpolation produces exactly 4K−3
/// frames with originals bit-preserved, and the constant-endpoint example
/// yields the quarter steps.
#[test]
fn criterion_6_interpolation_contract() {
    let _guard = serial();
    for k in 1..=32usize {
        let frames: Vec<Image> = (0..k)
            .map(|i| Image::constant(4, 4, [i as f64 / 32.0, 0.5, 1.0 - i as f64 / 32.0]))
            .collect();
        let out = interpolate_column(&frames).unwrap();
        assert_eq!(out.len(), 4 * k - 3, "length for K={k}");
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(&out[4 * i], f, "original {i} not bit-identical for K={k}");
        }
    }
    let a = Image::constant(4, 4, [0.0; 3]);
    let b = Image::constant(4, 4, [1.0; 3]);
    let out = interpolate_column(&[a, b]).unwrap();
    let values: Vec<f64> = out.iter().map(|img| img.pixel(0, 0)[0]).collect();
    assert_eq!(values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    println!(
        "ACCEPTANCE 6 (interpolation contract): PASS — M = 4K−3 for K = 1..32, \
         originals bit-preserved, constant endpoints give (0, 0.25, 0.5, 0.75, 1)"
    );
}

/// Criterion 7: a 256×256 render of a 20,000-Gaussian scene is bit-identical
/// across deterministic runs, parallel mode reproduces it within 1e-10 mean
/// absolute, and a render completes within 5 seconds.
#[test]
fn criterion_7_determinism_and_throughput() {
    let _guard = serial();
    let scene = synth_scene(20_000, 3, 0.1);
    let cam = build_orbit_rig(&OrbitRig::default(), 256, 256)
        .unwrap()
        .remove(0);
    let deterministic = RenderSettings::default();
    let a = render(&scene, &cam, 0.5, &deterministic).unwrap();
    let b = render(&scene, &cam, 0.5, &deterministic).unwrap();
    assert_eq!(a.image.data(), b.image.data(), "deterministic runs differ");

    let start = Instant::now();
    let par = render(&scene, &cam, 0.5, &RenderSettings::default().parallel()).unwrap();
    let par_elapsed = start.elapsed();
    let diff = a.image.mean_abs_diff(&par.image).unwrap();
    assert!(diff < 1e-10, "parallel deviation {diff:.3e}");
    assert!(
        par_elapsed.as_secs_f64() <= 5.0,
        "render took {par_elapsed:.2?}, budget 5 s"
    );
    println!(
        "ACCEPTANCE 7 (determinism & throughput): PASS — bit-identical deterministic runs, \
         parallel deviation {diff:.1e} (≤1e-10), 256×256 of 20k Gaussians in {par_elapsed:.2?} (≤5 s)"
    );
}

/// Criterion 8: with all-ones confidence the weighted loss equals the
/// independently evaluated unweighted form with λ = (8000, 2000).
#[test]
fn criterion_8_unweighted_loss_reduction() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let maps = ConfidenceMaps::ones(16, 16);
    let weights = LossWeights {
        lambda_rgb_base: 8000.0,
        lambda_ssim_base: 2000.0,
        lambda_sds: 0.0,
    };
    let mut max_rel = 0.0f64;
    for _ in 0..20 {
        let mk = |rng: &mut ChaCha8Rng| {
            Image::from_data(
                16,
                16,
                (0..16 * 16 * 3).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let (loss, _) = loss_img_conf(&a, &b, &maps, &weights).unwrap();

        // Independent unweighted evaluation.
        let l1 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / (16.0 * 16.0 * 3.0);
        let smap = ssim_map_windowed(&a, &b, 11).unwrap();
        let dssim = smap.data().iter().map(|s| 1.0 - s).sum::<f64>() / (16.0 * 16.0);
        let unweighted = 8000.0 * l1 + 2000.0 * dssim;
        let rel = (loss.total - unweighted).abs() / unweighted.max(1.0);
        max_rel = max_rel.max(rel);
        assert!(
            rel < 1e-12,
            "weighted {} vs unweighted {unweighted}",
            loss.total
        );
    }
    println!(
        "ACCEPTANCE 8 (unweighted-loss reduction): PASS — max relative gap {max_rel:.2e} \
         over 20 random pairs (≤1e-12)"
    );
}

/// Quantization-limited self-evaluation: the ground-truth scene scores at
/// least 45 dB against its own 8-bit dataset.
#[test]
fn ground_truth_self_evaluation_is_quantization_limited() {
    let _guard = serial();
    let scene = synth_scene(200, 7, 0.1);
    let cameras = build_orbit_rig(&OrbitRig::default(), 64, 64).unwrap();
    let timestamps: Vec<f64> = (0..5).map(|m| m as f64 / 4.0).collect();
    let settings = RenderSettings::default().parallel();
    let ds = render_dataset(&scene, &cameras, &timestamps, &settings).unwrap();
    let mut worst = f64::INFINITY;
    for (m, &t) in timestamps.iter().enumerate() {
        for n in 0..ds.n_views() {
            let img = render(&scene, &ds.cameras[n], t, &settings).unwrap().image;
            let quantized = ds.images[m][n].quantized8();
            worst = worst.min(psnr(&img, &quantized).unwrap());
        }
    }
    assert!(worst >= 45.0, "worst self-PSNR {worst:.2} dB");
}
