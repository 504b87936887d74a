//! Property tests over the pure math: rotation algebra, density
//! factorization, SSIM symmetry, volume smoothing linearity, interpolation
//! counts, and persistence round trips.

use nalgebra::{Matrix4, Vector3};
use proptest::prelude::*;

use splat4d::confidence::psnr;
use splat4d::frame::Image;
use splat4d::gaussian::{
    build_covariance, build_rotation, condition_on_time, eval_density, normalize_quat, Gaussian4D,
};
use splat4d::ssim::ssim_map_windowed;
use splat4d::volsync::{
    interpolate_column, smooth_volumes, weight_schedule, FeatureVolume, SmoothingWeights,
};

fn quat_strategy() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero quaternion", |q| {
            q.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.1
        })
        .prop_map(normalize_quat)
}

fn gaussian_strategy() -> impl Strategy<Value = Gaussian4D> {
    (
        prop::array::uniform4(-1.0f64..1.0),
        prop::array::uniform4(-2.0f64..0.5),
        quat_strategy(),
        quat_strategy(),
        -2.0f64..2.0,
    )
        .prop_map(|(mu, log_scale, rot_left, rot_right, opacity_logit)| Gaussian4D {
            mu,
            log_scale,
            rot_left,
            rot_right,
            opacity_logit,
            sh_coeffs: vec![[0.1, 0.2, 0.3]],
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rotations_are_orthogonal(ql in quat_strategy(), qr in quat_strategy()) {
        let r = build_rotation(ql, qr).unwrap();
        let err = (r.transpose() * r - Matrix4::identity()).abs().max();
        prop_assert!(err < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_stays_positive_definite(g in gaussian_strategy()) {
        let cov = build_covariance(&g).unwrap();
        let asym = (cov.sigma - cov.sigma.transpose()).abs().max();
        prop_assert!(asym < 1e-12);
        let eigs = cov.sigma.symmetric_eigen().eigenvalues;
        prop_assert!(eigs.iter().all(|e| *e > 0.0));
    }

    #[test]
    fn density_symmetry_and_factorization(
        g in gaussian_strategy(),
        delta in prop::array::uniform4(-0.8f64..0.8),
        t in 0.0f64..1.0,
    ) {
        let plus = [
            g.mu[0] + delta[0], g.mu[1] + delta[1],
            g.mu[2] + delta[2], g.mu[3] + delta[3],
        ];
        let minus = [
            g.mu[0] - delta[0], g.mu[1] - delta[1],
            g.mu[2] - delta[2], g.mu[3] - delta[3],
        ];
        let a = eval_density(&g, plus).unwrap();
        let b = eval_density(&g, minus).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.max(1e-30));

        let cov = build_covariance(&g).unwrap();
        let cond = condition_on_time(&cov, g.mu, t).unwrap();
        let x = Vector3::new(plus[0], plus[1], plus[2]);
        let dx = x - cond.mean;
        let q = (dx.transpose() * cond.cov.try_inverse().unwrap() * dx)[(0, 0)];
        let joint = eval_density(&g, [plus[0], plus[1], plus[2], t]).unwrap();
        prop_assert!((joint - cond.temporal_weight * (-0.5 * q).exp()).abs() < 1e-10);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(seed in 0u64..1000) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            Image::from_data(
                12, 12,
                (0..12 * 12 * 3).map(|_| rng.gen_range(0.0..1.0)).collect(),
            ).unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let ab = ssim_map_windowed(&a, &b, 11).unwrap();
        let ba = ssim_map_windowed(&b, &a, 11).unwrap();
        for (x, y) in ab.data().iter().zip(ba.data()) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(x));
        }
    }

    #[test]
    fn smoothing_is_convex_and_linear(
        n in 1usize..8,
        scale in -2.0f64..2.0,
        seed in 0u64..100,
    ) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vols: Vec<FeatureVolume> = (0..n)
            .map(|i| {
                FeatureVolume::from_data(
                    1, 3, i as u32,
                    (0..27).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ).unwrap()
            })
            .collect();
        let w = weight_schedule(n.max(3)).unwrap();
        let smoothed = smooth_volumes(&vols, &w).unwrap();

        // Linearity under scaling.
        let scaled: Vec<FeatureVolume> = vols
            .iter()
            .map(|v| {
                FeatureVolume::from_data(
                    1, 3, v.frame_index,
                    v.data().iter().map(|x| x * scale).collect(),
                ).unwrap()
            })
            .collect();
        let smoothed_scaled = smooth_volumes(&scaled, &w).unwrap();
        for (s, ss) in smoothed.iter().zip(&smoothed_scaled) {
            for (a, b) in s.data().iter().zip(ss.data()) {
                prop_assert!((a * scale - b).abs() < 1e-10);
            }
        }

        // Weights from the schedule are a convex combination.
        prop_assert!((w.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.taps().iter().all(|t| *t >= 0.0));
    }

    #[test]
    fn identity_smoothing_weights_are_noop(seed in 0u64..100) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let vols: Vec<FeatureVolume> = (0..4)
            .map(|i| {
                FeatureVolume::from_data(
                    2, 2, i as u32,
                    (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ).unwrap()
            })
            .collect();
        let w = SmoothingWeights::new(vec![1.0]).unwrap();
        prop_assert_eq!(smooth_volumes(&vols, &w).unwrap(), vols);
    }

    #[test]
    fn interpolation_contract(k in 1usize..16) {
        let frames: Vec<Image> = (0..k)
            .map(|i| Image::constant(3, 3, [i as f64 / 16.0; 3]))
            .collect();
        let out = interpolate_column(&frames).unwrap();
        prop_assert_eq!(out.len(), 4 * k - 3);
        for (i, f) in frames.iter().enumerate() {
            prop_assert_eq!(&out[4 * i], f);
        }
    }

    #[test]
    fn psnr_identity_is_capped(seed in 0u64..50) {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = Image::from_data(
            6, 6,
            (0..108).map(|_| rng.gen_range(0.0..1.0)).collect(),
        ).unwrap();
        prop_assert_eq!(psnr(&img, &img).unwrap(), 99.0);
    }
}

#[test]
fn scene_persistence_round_trips_randomized_scenes() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..10 {
        let scene = splat4d::dataio::synth_scene(20, seed, 0.3);
        let path = dir.path().join(format!("scene_{seed}.bin"));
        splat4d::dataio::save_scene(&scene, &path).unwrap();
        assert_eq!(splat4d::dataio::load_scene(&path).unwrap(), scene);
    }
}
