//! Scene initialization, opacity pruning, and the reconstruction loop:
//! sample a frame, render, apply the confidence-weighted loss plus guidance,
//! back-propagate, Adam-step, prune on schedule.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::backward::{render_backward, ParamGradients};
use crate::confidence::ConfidenceMaps;
use crate::dataio::ImageMatrix;
use crate::error::{Error, Result};
use crate::gaussian::{logit, sigmoid, Gaussian4D};
use crate::loss::{apply_guidance, loss_img_conf, GuidanceProvider, LossWeights};
use crate::optim::{adam_step, AdamState, LearningRates};
use crate::render::{render, RenderSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: u32,
    /// Images per optimizer step.
    pub batch_size: u32,
    /// Number of Gaussians at initialization (desk-scale default 2000).
    pub init_count: usize,
    /// Positions are drawn uniformly inside a ball of this radius.
    pub init_radius: f64,
    pub learning_rates: LearningRates,
    /// Gaussians with opacity below this are removed on the prune schedule.
    pub prune_opacity_threshold: f64,
    /// Prune every this many iterations; 0 disables.
    pub prune_interval: u32,
    /// Densification hook; no split/clone heuristics ship, so this stays off.
    pub densify: bool,
    pub sh_degree: usize,
    pub seed: u64,
    /// Threading mode forwarded to the rasterizer (1 = deterministic).
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            batch_size: 1,
            init_count: 2000,
            init_radius: 0.5,
            learning_rates: LearningRates::default(),
            prune_opacity_threshold: 0.005,
            prune_interval: 100,
            densify: false,
            sh_degree: 2,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_count == 0 {
            return Err(Error::InvalidParameter("init_count must be > 0".into()));
        }
        if !(self.init_radius > 0.0) {
            return Err(Error::InvalidParameter("init_radius must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be > 0".into()));
        }
        if self.sh_degree > crate::sh::MAX_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "sh_degree {} unsupported (max {})",
                self.sh_degree,
                crate::sh::MAX_DEGREE
            )));
        }
        if !(0.0..1.0).contains(&self.prune_opacity_threshold) {
            return Err(Error::InvalidParameter(
                "prune threshold must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One loss-history row, emitted per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub iteration: u32,
    pub total: f64,
    pub rgb_term: f64,
    pub ssim_term: f64,
    pub guidance_norm: f64,
}

/// CSV with header `iteration,total,rgb_term,ssim_term,guidance_norm`.
pub fn loss_history_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("iteration,total,rgb_term,ssim_term,guidance_norm\n");
    for r in history {
        out.push_str(&format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            r.iteration, r.total, r.rgb_term, r.ssim_term, r.guidance_norm
        ));
    }
    out
}

/// Seeded random initialization: positions uniform inside the radius ball,
/// temporal means uniform over [0,1], identity rotations, spatial sigma from
/// the mean nearest-neighbor spacing radius·count^(−1/3), temporal sigma 0.5,
/// opacity 0.1, mid-gray degree-0 color.
pub fn init_scene(cfg: &TrainConfig) -> Result<Vec<Gaussian4D>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spatial_sigma = cfg.init_radius * (cfg.init_count as f64).powf(-1.0 / 3.0);
    let log_spatial = spatial_sigma.ln();
    let log_temporal = 0.5f64.ln();
    let n_coeffs = crate::sh::coeff_count(cfg.sh_degree);
    let opacity_logit = logit(0.1);

    let scene = (0..cfg.init_count)
        .map(|_| {
            let pos = loop {
                let p = [
                    rng.gen_range(-cfg.init_radius..=cfg.init_radius),
                    rng.gen_range(-cfg.init_radius..=cfg.init_radius),
                    rng.gen_range(-cfg.init_radius..=cfg.init_radius),
                ];
                if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= cfg.init_radius {
                    break p;
                }
            };
            let mu_t = rng.gen_range(0.0..=1.0);
            Gaussian4D {
                mu: [pos[0], pos[1], pos[2], mu_t],
                log_scale: [log_spatial, log_spatial, log_spatial, log_temporal],
                rot_left: [1.0, 0.0, 0.0, 0.0],
                rot_right: [1.0, 0.0, 0.0, 0.0],
                opacity_logit,
                // Zero coefficients render mid-gray 0.5.
                sh_coeffs: vec![[0.0; 3]; n_coeffs],
            }
        })
        .collect();
    Ok(scene)
}

/// Remove Gaussians with opacity below `threshold`, preserving order.
pub fn prune(scene: &[Gaussian4D], threshold: f64) -> Result<Vec<Gaussian4D>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(
            "prune threshold must be in [0, 1)".into(),
        ));
    }
    Ok(scene
        .iter()
        .filter(|g| sigmoid(g.opacity_logit) >= threshold)
        .cloned()
        .collect())
}

/// Train a fresh scene against an image matrix. `maps` is indexed
/// `[time][view]`, aligned with the dataset grid. Returns the trained scene
/// and the per-iteration loss history.
pub fn train(
    dataset: &ImageMatrix,
    maps: &[Vec<ConfidenceMaps>],
    cfg: &TrainConfig,
    weights: &LossWeights,
    provider: &dyn GuidanceProvider,
) -> Result<(Vec<Gaussian4D>, Vec<LossRecord>)> {
    dataset.validate()?;
    cfg.validate()?;
    weights.validate()?;
    let (n_times, n_views) = (dataset.n_times(), dataset.n_views());
    if n_times == 0 || n_views == 0 {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    if maps.len() != n_times || maps.iter().any(|row| row.len() != n_views) {
        return Err(Error::ShapeMismatch(format!(
            "confidence maps grid does not match dataset {n_times}x{n_views}"
        )));
    }

    let mut scene = init_scene(cfg)?;
    let mut state = AdamState::new(&scene);
    // Separate stream from the init RNG so changing init_count does not
    // reshuffle the frame schedule.
    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let settings = RenderSettings {
        threads: cfg.threads,
        ..RenderSettings::default()
    };

    let mut history = Vec::with_capacity(cfg.iterations as usize);
    for iteration in 1..=cfg.iterations {
        let mut batch_grads: Option<ParamGradients> = None;
        let mut total = 0.0;
        let mut rgb_term = 0.0;
        let mut ssim_term = 0.0;
        let mut guidance_norm = 0.0;

        for _ in 0..cfg.batch_size {
            let m = sampler.gen_range(0..n_times);
            let n = sampler.gen_range(0..n_views);
            let t = dataset.timestamps[m];
            let cam = &dataset.cameras[n];
            let target = &dataset.images[m][n];

            let out = render(&scene, cam, t, &settings)?;
            let (loss, mut d_image) = loss_img_conf(&out.image, target, &maps[m][n], weights)?;
            if weights.lambda_sds > 0.0 {
                // Condition on the input-video column at the same timestamp.
                let condition = &dataset.images[m][0];
                let g = apply_guidance(provider, &out.image, Some(condition), weights.lambda_sds)?;
                guidance_norm += g.l2_norm();
                d_image.add_assign(&g)?;
            }
            total += loss.total;
            rgb_term += loss.rgb_term;
            ssim_term += loss.ssim_term;

            let grads = render_backward(&scene, cam, t, &d_image, &settings)?;
            match &mut batch_grads {
                None => batch_grads = Some(grads),
                Some(acc) => acc.add_assign(&grads),
            }
        }

        let grads = batch_grads.expect("batch_size >= 1");
        adam_step(&mut scene, &grads, &mut state, &cfg.learning_rates)?;

        if cfg.prune_interval > 0 && iteration % cfg.prune_interval == 0 {
            let keep: Vec<bool> = scene
                .iter()
                .map(|g| sigmoid(g.opacity_logit) >= cfg.prune_opacity_threshold)
                .collect();
            if keep.iter().any(|k| !k) {
                let mut it = keep.iter();
                scene.retain(|_| *it.next().unwrap());
                state.retain(&keep);
            }
            if scene.is_empty() {
                return Err(Error::NumericFailure(format!(
                    "all Gaussians pruned at iteration {iteration}"
                )));
            }
        }

        let inv = 1.0 / cfg.batch_size as f64;
        history.push(LossRecord {
            iteration,
            total: total * inv,
            rgb_term: rgb_term * inv,
            ssim_term: ssim_term * inv,
            guidance_norm: guidance_norm * inv,
        });
    }
    Ok((scene, history))
}
