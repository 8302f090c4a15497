//! Synthetic holdout experiment: reconstruct from a training arc, then check
//! whether each uncertainty method flags the error on a held-out arc.
//!
//! The reconstruction shares the true geometry and refits color on the
//! training views only, so error concentrates on surfaces and directions the
//! training arc never saw.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ensemble_uncertainty, fit_member, run_ensemble, EnsembleConfig};
use crate::error::Result;
use crate::render::{render, RenderBuffer};
use crate::scene::{Camera, Scene};
use crate::sparsify::{error_map, evaluate_errors, EvalReport};
use crate::synth::{holdout_indices, make_orbit_with, make_scene, OrbitSpec, SceneKind};
use crate::train::{train, TrainConfig, TrainReport};

/// Uniform random maps, one per camera, from a single seed.
pub fn random_maps(cameras: &[Camera], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cameras
        .iter()
        .map(|c| (0..c.pixel_count()).map(|_| rng.random::<f64>()).collect())
        .collect()
}

/// Rendered SH uncertainty rasters.
pub fn sh_maps(scene: &Scene, cameras: &[Camera]) -> Result<Vec<Vec<f64>>> {
    cameras
        .iter()
        .map(|c| render(scene, c).map(|b| b.uncert))
        .collect()
}

pub fn render_all(scene: &Scene, cameras: &[Camera]) -> Result<Vec<RenderBuffer>> {
    cameras.par_iter().map(|c| render(scene, c)).collect()
}

/// Color refit of `scene` on the given views, starting from a random
/// initialization, without bootstrap.
pub fn reconstruct(
    scene: &Scene,
    cameras: &[Camera],
    targets: &[RenderBuffer],
    iterations: usize,
    seed: u64,
) -> Result<Scene> {
    let cfg = EnsembleConfig {
        fit_iterations: iterations,
        bootstrap: false,
        ..EnsembleConfig::default()
    };
    fit_member(scene, cameras, targets, seed, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_gaussians: usize,
    pub n_cams: usize,
    pub holdout: usize,
    pub image_size: u32,
    pub seed: u64,
    pub reconstruction_iterations: usize,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_gaussians: 2000,
            n_cams: 64,
            holdout: 16,
            image_size: 128,
            seed: 0,
            reconstruction_iterations: 500,
            train: TrainConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub sh: EvalReport,
    pub ensemble: EvalReport,
    pub random: EvalReport,
    pub train_report: TrainReport,
    pub sh_wall_time_s: f64,
    pub ensemble_wall_time_s: f64,
    pub ensemble_member_wall_time_s: Vec<f64>,
    /// Mean rendered uncertainty at the middle held-out camera.
    pub heldout_mean_uncertainty: f64,
    /// Mean rendered uncertainty at the training camera farthest from the holdout.
    pub training_mean_uncertainty: f64,
}

/// Runs the poster holdout experiment end to end.
pub fn run_poster_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let truth = make_scene(SceneKind::Poster, config.n_gaussians, config.seed)?;
    let cams = make_orbit_with(&OrbitSpec {
        n_cams: config.n_cams,
        width: config.image_size,
        height: config.image_size,
        ..OrbitSpec::default()
    })?;
    let split = holdout_indices(cams.len(), config.holdout, config.seed)?;
    let train_cams: Vec<Camera> = split.train.iter().map(|&i| cams[i].clone()).collect();
    let eval_cams: Vec<Camera> = split.eval.iter().map(|&i| cams[i].clone()).collect();
    let train_gt = render_all(&truth, &train_cams)?;
    let eval_gt = render_all(&truth, &eval_cams)?;

    let mut recon = reconstruct(
        &truth,
        &train_cams,
        &train_gt,
        config.reconstruction_iterations,
        config.seed,
    )?;
    let errors = eval_cams
        .iter()
        .zip(&eval_gt)
        .map(|(c, gt)| error_map(&render(&recon, c)?, gt))
        .collect::<Result<Vec<_>>>()?;

    let t = Instant::now();
    let train_report = train(&mut recon, &train_cams, &config.train)?;
    let sh_wall_time_s = t.elapsed().as_secs_f64();
    let sh = evaluate_errors(&errors, &sh_maps(&recon, &eval_cams)?)?;

    let ens_cfg = EnsembleConfig {
        seed: config.seed,
        ..config.ensemble.clone()
    };
    let run = run_ensemble(&recon, &train_cams, &train_gt, &ens_cfg)?;
    let ens_maps = eval_cams
        .iter()
        .map(|c| ensemble_uncertainty(&run.members, c))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = evaluate_errors(&errors, &ens_maps)?;
    let random = evaluate_errors(&errors, &random_maps(&eval_cams, config.seed))?;

    // Middle of the held-out block, and the training camera diametrically
    // across the orbit from it.
    let mid = split.eval[split.eval.len() / 2];
    let far = (mid + cams.len() / 2) % cams.len();
    let mean = |c: &Camera| -> Result<f64> {
        let u = render(&recon, c)?.uncert;
        Ok(u.iter().sum::<f64>() / u.len() as f64)
    };

    Ok(ExperimentOutcome {
        seed: config.seed,
        sh,
        ensemble,
        random,
        train_report,
        sh_wall_time_s,
        ensemble_wall_time_s: run.total_wall_time_s,
        ensemble_member_wall_time_s: run.member_wall_time_s,
        heldout_mean_uncertainty: mean(&cams[mid])?,
        training_mean_uncertainty: mean(&cams[far])?,
    })
}
