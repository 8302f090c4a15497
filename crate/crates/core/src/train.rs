//! Fitting the per-gaussian uncertainty field to training-camera visibility.
//!
//! Every gaussian that contributes at least `threshold_t` to some pixel of a
//! training camera receives a supervision record with the direction `x`
//! toward that camera. Each record pulls `u(x)` toward 0 and pushes the
//! uncertainty of unseen directions toward 1:
//!
//! * opposite: `(1 - lambda) * u(x) + lambda * (1 - u(-x))`
//! * sampled mean: `(1 - lambda) * u(x) + lambda * (1 - mean_s u(d_s))`
//!
//! With `lambda < 0.5` a gaussian observed from both `x` and `-x` still ends
//! up with low uncertainty in both directions.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::render::collect_contributions;
use crate::scene::{sigmoid, Camera, Scene};
use crate::sh::{self, num_coeffs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Regularize with the uncertainty seen from the antipodal direction.
    Opposite,
    /// Regularize with a Monte-Carlo mean over random directions.
    SampledMean,
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opposite" => Ok(Self::Opposite),
            "sampled_mean" | "sampled-mean" => Ok(Self::SampledMean),
            other => Err(Error::InvalidArgument(format!("unknown loss variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the "stay uncertain elsewhere" term; strictly below 0.5.
    pub lambda: f64,
    /// Minimum blend weight `T_i * k_i` for a gaussian to be supervised by a pixel.
    pub threshold_t: f64,
    pub variant: LossVariant,
    /// Directions per iteration for the sampled-mean variant.
    pub mean_samples: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            threshold_t: 0.05,
            variant: LossVariant::Opposite,
            mean_samples: 16,
            iterations: 2000,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::Config(format!(
            "lambda must be in (0, 0.5), got {lambda}"
        )));
    }
    Ok(())
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.threshold_t > 0.0 && self.threshold_t < 1.0) {
            return Err(Error::Config(format!(
                "threshold_t must be in (0, 1), got {}",
                self.threshold_t
            )));
        }
        if self.mean_samples == 0 {
            return Err(Error::Config("mean_samples must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// `(1 - lambda) * u_x + lambda * (1 - u_negx)`.
pub fn loss_opposite(u_x: f64, u_negx: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((1.0 - lambda) * u_x + lambda * (1.0 - u_negx))
}

/// `(1 - lambda) * u_x + lambda * (1 - u_bar)`.
pub fn loss_sampled_mean(u_x: f64, u_bar: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((1.0 - lambda) * u_x + lambda * (1.0 - u_bar))
}

/// Uniform random unit vector.
pub fn random_direction(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// One supervised (gaussian, camera) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionRecord {
    pub gaussian_id: usize,
    pub camera_index: usize,
    /// Unit vector from the gaussian toward the camera center.
    pub view_dir: Vector3<f64>,
    /// Largest pixel weight this gaussian reached in this camera.
    pub weight: f64,
}

/// Harvests contribution records from every camera and keeps one record per
/// (gaussian, camera), the one with the largest weight. Every pixel of a
/// camera sees a gaussian from the same center direction, so nothing is lost.
///
/// Output is grouped by gaussian id, cameras ascending within a group.
pub fn harvest_records(
    scene: &Scene,
    cameras: &[Camera],
    threshold: f64,
) -> Result<Vec<SupervisionRecord>> {
    let mut records = Vec::new();
    let mut best: Vec<Option<usize>> = vec![None; scene.len()];
    for (ci, cam) in cameras.iter().enumerate() {
        let start = records.len();
        for c in collect_contributions(scene, cam, threshold)? {
            match best[c.gaussian_id] {
                Some(slot) => {
                    let r: &mut SupervisionRecord = &mut records[slot];
                    r.weight = r.weight.max(c.weight);
                }
                None => {
                    best[c.gaussian_id] = Some(records.len());
                    records.push(SupervisionRecord {
                        gaussian_id: c.gaussian_id,
                        camera_index: ci,
                        view_dir: c.view_dir,
                        weight: c.weight,
                    });
                }
            }
        }
        for r in &records[start..] {
            best[r.gaussian_id] = None;
        }
    }
    records.sort_by_key(|r| (r.gaussian_id, r.camera_index));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: usize,
    pub final_loss: f64,
    /// Mean loss over records before each update.
    pub loss_curve: Vec<f64>,
    pub wall_time_s: f64,
    pub records: usize,
}

/// Basis values of one record's direction and of its antipode.
struct RecordBasis {
    toward: Vec<f64>,
    away: Vec<f64>,
}

/// All records of one gaussian.
struct Group {
    gaussian_id: usize,
    bases: Vec<RecordBasis>,
}

/// Per-record loss and its gradient with respect to the SH coefficients for
/// the opposite variant. `toward` and `away` are basis values at `x` and `-x`.
pub fn opposite_loss_grad(
    coeffs: &[f64],
    toward: &[f64],
    away: &[f64],
    lambda: f64,
    grad: &mut [f64],
) -> f64 {
    let u_x = sigmoid(sh::dot(coeffs, toward));
    let u_neg = sigmoid(sh::dot(coeffs, away));
    let a = (1.0 - lambda) * u_x * (1.0 - u_x);
    let b = -lambda * u_neg * (1.0 - u_neg);
    for ((g, t), w) in grad.iter_mut().zip(toward).zip(away) {
        *g += a * t + b * w;
    }
    (1.0 - lambda) * u_x + lambda * (1.0 - u_neg)
}

/// Mean uncertainty over `samples` (basis values per direction) and its gradient.
pub fn sampled_mean_and_grad(coeffs: &[f64], samples: &[Vec<f64>], grad: &mut [f64]) -> f64 {
    let inv = 1.0 / samples.len() as f64;
    let mut mean = 0.0;
    for basis in samples {
        let u = sigmoid(sh::dot(coeffs, basis));
        mean += u * inv;
        let d = u * (1.0 - u) * inv;
        for (g, b) in grad.iter_mut().zip(basis) {
            *g += d * b;
        }
    }
    mean
}

/// Sampled-mean loss and gradient for all `count` records of one gaussian
/// sharing the same direction samples.
fn sampled_group_loss_grad(
    coeffs: &[f64],
    bases: &[RecordBasis],
    samples: &[Vec<f64>],
    lambda: f64,
    grad: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for rb in bases {
        let u_x = sigmoid(sh::dot(coeffs, &rb.toward));
        let a = (1.0 - lambda) * u_x * (1.0 - u_x);
        for (g, t) in grad.iter_mut().zip(&rb.toward) {
            *g += a * t;
        }
        loss += (1.0 - lambda) * u_x;
    }
    let mut mean_grad = vec![0.0; coeffs.len()];
    let u_bar = sampled_mean_and_grad(coeffs, samples, &mut mean_grad);
    let n = bases.len() as f64;
    for (g, m) in grad.iter_mut().zip(&mean_grad) {
        *g -= lambda * n * m;
    }
    loss + n * lambda * (1.0 - u_bar)
}

/// Deterministic pairwise summation.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Trains the uncertainty field of every supervised gaussian in place.
///
/// Geometry and color are frozen, so records are harvested once. Gaussians
/// without records are left untouched.
pub fn train(scene: &mut Scene, cameras: &[Camera], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if cameras.is_empty() {
        return Err(Error::InvalidArgument("no training cameras".into()));
    }
    scene.validate()?;
    let started = Instant::now();

    let records = harvest_records(scene, cameras, config.threshold_t)?;
    if records.is_empty() {
        return Err(Error::NoSupervision);
    }
    let degree = scene.uncert_degree();
    let nc = num_coeffs(degree);

    let mut groups: Vec<Group> = Vec::new();
    for r in &records {
        let mut toward = vec![0.0; nc];
        sh::basis_into(&r.view_dir, &mut toward);
        let mut away = toward.clone();
        sh::flip_to_antipode(&mut away);
        let rb = RecordBasis { toward, away };
        match groups.last_mut() {
            Some(g) if g.gaussian_id == r.gaussian_id => g.bases.push(rb),
            _ => groups.push(Group {
                gaussian_id: r.gaussian_id,
                bases: vec![rb],
            }),
        }
    }

    let mut params: Vec<f64> = groups
        .iter()
        .flat_map(|g| scene.gaussians[g.gaussian_id].uncert_sh.values().to_vec())
        .collect();
    let mut grads = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inv_n = 1.0 / records.len() as f64;
    let lambda = config.lambda;
    let mut loss_curve = Vec::with_capacity(config.iterations);
    let mut group_losses = vec![0.0; groups.len()];

    for _ in 0..config.iterations {
        let samples: Vec<Vec<f64>> = match config.variant {
            LossVariant::Opposite => Vec::new(),
            LossVariant::SampledMean => (0..config.mean_samples)
                .map(|_| {
                    let mut b = vec![0.0; nc];
                    sh::basis_into(&random_direction(&mut rng), &mut b);
                    b
                })
                .collect(),
        };
        grads
            .par_chunks_mut(nc)
            .zip(params.par_chunks(nc))
            .zip(groups.par_iter())
            .zip(group_losses.par_iter_mut())
            .for_each(|(((grad, coeffs), group), loss)| {
                grad.fill(0.0);
                *loss = match config.variant {
                    LossVariant::Opposite => group
                        .bases
                        .iter()
                        .map(|rb| opposite_loss_grad(coeffs, &rb.toward, &rb.away, lambda, grad))
                        .sum(),
                    LossVariant::SampledMean => {
                        sampled_group_loss_grad(coeffs, &group.bases, &samples, lambda, grad)
                    }
                };
                for g in grad.iter_mut() {
                    *g *= inv_n;
                }
            });
        loss_curve.push(pairwise_sum(&group_losses) * inv_n);
        adam.step(&mut params, &grads);
    }

    for (group, coeffs) in groups.iter().zip(params.chunks(nc)) {
        scene.gaussians[group.gaussian_id]
            .uncert_sh
            .values_mut()
            .copy_from_slice(coeffs);
    }

    Ok(TrainReport {
        iterations: config.iterations,
        final_loss: *loss_curve.last().expect("at least one iteration"),
        loss_curve,
        wall_time_s: started.elapsed().as_secs_f64(),
        records: records.len(),
    })
}
