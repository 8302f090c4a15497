//! Ensemble baseline: several members refit from random initializations,
//! their per-pixel disagreement taken as uncertainty.
//!
//! Members keep the scene's geometry and opacity and only refit color SH
//! against the training images. With geometry frozen the blend weights
//! `T_i * k_i` are constants, so rendered color is linear in the color
//! coefficients (up to the clamp at zero) and the photometric L2 loss has an
//! exact gradient through the frozen weight map.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::render::{render, weight_map, RenderBuffer};
use crate::scene::{Camera, Scene, COLOR_DEGREE};
use crate::sh::{self, num_coeffs, ShCoeffs};

const NC: usize = num_coeffs(COLOR_DEGREE);
/// Color coefficients per gaussian (3 channels).
const PER_GAUSSIAN: usize = 3 * NC;

pub const INIT_SIGMA_DC: f64 = 0.3;
pub const INIT_SIGMA_REST: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: usize,
    pub seed: u64,
    pub fit_iterations: usize,
    pub learning_rate: f64,
    /// Resample training views with replacement per member.
    pub bootstrap: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: 10,
            seed: 0,
            fit_iterations: 500,
            learning_rate: 0.01,
            bootstrap: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(Error::Config(format!(
                "an ensemble needs at least 2 members, got {}",
                self.members
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn member_seed(&self, member: usize) -> u64 {
        self.seed
            .wrapping_add((member as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Replaces every color coefficient with a normal draw.
pub fn randomize_colors(scene: &mut Scene, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dc = Normal::new(0.0, INIT_SIGMA_DC).expect("valid sigma");
    let rest = Normal::new(0.0, INIT_SIGMA_REST).expect("valid sigma");
    for g in &mut scene.gaussians {
        for ch in &mut g.color_sh {
            let v = ch.values_mut();
            v[0] = dc.sample(&mut rng);
            for x in &mut v[1..] {
                *x = rest.sample(&mut rng);
            }
        }
    }
}

/// One training view with its weight map rewritten to local gaussian indices.
struct ViewProblem {
    multiplicity: f64,
    offsets: Vec<usize>,
    /// `(local index, weight)`.
    entries: Vec<(u32, f32)>,
    transmittance: Vec<f64>,
    target: Vec<[f64; 3]>,
    gaussians: Vec<usize>,
    basis: Vec<[f64; NC]>,
}

impl ViewProblem {
    fn new(scene: &Scene, cam: &Camera, target: &RenderBuffer, multiplicity: f64) -> Result<Self> {
        let wm = weight_map(scene, cam)?;
        let mut local = vec![u32::MAX; scene.len()];
        let mut gaussians = Vec::new();
        let entries = wm
            .entries
            .iter()
            .map(|&(g, w)| {
                let slot = &mut local[g as usize];
                if *slot == u32::MAX {
                    *slot = gaussians.len() as u32;
                    gaussians.push(g as usize);
                }
                (*slot, w)
            })
            .collect();
        let basis = gaussians
            .iter()
            .map(|&g| {
                let mut b = [0.0; NC];
                sh::basis_into(&wm.view_dirs[g], &mut b);
                b
            })
            .collect();
        Ok(Self {
            multiplicity,
            offsets: wm.offsets,
            entries,
            transmittance: wm.transmittance,
            target: target.color.clone(),
            gaussians,
            basis,
        })
    }

    /// Adds this view's loss gradient (unnormalized) for its gaussians into
    /// `grad` (local layout, `PER_GAUSSIAN` per gaussian) and returns the
    /// weighted squared error.
    fn accumulate(&self, params: &[f64], background: [f64; 3], grad: &mut [f64]) -> f64 {
        let n = self.gaussians.len();
        let mut colors = vec![[0.0; 3]; n];
        let mut active = vec![[false; 3]; n];
        for (l, &g) in self.gaussians.iter().enumerate() {
            let p = &params[g * PER_GAUSSIAN..(g + 1) * PER_GAUSSIAN];
            for ch in 0..3 {
                let raw = sh::dot(&p[ch * NC..(ch + 1) * NC], &self.basis[l]) + 0.5;
                active[l][ch] = raw > 0.0;
                colors[l][ch] = raw.max(0.0);
            }
        }

        let mut dcolor = vec![[0.0; 3]; n];
        let mut loss = 0.0;
        for (p, target) in self.target.iter().enumerate() {
            let span = &self.entries[self.offsets[p]..self.offsets[p + 1]];
            let t = self.transmittance[p];
            let mut pred = [background[0] * t, background[1] * t, background[2] * t];
            for &(l, w) in span {
                let c = &colors[l as usize];
                let w = w as f64;
                pred[0] += w * c[0];
                pred[1] += w * c[1];
                pred[2] += w * c[2];
            }
            let r = [pred[0] - target[0], pred[1] - target[1], pred[2] - target[2]];
            loss += self.multiplicity * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
            for &(l, w) in span {
                let d = &mut dcolor[l as usize];
                let s = 2.0 * self.multiplicity * w as f64;
                d[0] += s * r[0];
                d[1] += s * r[1];
                d[2] += s * r[2];
            }
        }

        for l in 0..n {
            let out = &mut grad[l * PER_GAUSSIAN..(l + 1) * PER_GAUSSIAN];
            for ch in 0..3 {
                if !active[l][ch] {
                    continue;
                }
                let d = dcolor[l][ch];
                for (o, b) in out[ch * NC..(ch + 1) * NC].iter_mut().zip(&self.basis[l]) {
                    *o += d * b;
                }
            }
        }
        loss
    }
}

fn check_targets(cameras: &[Camera], targets: &[RenderBuffer]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no target images".into()));
    }
    if targets.len() != cameras.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} targets for {} cameras",
            targets.len(),
            cameras.len()
        )));
    }
    for (i, (c, t)) in cameras.iter().zip(targets).enumerate() {
        if c.width != t.width || c.height != t.height {
            return Err(Error::ShapeMismatch(format!(
                "target {i} is {}x{}, camera is {}x{}",
                t.width, t.height, c.width, c.height
            )));
        }
    }
    Ok(())
}

/// Per-iteration loss trace of a color fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub loss_curve: Vec<f64>,
}

/// Refits color from a random initialization drawn with `seed`.
///
/// Geometry, opacity and uncertainty of `scene` are kept. The loss is the
/// mean squared RGB error over all pixels of the (optionally bootstrap
/// resampled) training views.
pub fn fit_member(
    scene: &Scene,
    cameras: &[Camera],
    targets: &[RenderBuffer],
    seed: u64,
    config: &EnsembleConfig,
) -> Result<Scene> {
    fit_member_traced(scene, cameras, targets, seed, config).map(|(s, _)| s)
}

pub fn fit_member_traced(
    scene: &Scene,
    cameras: &[Camera],
    targets: &[RenderBuffer],
    seed: u64,
    config: &EnsembleConfig,
) -> Result<(Scene, FitTrace)> {
    check_targets(cameras, targets)?;
    scene.validate()?;
    let mut member = scene.clone();
    randomize_colors(&mut member, seed);
    if config.fit_iterations == 0 {
        return Ok((member, FitTrace { loss_curve: vec![] }));
    }

    let mut multiplicity = vec![1.0; cameras.len()];
    if config.bootstrap {
        // Separate stream from the color initialization.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB007_5747);
        multiplicity.fill(0.0);
        for _ in 0..cameras.len() {
            multiplicity[rng.random_range(0..cameras.len())] += 1.0;
        }
    }

    let views: Vec<ViewProblem> = cameras
        .iter()
        .zip(targets)
        .zip(&multiplicity)
        .filter(|(_, &m)| m > 0.0)
        .map(|((cam, target), &m)| ViewProblem::new(&member, cam, target, m))
        .collect::<Result<_>>()?;
    let denom: f64 = views
        .iter()
        .map(|v| v.multiplicity * 3.0 * v.target.len() as f64)
        .sum();

    let mut params: Vec<f64> = member
        .gaussians
        .iter()
        .flat_map(|g| g.color_sh.iter().flat_map(|c| c.values().to_vec()))
        .collect();
    let mut adam = Adam::new(params.len(), config.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let background = member.background;
    let mut loss_curve = Vec::with_capacity(config.fit_iterations);

    for _ in 0..config.fit_iterations {
        let per_view: Vec<(f64, Vec<f64>)> = views
            .par_iter()
            .map(|v| {
                let mut local = vec![0.0; v.gaussians.len() * PER_GAUSSIAN];
                let loss = v.accumulate(&params, background, &mut local);
                (loss, local)
            })
            .collect();
        grad.fill(0.0);
        let mut loss = 0.0;
        for (v, (l, local)) in views.iter().zip(&per_view) {
            loss += l;
            for (i, &g) in v.gaussians.iter().enumerate() {
                let dst = &mut grad[g * PER_GAUSSIAN..(g + 1) * PER_GAUSSIAN];
                for (d, s) in dst.iter_mut().zip(&local[i * PER_GAUSSIAN..(i + 1) * PER_GAUSSIAN]) {
                    *d += s / denom;
                }
            }
        }
        loss_curve.push(loss / denom);
        adam.step(&mut params, &grad);
    }

    for (g, p) in member.gaussians.iter_mut().zip(params.chunks(PER_GAUSSIAN)) {
        for (ch, coeffs) in g.color_sh.iter_mut().zip(p.chunks(NC)) {
            *ch = ShCoeffs::new(COLOR_DEGREE, coeffs.to_vec())?;
        }
    }
    Ok((member, FitTrace { loss_curve }))
}

/// Fitted members with their individual fit times.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub members: Vec<Scene>,
    pub member_wall_time_s: Vec<f64>,
    pub total_wall_time_s: f64,
}

/// Fits `config.members` members one after another.
pub fn run_ensemble(
    scene: &Scene,
    cameras: &[Camera],
    targets: &[RenderBuffer],
    config: &EnsembleConfig,
) -> Result<EnsembleRun> {
    config.validate()?;
    let started = Instant::now();
    let mut members = Vec::with_capacity(config.members);
    let mut times = Vec::with_capacity(config.members);
    for m in 0..config.members {
        let t = Instant::now();
        members.push(fit_member(scene, cameras, targets, config.member_seed(m), config)?);
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(EnsembleRun {
        members,
        member_wall_time_s: times,
        total_wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Per-pixel population standard deviation across rows of `samples`.
pub fn population_std(samples: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let len = samples.first().map_or(0, Vec::len);
    (0..len)
        .map(|p| {
            let mean = samples.iter().map(|s| s[p]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[p] - mean).powi(2)).sum::<f64>() / n;
            var.sqrt()
        })
        .collect()
}

/// Divides by the maximum; an all-zero map stays zero.
pub fn normalize_by_max(values: &mut [f64]) {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in values {
            *v /= max;
        }
    }
}

/// Max-normalized per-pixel std of rendered luminance across members.
pub fn ensemble_uncertainty(members: &[Scene], cam: &Camera) -> Result<Vec<f64>> {
    if members.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ensemble uncertainty needs at least 2 members, got {}",
            members.len()
        )));
    }
    if let Some(i) = members.iter().position(|m| !m.same_geometry(&members[0])) {
        return Err(Error::GeometryMismatch(format!(
            "member {i} differs from member 0"
        )));
    }
    let lums = members
        .iter()
        .map(|m| render(m, cam).map(|b| b.luminance()))
        .collect::<Result<Vec<_>>>()?;
    let mut std = population_std(&lums);
    normalize_by_max(&mut std);
    Ok(std)
}

/// On-disk description of a fitted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub members: Vec<String>,
    pub seed: u64,
    pub config: EnsembleConfig,
    pub member_wall_time_s: Vec<f64>,
    pub total_wall_time_s: f64,
}
