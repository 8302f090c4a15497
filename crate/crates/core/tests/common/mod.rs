//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splat_uncert::scene::{Camera, Gaussian, Scene};
use splat_uncert::sh::ShCoeffs;
use splat_uncert::synth::look_at;

/// Straightforward per-pixel evaluation of the blending sum over every
/// gaussian, without culling or per-row candidate lists.
pub struct Reference {
    pub color: Vec<[f64; 3]>,
    pub uncert: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Sum of blend weights plus final transmittance, per pixel.
    pub conservation: Vec<f64>,
}

struct Projected {
    id: usize,
    depth: f64,
    mean: Vector2<f64>,
    conic: Matrix2<f64>,
    opacity: f64,
    color: [f64; 3],
    uncert: f64,
}

fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(1e-15, 1.0 - 1e-15)
}

pub fn reference_render(scene: &Scene, cam: &Camera) -> Reference {
    let center = -cam.rotation.transpose() * cam.translation;
    let mut splats: Vec<Projected> = Vec::new();
    for (id, g) in scene.gaussians.iter().enumerate() {
        let t = cam.rotation * g.position + cam.translation;
        if t.z <= 0.01 {
            continue;
        }
        let r = UnitQuaternion::from_quaternion(g.rotation).to_rotation_matrix().into_inner();
        let s = Matrix3::from_diagonal(&g.scale);
        let sigma = r * s * s * r.transpose();
        let j = nalgebra::Matrix2x3::new(
            cam.fx / t.z,
            0.0,
            -cam.fx * t.x / (t.z * t.z),
            0.0,
            cam.fy / t.z,
            -cam.fy * t.y / (t.z * t.z),
        );
        let cov = j * cam.rotation * sigma * cam.rotation.transpose() * j.transpose()
            + Matrix2::identity() * 0.3;
        let dir = (center - g.position).normalize();
        let raw: Vec<f64> = g.color_sh.iter().map(|c| c.eval_unit(&dir)).collect();
        splats.push(Projected {
            id,
            depth: t.z,
            mean: Vector2::new(cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy),
            conic: cov.try_inverse().unwrap(),
            opacity: g.opacity,
            color: [0, 1, 2].map(|c| (raw[c] + 0.5).max(0.0)),
            uncert: sigmoid(g.uncert_sh.eval_unit(&dir)),
        });
    }
    splats.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap().then(a.id.cmp(&b.id)));

    let n = (cam.width * cam.height) as usize;
    let mut out = Reference {
        color: Vec::with_capacity(n),
        uncert: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        conservation: Vec::with_capacity(n),
    };
    for y in 0..cam.height {
        for x in 0..cam.width {
            let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let (mut c, mut u, mut t, mut wsum) = ([0.0; 3], 0.0, 1.0, 0.0);
            for s in &splats {
                let d = p - s.mean;
                let k = (s.opacity * (-0.5 * d.dot(&(s.conic * d))).exp()).min(0.99);
                if k < 1.0 / 255.0 {
                    continue;
                }
                let w = t * k;
                for ch in 0..3 {
                    c[ch] += w * s.color[ch];
                }
                u += w * s.uncert;
                wsum += w;
                t *= 1.0 - k;
                if t < 1e-4 {
                    break;
                }
            }
            for ch in 0..3 {
                c[ch] = (c[ch] + scene.background[ch] * t).clamp(0.0, 1.0);
            }
            out.color.push(c);
            out.uncert.push(u);
            out.alpha.push(1.0 - t);
            out.conservation.push(wsum + t);
        }
    }
    out
}

fn random_sh(rng: &mut ChaCha8Rng, degree: usize, scale: f64) -> ShCoeffs {
    let n = (degree + 1) * (degree + 1);
    ShCoeffs::new(degree, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Quaternion<f64> {
    let q = Quaternion::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    if q.norm() < 1e-3 {
        Quaternion::identity()
    } else {
        q.normalize()
    }
}

/// Up to five random gaussians near the origin and an 8x8 camera looking at them.
pub fn random_small_scene(seed: u64) -> (Scene, Camera) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    let gaussians = (0..n)
        .map(|_| Gaussian {
            position: Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
            rotation: random_rotation(&mut rng),
            scale: Vector3::from_fn(|_, _| rng.random_range(0.05..0.4)),
            opacity: rng.random_range(0.05..1.0),
            color_sh: [0, 1, 2].map(|_| random_sh(&mut rng, 3, 0.6)),
            uncert_sh: random_sh(&mut rng, 2, 2.0),
        })
        .collect();
    let mut scene = Scene::new(gaussians);
    scene.background = [rng.random(), rng.random(), rng.random()];
    let eye = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(2.0..3.5);
    let cam = look_at(eye, Vector3::zeros(), 8, 8, rng.random_range(30.0..70.0));
    (scene, cam)
}
