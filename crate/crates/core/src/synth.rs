//! Deterministic synthetic scenes and orbit camera rigs.
//!
//! The "poster" scene is a flat card leaning against a box. Two triangular
//! panels close the wedge under the card, so the card's back is hidden from
//! every camera above the ground.
//! An orbit with a contiguous held-out arc then leaves one side of the
//! object under-observed.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scene::{rgb_to_dc, Camera, Gaussian, Scene, COLOR_DEGREE, DEFAULT_UNCERT_DEGREE};
use crate::sh::ShCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Box,
    Poster,
    Cluster,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Self::Box),
            "poster" => Ok(Self::Poster),
            "cluster" => Ok(Self::Cluster),
            other => Err(Error::InvalidArgument(format!("unknown scene kind {other:?}"))),
        }
    }
}

/// Box occupying `[-BOX_HALF.x, BOX_HALF.x] x [-BOX_HALF.y, BOX_HALF.y] x [0, BOX_HEIGHT]`.
pub const BOX_HALF: [f64; 2] = [0.3, 0.4];
pub const BOX_HEIGHT: f64 = 0.5;

/// The leaning card: bottom edge on the ground, top edge resting on the +x
/// face of the box.
#[derive(Debug, Clone, Copy)]
pub struct Card {
    pub bottom_x: f64,
    pub top_x: f64,
    pub top_z: f64,
    pub half_width: f64,
}

pub const CARD: Card = Card {
    bottom_x: 0.65,
    top_x: BOX_HALF[0],
    top_z: 0.45,
    half_width: 0.35,
};

impl Card {
    /// Point at slope parameter `s` in [0, 1] (bottom to top) and lateral `y`.
    pub fn point(&self, s: f64, y: f64) -> Vector3<f64> {
        Vector3::new(
            self.bottom_x + s * (self.top_x - self.bottom_x),
            y,
            s * self.top_z,
        )
    }

    /// Unit normal of the printed side, pointing away from the box and up.
    pub fn front_normal(&self) -> Vector3<f64> {
        Vector3::new(self.top_z, 0.0, self.bottom_x - self.top_x).normalize()
    }

    pub fn slope_dir(&self) -> Vector3<f64> {
        (self.point(1.0, 0.0) - self.point(0.0, 0.0)).normalize()
    }

    pub fn slope_length(&self) -> f64 {
        (self.point(1.0, 0.0) - self.point(0.0, 0.0)).norm()
    }
}

struct Face {
    origin: Vector3<f64>,
    /// Orthogonal edge vectors spanning the face from `origin`.
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    /// Only the half with `a + b <= 1` in edge coordinates.
    triangle: bool,
    base_color: [f64; 3],
}

impl Face {
    fn rect(center: Vector3<f64>, half: [f64; 2], t1: Vector3<f64>, t2: Vector3<f64>, base_color: [f64; 3]) -> Self {
        Self {
            origin: center - half[0] * t1 - half[1] * t2,
            e1: 2.0 * half[0] * t1,
            e2: 2.0 * half[1] * t2,
            triangle: false,
            base_color,
        }
    }

    fn area(&self) -> f64 {
        let a = self.e1.cross(&self.e2).norm();
        if self.triangle {
            a / 2.0
        } else {
            a
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
        if self.triangle && a + b > 1.0 {
            (a, b) = (1.0 - a, 1.0 - b);
        }
        self.origin + a * self.e1 + b * self.e2
    }
}

fn box_faces() -> Vec<Face> {
    let [hx, hy] = BOX_HALF;
    let h = BOX_HEIGHT;
    let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
    vec![
        Face::rect(Vector3::new(0.0, 0.0, h), [hx, hy], x, y, [0.85, 0.8, 0.7]),
        Face::rect(Vector3::new(hx, 0.0, h / 2.0), [hy, h / 2.0], y, z, [0.7, 0.3, 0.2]),
        Face::rect(Vector3::new(-hx, 0.0, h / 2.0), [hy, h / 2.0], y, z, [0.2, 0.6, 0.3]),
        Face::rect(Vector3::new(0.0, hy, h / 2.0), [hx, h / 2.0], x, z, [0.2, 0.3, 0.75]),
        Face::rect(Vector3::new(0.0, -hy, h / 2.0), [hx, h / 2.0], x, z, [0.8, 0.7, 0.2]),
    ]
}

fn card_face() -> Face {
    Face::rect(
        CARD.point(0.5, 0.0),
        [CARD.half_width, CARD.slope_length() / 2.0],
        Vector3::y(),
        CARD.slope_dir(),
        [0.9, 0.9, 0.9],
    )
}

/// Triangles closing the wedge between card, box and ground at `y = +-half_width`.
fn wedge_sides() -> Vec<Face> {
    [-CARD.half_width, CARD.half_width]
        .into_iter()
        .map(|y| Face {
            origin: Vector3::new(CARD.top_x, y, 0.0),
            e1: Vector3::new(CARD.bottom_x - CARD.top_x, 0.0, 0.0),
            e2: Vector3::new(0.0, 0.0, CARD.top_z),
            triangle: true,
            base_color: [0.35, 0.3, 0.3],
        })
        .collect()
}

/// Random view-dependent color around `base`: jittered dc plus a small band-1 term.
fn random_color(rng: &mut ChaCha8Rng, base: [f64; 3], jitter: f64) -> [ShCoeffs; 3] {
    let band1 = Normal::new(0.0, 0.15).expect("valid sigma");
    base.map(|b| {
        let mut c = ShCoeffs::zeros(COLOR_DEGREE).expect("valid degree");
        let v = c.values_mut();
        let target = (b + rng.random_range(-jitter..=jitter)).clamp(0.02, 0.98);
        v[0] = rgb_to_dc(target);
        for x in &mut v[1..4] {
            *x = band1.sample(rng);
        }
        c
    })
}

fn flat_gaussian(
    rng: &mut ChaCha8Rng,
    position: Vector3<f64>,
    face: &Face,
    tangent_scale: f64,
    jitter: f64,
) -> Gaussian {
    // Third axis from the cross product keeps det = +1 on every face.
    let (t1, t2) = (face.e1.normalize(), face.e2.normalize());
    let basis = Matrix3::from_columns(&[t1, t2, t1.cross(&t2)]);
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(basis));
    let s1 = tangent_scale * rng.random_range(0.8..1.2);
    let s2 = tangent_scale * rng.random_range(0.8..1.2);
    Gaussian {
        position,
        rotation: *rot.quaternion(),
        scale: Vector3::new(s1, s2, tangent_scale * 0.1),
        opacity: rng.random_range(0.85..0.97),
        color_sh: random_color(rng, face.base_color, jitter),
        uncert_sh: ShCoeffs::zeros(DEFAULT_UNCERT_DEGREE).expect("valid degree"),
    }
}

fn sample_faces(rng: &mut ChaCha8Rng, faces: &[Face], n: usize, jitter: f64) -> Vec<Gaussian> {
    if n == 0 {
        return Vec::new();
    }
    let total: f64 = faces.iter().map(Face::area).sum();
    let tangent_scale = 0.6 * (total / n as f64).sqrt();
    (0..n)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let face = faces
                .iter()
                .find(|f| {
                    pick -= f.area();
                    pick < 0.0
                })
                .unwrap_or(&faces[faces.len() - 1]);
            let mut p = face.sample(rng);
            p.z = p.z.max(0.0);
            flat_gaussian(rng, p, face, tangent_scale, jitter)
        })
        .collect()
}

fn cluster(rng: &mut ChaCha8Rng, n: usize) -> Vec<Gaussian> {
    if n == 1 {
        let mut g = Gaussian::isotropic(Vector3::zeros(), 0.1, 0.9, [0.6, 0.4, 0.3]);
        g.color_sh = random_color(rng, [0.6, 0.4, 0.3], 0.0);
        return vec![g];
    }
    let radius = 0.4;
    (0..n)
        .map(|_| {
            // Uniform in a ball by rejection.
            let p = loop {
                let p = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
                if p.norm_squared() <= 1.0 {
                    break p * radius;
                }
            };
            let s = rng.random_range(0.03..0.08);
            let rot = UnitQuaternion::from_euler_angles(
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
            );
            let base = [rng.random(), rng.random(), rng.random()];
            Gaussian {
                position: p,
                rotation: *rot.quaternion(),
                scale: Vector3::new(s, s * rng.random_range(0.5..1.0), s * rng.random_range(0.5..1.0)),
                opacity: rng.random_range(0.5..0.95),
                color_sh: random_color(rng, base, 0.0),
                uncert_sh: ShCoeffs::zeros(DEFAULT_UNCERT_DEGREE).expect("valid degree"),
            }
        })
        .collect()
}

/// Builds a deterministic scene of `n` gaussians with zeroed uncertainty.
pub fn make_scene(kind: SceneKind, n: usize, seed: u64) -> Result<Scene> {
    if n == 0 {
        return Err(Error::InvalidArgument("scene needs at least one gaussian".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussians = match kind {
        SceneKind::Cluster => cluster(&mut rng, n),
        SceneKind::Box => sample_faces(&mut rng, &box_faces(), n, 0.08),
        SceneKind::Poster => {
            let n_card = (n * 35) / 100;
            let n_sides = n / 10;
            let mut g = sample_faces(&mut rng, &box_faces(), n - n_card - n_sides, 0.08);
            g.extend(sample_faces(&mut rng, &[card_face()], n_card, 0.6));
            g.extend(sample_faces(&mut rng, &wedge_sides(), n_sides, 0.08));
            g
        }
    };
    Ok(Scene::new(gaussians))
}

/// Orbit rig parameters. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub n_cams: usize,
    pub radius: f64,
    pub elevation_deg: f64,
    pub arc_deg: f64,
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view.
    pub fov_deg: f64,
}

impl Default for OrbitSpec {
    fn default() -> Self {
        Self {
            n_cams: 64,
            radius: 3.0,
            elevation_deg: 30.0,
            arc_deg: 360.0,
            width: 128,
            height: 128,
            fov_deg: 40.0,
        }
    }
}

/// Pinhole camera at `eye` looking at `target` with world +z up.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, width: u32, height: u32, fov_deg: f64) -> Camera {
    let forward = (target - eye).normalize();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        // Looking straight down or up: any horizontal right vector works.
        right = forward.cross(&Vector3::y());
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let f = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
    Camera {
        width,
        height,
        fx: f,
        fy: f,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        rotation,
        translation: -(rotation * eye),
    }
}

/// Cameras evenly spaced along an arc at fixed elevation, looking at the
/// origin. Capture order is arc order; azimuth step is `arc / n`.
pub fn make_orbit_with(spec: &OrbitSpec) -> Result<Vec<Camera>> {
    if spec.n_cams == 0 {
        return Err(Error::InvalidArgument("orbit needs at least one camera".into()));
    }
    if spec.radius.is_nan() || spec.radius <= 0.0 {
        return Err(Error::InvalidArgument("orbit radius must be positive".into()));
    }
    let elev = spec.elevation_deg.to_radians();
    let step = spec.arc_deg / spec.n_cams as f64;
    Ok((0..spec.n_cams)
        .map(|i| {
            let az = (i as f64 * step).to_radians();
            let eye = spec.radius
                * Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin());
            look_at(eye, Vector3::zeros(), spec.width, spec.height, spec.fov_deg)
        })
        .collect())
}

pub fn make_orbit(n_cams: usize, radius: f64, elevation_deg: f64, arc_deg: f64) -> Result<Vec<Camera>> {
    make_orbit_with(&OrbitSpec {
        n_cams,
        radius,
        elevation_deg,
        arc_deg,
        ..OrbitSpec::default()
    })
}

/// Index sets of a consecutive holdout split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    /// Contiguous modulo the camera count.
    pub eval: Vec<usize>,
}

/// Holds out `holdout_count` consecutive cameras starting at a seeded random
/// index, wrapping around the end of the capture order.
pub fn holdout_indices(n: usize, holdout_count: usize, seed: u64) -> Result<HoldoutSplit> {
    if holdout_count >= n {
        return Err(Error::InvalidArgument(format!(
            "holdout {holdout_count} must be smaller than the camera count {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..n);
    let eval: Vec<usize> = (0..holdout_count).map(|k| (start + k) % n).collect();
    let train = (0..n).filter(|i| !eval.contains(i)).collect();
    Ok(HoldoutSplit { train, eval })
}

pub fn split_consecutive_holdout<T: Clone>(
    cameras: &[T],
    holdout_count: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let split = holdout_indices(cameras.len(), holdout_count, seed)?;
    Ok((
        split.train.iter().map(|&i| cameras[i].clone()).collect(),
        split.eval.iter().map(|&i| cameras[i].clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::scene_to_ply_bytes;

    #[test]
    fn same_seed_same_bytes() {
        for kind in [SceneKind::Box, SceneKind::Poster, SceneKind::Cluster] {
            let a = scene_to_ply_bytes(&make_scene(kind, 300, 7).unwrap()).unwrap();
            let b = scene_to_ply_bytes(&make_scene(kind, 300, 7).unwrap()).unwrap();
            let c = scene_to_ply_bytes(&make_scene(kind, 300, 8).unwrap()).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn single_cluster_gaussian_sits_at_origin() {
        let s = make_scene(SceneKind::Cluster, 1, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.gaussians[0].position, Vector3::zeros());
    }

    #[test]
    fn scenes_validate() {
        for kind in [SceneKind::Box, SceneKind::Poster, SceneKind::Cluster] {
            make_scene(kind, 500, 1).unwrap().validate().unwrap();
        }
        assert!(make_scene(SceneKind::Box, 0, 1).is_err());
        assert!("teapot".parse::<SceneKind>().is_err());
    }

    #[test]
    fn poster_stays_above_ground() {
        let s = make_scene(SceneKind::Poster, 2000, 11).unwrap();
        assert!(s.gaussians.iter().all(|g| g.position.z >= 0.0));
    }

    #[test]
    fn four_camera_orbit_is_symmetric() {
        let cams = make_orbit(4, 2.0, 0.0, 360.0).unwrap();
        let centers: Vec<_> = cams.iter().map(Camera::center).collect();
        assert!((centers[0] - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((centers[1] - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        assert!((centers[0] + centers[2]).norm() < 1e-12);
        assert!((centers[1] + centers[3]).norm() < 1e-12);
    }

    #[test]
    fn orbit_cameras_look_at_origin() {
        for elev in [-20.0, 0.0, 30.0, 89.0, 90.0] {
            for cam in make_orbit(7, 3.0, elev, 270.0).unwrap() {
                cam.validate().unwrap();
                let c = cam.center();
                // Distance from the origin to the optical axis line.
                let miss = c.cross(&cam.forward()).norm();
                assert!(miss < 1e-6, "elev {elev}: {miss}");
                let p = cam.to_camera(&Vector3::zeros());
                assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9 && p.z > 0.0);
            }
        }
    }

    #[test]
    fn polar_orbit_collapses_to_one_point() {
        let cams = make_orbit(5, 2.0, 90.0, 360.0).unwrap();
        for cam in &cams {
            assert!((cam.center() - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-9);
            assert!((cam.forward() + Vector3::z()).norm() < 1e-9);
        }
    }

    #[test]
    fn holdout_blocks_are_contiguous() {
        let split = holdout_indices(226, 50, 4).unwrap();
        assert_eq!(split.train.len(), 176);
        assert_eq!(split.eval.len(), 50);
        for w in split.eval.windows(2) {
            assert_eq!(w[1], (w[0] + 1) % 226);
        }
        let mut all: Vec<usize> = split.train.iter().chain(&split.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..226).collect::<Vec<_>>());
        assert!(split.train.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(split, holdout_indices(226, 50, 4).unwrap());
    }

    #[test]
    fn holdout_edge_cases() {
        let one = holdout_indices(10, 1, 0).unwrap();
        assert_eq!(one.eval.len(), 1);
        assert!(holdout_indices(10, 10, 0).is_err());
        let (train, eval) = split_consecutive_holdout(&[1, 2, 3, 4], 2, 9).unwrap();
        assert_eq!(train.len() + eval.len(), 4);
    }
}
