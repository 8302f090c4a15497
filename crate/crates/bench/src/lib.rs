//! Shared fixtures for the benchmarks.

use splat_uncert::scene::{Camera, Scene};
use splat_uncert::synth::{make_orbit_with, make_scene, OrbitSpec, SceneKind};

/// Poster scene with `n` gaussians and a 16-camera orbit at `size` pixels.
pub fn poster_fixture(n: usize, size: u32) -> (Scene, Vec<Camera>) {
    let scene = make_scene(SceneKind::Poster, n, 0).expect("valid scene");
    let cams = make_orbit_with(&OrbitSpec {
        n_cams: 16,
        width: size,
        height: size,
        ..OrbitSpec::default()
    })
    .expect("valid orbit");
    (scene, cams)
}
