use nalgebra::{Quaternion, Vector3};
use proptest::prelude::*;
use splat_uncert::scene::{load_scene, parse_scene, save_scene, scene_to_ply_bytes, Gaussian, Scene};
use splat_uncert::sh::{num_coeffs, ShCoeffs};

fn sh(degree: usize) -> impl Strategy<Value = ShCoeffs> {
    prop::collection::vec(-2.0..2.0f64, num_coeffs(degree)).prop_map(move |v| ShCoeffs::new(degree, v).unwrap())
}

fn gaussian(udeg: usize) -> impl Strategy<Value = Gaussian> {
    (
        prop::array::uniform3(-5.0..5.0f64),
        prop::array::uniform4(0.1..1.0f64),
        prop::array::uniform3(0.001..2.0f64),
        0.01..0.99f64,
        [sh(3), sh(3), sh(3)],
        sh(udeg),
    )
        .prop_map(|(p, q, s, opacity, color_sh, uncert_sh)| Gaussian {
            position: Vector3::from(p),
            rotation: Quaternion::new(q[0], q[1], q[2], q[3]).normalize(),
            scale: Vector3::from(s),
            opacity,
            color_sh,
            uncert_sh,
        })
}

fn scene() -> impl Strategy<Value = Scene> {
    (0..=3usize)
        .prop_flat_map(|d| prop::collection::vec(gaussian(d), 1..12))
        .prop_map(Scene::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bytes_are_a_fixed_point(scene in scene()) {
        let once = scene_to_ply_bytes(&scene).unwrap();
        let back = parse_scene(&once).unwrap();
        prop_assert_eq!(back.len(), scene.len());
        prop_assert_eq!(back.uncert_degree(), scene.uncert_degree());
        prop_assert_eq!(scene_to_ply_bytes(&back).unwrap(), once);
        for (a, b) in scene.gaussians.iter().zip(&back.gaussians) {
            prop_assert!((a.position - b.position).norm() < 1e-5);
            prop_assert!((a.opacity - b.opacity).abs() < 1e-5);
            prop_assert!((a.scale - b.scale).norm() < 1e-5);
            for (x, y) in a.uncert_sh.values().iter().zip(b.uncert_sh.values()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ply");
    let mut scene = Scene::new(vec![Gaussian::isotropic(Vector3::new(1.0, 2.0, 3.0), 0.2, 0.7, [0.1, 0.5, 0.9])]);
    scene.background = [0.25, 0.5, 1.0];
    save_scene(&scene, &path).unwrap();
    let back = load_scene(&path).unwrap();
    assert_eq!(back.background, scene.background);
    assert!(load_scene(dir.path().join("missing.ply")).is_err());
}
