//! Kept in its own binary so no other test competes for the CPU.

use std::time::Instant;

use splat_uncert::ensemble::{fit_member, run_ensemble, EnsembleConfig};
use splat_uncert::render::render;
use splat_uncert::synth::{make_orbit_with, make_scene, OrbitSpec, SceneKind};

#[test]
fn ensemble_time_scales_with_member_count() {
    let scene = make_scene(SceneKind::Cluster, 300, 3).unwrap();
    let cams = make_orbit_with(&OrbitSpec {
        n_cams: 8,
        width: 48,
        height: 48,
        ..OrbitSpec::default()
    })
    .unwrap();
    let targets: Vec<_> = cams.iter().map(|c| render(&scene, c).unwrap()).collect();
    let cfg = EnsembleConfig {
        members: 4,
        fit_iterations: 60,
        ..EnsembleConfig::default()
    };
    // Warm up, then take the median of three single fits.
    fit_member(&scene, &cams, &targets, 0, &cfg).unwrap();
    let mut singles: Vec<f64> = (0..3)
        .map(|s| {
            let t = Instant::now();
            fit_member(&scene, &cams, &targets, s, &cfg).unwrap();
            t.elapsed().as_secs_f64()
        })
        .collect();
    singles.sort_by(f64::total_cmp);
    let run = run_ensemble(&scene, &cams, &targets, &cfg).unwrap();
    assert_eq!(run.member_wall_time_s.len(), 4);
    let ratio = run.total_wall_time_s / (4.0 * singles[1]);
    assert!((ratio - 1.0).abs() < 0.25, "ratio {ratio}");
}
