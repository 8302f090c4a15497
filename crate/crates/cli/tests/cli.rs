use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use splat_uncert::imageio::{save_ppm, to_byte};
use splat_uncert::render::render;
use splat_uncert::scene::{load_cameras, load_scene};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splat-uncert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small cluster scene with 8 cameras, 2 held out, 16x16 images.
fn synth(dir: &Path) {
    let out = run(&[
        "synth", "--kind", "cluster", "--n", "60", "--seed", "3", "--cams", "8", "--holdout", "2",
        "--size", "16", "--out-dir", p(dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_every_artifact_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a);
    synth(&b);
    for f in ["scene.ply", "cameras_train.json", "cameras_eval.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (mut ja, mut jb) = (json(&a.join("synth.json")), json(&b.join("synth.json")));
    ja.as_object_mut().unwrap().remove("out_dir");
    jb.as_object_mut().unwrap().remove("out_dir");
    assert_eq!(ja, jb);
    let train: Vec<_> = fs::read_dir(a.join("gt/train")).unwrap().collect();
    assert_eq!(train.len(), 6);
    assert_eq!(fs::read_dir(a.join("gt/eval")).unwrap().count(), 2);
    for sub in ["gt/train/0000.ppm", "gt/eval/0001.ppm"] {
        assert_eq!(fs::read(a.join(sub)).unwrap(), fs::read(b.join(sub)).unwrap());
    }
    assert_eq!(load_cameras(a.join("cameras_eval.json")).unwrap().len(), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let d = p(tmp.path());
    let out = run(&["synth", "--cams", "4", "--holdout", "4", "--out-dir", d]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("holdout"));

    let out = run(&["train-uncert", "--scene", "s.ply", "--cameras", "c.json", "--lambda", "0.5", "--out", d]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("lambda must be strictly between 0 and 0.5"));

    let out = run(&["ensemble", "--scene", "s", "--cameras", "c", "--gt-dir", "g", "--members", "1", "--out-dir", d]);
    assert_eq!(code(&out), 2);

    let out = run(&["render", "--scene", "s", "--cameras", "c", "--mode", "depth", "--out-dir", d]);
    assert_eq!(code(&out), 2);

    let out = run(&["eval", "--scene", "s", "--cameras-eval", "c", "--gt-dir", "g", "--uncert", "dropout", "--out", "r.json"]);
    assert_eq!(code(&out), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_splat-uncert"))
        .env("SPLAT_UNCERT_THREADS", "many")
        .args(["synth", "--out-dir", d])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "train-uncert", "--scene", p(&tmp.path().join("missing.ply")), "--cameras", "c.json", "--out", p(tmp.path()),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn render_matches_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let scene_path = d.join("scene.ply");
    let cams_path = d.join("cameras_eval.json");
    for mode in ["color", "uncert"] {
        let out = run(&["render", "--scene", p(&scene_path), "--cameras", p(&cams_path), "--mode", mode,
            "--out-dir", p(&d.join(mode))]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let scene = load_scene(&scene_path).unwrap();
    let cam = &load_cameras(&cams_path).unwrap()[0];
    let buf = render(&scene, cam).unwrap();
    let lib = d.join("lib.ppm");
    save_ppm(&buf, &lib).unwrap();
    assert_eq!(fs::read(d.join("color/0000.ppm")).unwrap(), fs::read(&lib).unwrap());

    // Untrained uncertainty is 0.5, so the raster is half the coverage.
    let pgm = fs::read(d.join("uncert/0000.pgm")).unwrap();
    let pixels = &pgm[pgm.len() - buf.len()..];
    for (px, a) in pixels.iter().zip(&buf.alpha) {
        assert_eq!(*px, to_byte(0.5 * a));
    }
    assert!(pixels.iter().any(|&v| v > 0));
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let train_cams = d.join("cameras_train.json");
    let eval_cams = d.join("cameras_eval.json");

    let recon = d.join("recon");
    let out = run(&["fit-color", "--scene", p(&d.join("scene.ply")), "--cameras", p(&train_cams),
        "--gt-dir", p(&d.join("gt/train")), "--iters", "50", "--seed", "1", "--out", p(&recon)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&recon.join("report.json"))["loss_curve"].as_array().unwrap().len(), 50);

    let trained = d.join("trained");
    let out = run(&["train-uncert", "--scene", p(&recon.join("scene.ply")), "--cameras", p(&train_cams),
        "--iters", "200", "--variant", "sampled-mean", "--out", p(&trained)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&trained.join("report.json"));
    for key in ["iterations", "final_loss", "loss_curve", "wall_time_s", "records", "config"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert_eq!(report["config"]["lambda"], 0.2);

    let ens = d.join("ens");
    let out = run(&["ensemble", "--scene", p(&recon.join("scene.ply")), "--cameras", p(&train_cams),
        "--gt-dir", p(&d.join("gt/train")), "--members", "2", "--iters", "20", "--out-dir", p(&ens)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = json(&ens.join("manifest.json"));
    assert_eq!(manifest["members"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["member_wall_time_s"].as_array().unwrap().len(), 2);

    let scene_path = trained.join("scene.ply");
    let gt_path = d.join("gt/eval");
    let (scene, gt) = (p(&scene_path), p(&gt_path));
    let manifest_arg = format!("ensemble:{}", p(&ens.join("manifest.json")));
    for (name, uncert) in [("sh", "sh"), ("ens", manifest_arg.as_str()), ("rand", "random:5")] {
        let report = d.join(format!("{name}.json"));
        let csv = d.join(format!("{name}.csv"));
        let svg = d.join(format!("{name}.svg"));
        let out = run(&["eval", "--scene", scene, "--cameras-eval", p(&eval_cams), "--gt-dir", gt,
            "--uncert", uncert, "--out", p(&report), "--curves", p(&csv), "--curves", p(&svg)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().next(), Some("fraction,mae_uncertainty,mae_oracle"));
        assert_eq!(text.lines().count(), 101);
        assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));
        let r = json(&report);
        assert!(r["mean_ause"].is_f64());
        assert_eq!(r["views"].as_array().unwrap().len(), 2);
        assert!(r["config"]["gt_dir"].is_string());
    }

    let oracle = d.join("oracle.json");
    let out = run(&["eval", "--scene", scene, "--cameras-eval", p(&eval_cams), "--gt-dir", gt,
        "--self-oracle", "--out", p(&oracle)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&oracle)["mean_ause"], 0.0);

    let out = run(&["eval", "--scene", scene, "--cameras-eval", p(&eval_cams), "--gt-dir", gt,
        "--out", p(&oracle), "--curves", p(&d.join("c.png"))]);
    assert_eq!(code(&out), 2);
}
