use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use splat_uncert::ensemble::{ensemble_uncertainty, fit_member_traced, run_ensemble, EnsembleConfig, EnsembleManifest};
use splat_uncert::experiment::{random_maps, render_all, sh_maps};
use splat_uncert::imageio::{save_pgm, save_ppm};
use splat_uncert::render::render as render_view;
use splat_uncert::scene::{load_cameras, load_scene, save_cameras, save_scene};
use splat_uncert::sparsify::{curves_svg, error_map, evaluate_errors, write_curves_csv, EvalReport};
use splat_uncert::synth::{make_orbit_with, make_scene, split_consecutive_holdout, OrbitSpec};
use splat_uncert::train::{train, TrainConfig, TrainReport};

use crate::files::{create_dir, image_name, load_gt, load_members, write_json};
use crate::{EnsembleArgs, EvalArgs, FitColorArgs, ModeArg, RenderArgs, SynthArgs, TrainArgs, UncertSource};

pub enum Failure {
    /// Flags that parse but cannot work together.
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

pub fn synth(a: &SynthArgs) -> Outcome {
    if a.holdout >= a.cams {
        return Err(Failure::Usage(format!(
            "--holdout ({}) must be smaller than --cams ({})",
            a.holdout, a.cams
        )));
    }
    let scene = make_scene(a.kind.into(), a.n as usize, a.seed)?;
    let cams = make_orbit_with(&OrbitSpec {
        n_cams: a.cams as usize,
        radius: a.radius,
        elevation_deg: a.elevation,
        arc_deg: a.arc,
        width: a.size,
        height: a.size,
        ..OrbitSpec::default()
    })?;
    let (train_cams, eval_cams) = split_consecutive_holdout(&cams, a.holdout as usize, a.seed)?;

    create_dir(&a.out_dir)?;
    save_scene(&scene, a.out_dir.join("scene.ply"))?;
    save_cameras(&train_cams, a.out_dir.join("cameras_train.json"))?;
    save_cameras(&eval_cams, a.out_dir.join("cameras_eval.json"))?;
    for (name, set) in [("train", &train_cams), ("eval", &eval_cams)] {
        let dir = a.out_dir.join("gt").join(name);
        create_dir(&dir)?;
        for (i, buf) in render_all(&scene, set)?.iter().enumerate() {
            save_ppm(buf, dir.join(image_name(i, "ppm")))?;
        }
    }
    write_json(&a.out_dir.join("synth.json"), a)?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    config: &'a FitColorArgs,
    iterations: usize,
    final_loss: Option<f64>,
    loss_curve: Vec<f64>,
    wall_time_s: f64,
}

pub fn fit_color(a: &FitColorArgs) -> Outcome {
    let scene = load_scene(&a.scene)?;
    let cams = load_cameras(&a.cameras)?;
    let gt = load_gt(&a.gt_dir, &cams)?;
    let cfg = EnsembleConfig {
        fit_iterations: a.iters,
        learning_rate: a.lr,
        bootstrap: false,
        ..EnsembleConfig::default()
    };
    let started = Instant::now();
    let (fit, trace) = fit_member_traced(&scene, &cams, &gt, a.seed, &cfg)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    create_dir(&a.out)?;
    save_scene(&fit, a.out.join("scene.ply"))?;
    write_json(
        &a.out.join("report.json"),
        &FitReport {
            config: a,
            iterations: a.iters,
            final_loss: trace.loss_curve.last().copied(),
            loss_curve: trace.loss_curve,
            wall_time_s,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a TrainArgs,
    #[serde(flatten)]
    report: TrainReport,
}

pub fn train_uncert(a: &TrainArgs) -> Outcome {
    let mut scene = load_scene(&a.scene)?;
    let cams = load_cameras(&a.cameras)?;
    let cfg = TrainConfig {
        lambda: a.lambda,
        threshold_t: a.threshold,
        variant: a.variant.into(),
        mean_samples: a.mean_samples as usize,
        iterations: a.iters as usize,
        learning_rate: a.lr,
        seed: a.seed,
    };
    let report = train(&mut scene, &cams, &cfg)?;
    create_dir(&a.out)?;
    save_scene(&scene, a.out.join("scene.ply"))?;
    write_json(&a.out.join("report.json"), &TrainOutput { config: a, report })?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestOutput<'a> {
    #[serde(flatten)]
    manifest: EnsembleManifest,
    command: &'a EnsembleArgs,
}

pub fn ensemble(a: &EnsembleArgs) -> Outcome {
    let scene = load_scene(&a.scene)?;
    let cams = load_cameras(&a.cameras)?;
    let gt = load_gt(&a.gt_dir, &cams)?;
    let cfg = EnsembleConfig {
        members: a.members as usize,
        seed: a.seed,
        fit_iterations: a.iters,
        learning_rate: a.lr,
        bootstrap: !a.no_bootstrap,
    };
    let run = run_ensemble(&scene, &cams, &gt, &cfg)?;
    create_dir(&a.out_dir)?;
    let mut names = Vec::with_capacity(run.members.len());
    for (i, m) in run.members.iter().enumerate() {
        let name = format!("member_{i:02}.ply");
        save_scene(m, a.out_dir.join(&name))?;
        names.push(name);
    }
    let manifest = EnsembleManifest {
        members: names,
        seed: a.seed,
        config: cfg,
        member_wall_time_s: run.member_wall_time_s,
        total_wall_time_s: run.total_wall_time_s,
    };
    write_json(
        &a.out_dir.join("manifest.json"),
        &ManifestOutput { manifest, command: a },
    )?;
    Ok(())
}

pub fn render(a: &RenderArgs) -> Outcome {
    let scene = load_scene(&a.scene)?;
    let cams = load_cameras(&a.cameras)?;
    create_dir(&a.out_dir)?;
    for (i, cam) in cams.iter().enumerate() {
        let buf = render_view(&scene, cam)?;
        match a.mode {
            ModeArg::Color => save_ppm(&buf, a.out_dir.join(image_name(i, "ppm")))?,
            ModeArg::Uncert => save_pgm(&buf.uncert, buf.width, buf.height, a.out_dir.join(image_name(i, "pgm")))?,
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a EvalArgs,
    #[serde(flatten)]
    report: EvalReport,
}

fn write_curves(path: &Path, report: &EvalReport) -> Outcome {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_curves_csv(
            path,
            &report.fractions,
            &report.mean_curve_uncertainty,
            &report.mean_curve_oracle,
        )?,
        Some("svg") => std::fs::write(
            path,
            curves_svg(&report.fractions, &report.mean_curve_uncertainty, &report.mean_curve_oracle),
        )
        .with_context(|| format!("writing {}", path.display()))?,
        _ => {
            return Err(Failure::Usage(format!(
                "--curves {} must end in .csv or .svg",
                path.display()
            )))
        }
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Outcome {
    for c in &a.curves {
        if !matches!(c.extension().and_then(|e| e.to_str()), Some("csv" | "svg")) {
            return Err(Failure::Usage(format!("--curves {} must end in .csv or .svg", c.display())));
        }
    }
    let scene = load_scene(&a.scene)?;
    let cams = load_cameras(&a.cameras_eval)?;
    let gt = load_gt(&a.gt_dir, &cams)?;
    let errors = cams
        .iter()
        .zip(&gt)
        .map(|(c, g)| Ok(error_map(&render_view(&scene, c)?, g)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let maps = if a.self_oracle {
        errors.clone()
    } else {
        match &a.uncert {
            UncertSource::Sh => sh_maps(&scene, &cams)?,
            UncertSource::Random(seed) => random_maps(&cams, *seed),
            UncertSource::Ensemble(manifest) => {
                let members = load_members(manifest)?;
                cams.iter()
                    .map(|c| ensemble_uncertainty(&members, c))
                    .collect::<Result<Vec<_>, _>>()?
            }
        }
    };
    let report = evaluate_errors(&errors, &maps)?;
    if report.degenerate {
        eprintln!("warning: some error maps are all zero; their AUSE is defined as 0");
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    for c in &a.curves {
        write_curves(c, &report)?;
    }
    println!("mean AUSE {:.6} over {} views", report.mean_ause, report.views.len());
    write_json(&a.out, &EvalOutput { config: a, report })?;
    Ok(())
}
