//! `splat-uncert`: synthetic scenes, uncertainty training, ensemble baseline,
//! rendering and sparsification evaluation.
//!
//! Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use splat_uncert::synth::SceneKind;
use splat_uncert::train::LossVariant;

const THREADS_VAR: &str = "SPLAT_UNCERT_THREADS";

#[derive(Parser)]
#[command(name = "splat-uncert", version, about = "View-dependent uncertainty for Gaussian splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene, an orbit camera rig split into train/eval, and ground-truth renders
    Synth(SynthArgs),
    /// Refit color on training views from a random start (the reconstruction to evaluate)
    FitColor(FitColorArgs),
    /// Train per-gaussian SH uncertainty from training cameras
    TrainUncert(TrainArgs),
    /// Fit the ensemble baseline
    Ensemble(EnsembleArgs),
    /// Render color (PPM) or uncertainty (PGM) images
    Render(RenderArgs),
    /// Sparsification curves and AUSE on evaluation views
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Box,
    Poster,
    Cluster,
}

impl From<KindArg> for SceneKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Box => SceneKind::Box,
            KindArg::Poster => SceneKind::Poster,
            KindArg::Cluster => SceneKind::Cluster,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "poster")]
    pub kind: KindArg,
    /// Number of gaussians
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(2..))]
    pub cams: u64,
    #[arg(long, default_value_t = 3.0, value_parser = positive)]
    pub radius: f64,
    /// Degrees
    #[arg(long, default_value_t = 30.0)]
    pub elevation: f64,
    /// Degrees
    #[arg(long, default_value_t = 360.0)]
    pub arc: f64,
    /// Consecutive cameras held out for evaluation
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub holdout: u64,
    /// Image width and height in pixels
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(1..=4096))]
    pub size: u32,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FitColorArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    /// Directory of ground-truth images, one per camera in file-name order
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for scene.ply and report.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Opposite,
    SampledMean,
}

impl From<VariantArg> for LossVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Opposite => LossVariant::Opposite,
            VariantArg::SampledMean => LossVariant::SampledMean,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    /// Weight of the unseen-direction term, strictly below 0.5
    #[arg(long, default_value_t = 0.2, value_parser = lambda)]
    pub lambda: f64,
    /// Minimum blend weight for a gaussian to be supervised
    #[arg(long, default_value_t = 0.05, value_parser = open_unit)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "opposite")]
    pub variant: VariantArg,
    /// Random directions per iteration for the sampled-mean variant
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub mean_samples: u64,
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub iters: u64,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for scene.ply and report.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    pub members: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub lr: f64,
    /// Fit every member on all views instead of a bootstrap resample
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Color,
    Uncert,
}

#[derive(Args, Debug, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long, value_enum, default_value = "color")]
    pub mode: ModeArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Where evaluation uncertainty comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertSource {
    Sh,
    Ensemble(PathBuf),
    Random(u64),
}

fn uncert_source(s: &str) -> Result<UncertSource, String> {
    match s.split_once(':') {
        None if s == "sh" => Ok(UncertSource::Sh),
        Some(("ensemble", path)) if !path.is_empty() => Ok(UncertSource::Ensemble(path.into())),
        Some(("random", seed)) => seed
            .parse()
            .map(UncertSource::Random)
            .map_err(|_| format!("bad random seed {seed:?}")),
        _ => Err("expected sh, ensemble:<manifest> or random:<seed>".into()),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub cameras_eval: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// sh | ensemble:<manifest> | random:<seed>
    #[arg(long, default_value = "sh", value_parser = uncert_source)]
    pub uncert: UncertSource,
    /// Rank by the error itself; AUSE must come out as 0
    #[arg(long)]
    pub self_oracle: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Mean curves as .csv or .svg; may be given twice
    #[arg(long)]
    pub curves: Vec<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s} is not a positive number")),
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("{s} is not in (0, 1)")),
    }
}

fn lambda(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 0.5 => Ok(v),
        Ok(v) => Err(format!("lambda must be strictly between 0 and 0.5, got {v}")),
        Err(_) => Err(format!("{s} is not a number")),
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_VAR} must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::FitColor(a) => commands::fit_color(&a),
        Command::TrainUncert(a) => commands::train_uncert(&a),
        Command::Ensemble(a) => commands::ensemble(&a),
        Command::Render(a) => commands::render(&a),
        Command::Eval(a) => commands::eval(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
