//! Reading and writing pipeline artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use splat_uncert::ensemble::EnsembleManifest;
use splat_uncert::imageio::load_color;
use splat_uncert::scene::{load_scene, Camera, Scene};
use splat_uncert::RenderBuffer;

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn image_name(index: usize, ext: &str) -> String {
    format!("{index:04}.{ext}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Images of `dir` in file-name order, checked against the cameras.
pub fn load_gt(dir: &Path, cameras: &[Camera]) -> Result<Vec<RenderBuffer>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "ppm"))
        .collect();
    paths.sort();
    if paths.len() != cameras.len() {
        bail!(
            "{} holds {} images but there are {} cameras",
            dir.display(),
            paths.len(),
            cameras.len()
        );
    }
    paths
        .iter()
        .zip(cameras)
        .map(|(p, c)| {
            let img = load_color(p)?;
            if img.width != c.width || img.height != c.height {
                bail!(
                    "{} is {}x{}, camera is {}x{}",
                    p.display(),
                    img.width,
                    img.height,
                    c.width,
                    c.height
                );
            }
            Ok(img)
        })
        .collect()
}

/// Member scenes listed in a manifest; relative paths resolve against the manifest's directory.
pub fn load_members(manifest_path: &Path) -> Result<Vec<Scene>> {
    let text = fs::read_to_string(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .members
        .iter()
        .map(|m| {
            let p = base.join(m);
            load_scene(&p).with_context(|| format!("loading member {}", p.display()))
        })
        .collect()
}
