//! Sparsification curves and AUSE.
//!
//! Pixels are removed in order of decreasing ranking value (ties by pixel
//! index), and the MAE of what remains is tracked. The oracle ranks by the
//! error itself. AUSE is the mean gap between the two normalized curves over
//! the fraction grid.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{render, RenderBuffer};
use crate::scene::{Camera, Scene};

pub const GRID_LEN: usize = 100;

/// `{0, 0.01, ..., 0.99}`.
pub fn default_fractions() -> Vec<f64> {
    (0..GRID_LEN).map(|i| i as f64 / GRID_LEN as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsificationCurve {
    pub fractions: Vec<f64>,
    pub mae: Vec<f64>,
    pub normalized: bool,
}

fn check_pair(errors: &[f64], ranking: &[f64]) -> Result<()> {
    if errors.len() != ranking.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} errors vs {} ranking values",
            errors.len(),
            ranking.len()
        )));
    }
    if errors.is_empty() {
        return Err(Error::InvalidArgument("empty raster".into()));
    }
    if let Some(i) = errors.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "error at pixel {i} is {}; expected a finite non-negative value",
            errors[i]
        )));
    }
    if let Some(i) = ranking.iter().position(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ranking at pixel {i} is not finite")));
    }
    Ok(())
}

/// Pixel indices by decreasing ranking, ties by increasing index.
pub fn removal_order(ranking: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ranking.len()).collect();
    order.sort_by(|&a, &b| ranking[b].total_cmp(&ranking[a]).then(a.cmp(&b)));
    order
}

pub fn sparsification_curve(
    errors: &[f64],
    ranking: &[f64],
    fractions: &[f64],
    normalize: bool,
) -> Result<SparsificationCurve> {
    check_pair(errors, ranking)?;
    if let Some(f) = fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("fraction {f} outside [0, 1)")));
    }
    let n = errors.len();
    let order = removal_order(ranking);
    // remaining[k]: sum of errors left after removing the first k, summed from
    // the back so small tails do not suffer cancellation.
    let mut remaining = vec![0.0; n + 1];
    for k in (0..n).rev() {
        remaining[k] = remaining[k + 1] + errors[order[k]];
    }
    let mut mae: Vec<f64> = fractions
        .iter()
        .map(|f| {
            let k = ((f * n as f64).floor() as usize).min(n - 1);
            remaining[k] / (n - k) as f64
        })
        .collect();
    if normalize {
        let base = remaining[0] / n as f64;
        if base > 0.0 {
            for m in &mut mae {
                *m /= base;
            }
        }
    }
    Ok(SparsificationCurve {
        fractions: fractions.to_vec(),
        mae,
        normalized: normalize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ause {
    pub value: f64,
    /// All errors were zero; the value is defined as 0.
    pub degenerate: bool,
    pub curve_uncertainty: Vec<f64>,
    pub curve_oracle: Vec<f64>,
}

pub fn ause(errors: &[f64], uncertainty: &[f64]) -> Result<Ause> {
    ause_with_grid(errors, uncertainty, &default_fractions())
}

pub fn ause_with_grid(errors: &[f64], uncertainty: &[f64], fractions: &[f64]) -> Result<Ause> {
    if fractions.is_empty() {
        return Err(Error::InvalidArgument("empty fraction grid".into()));
    }
    let u = sparsification_curve(errors, uncertainty, fractions, true)?;
    let o = sparsification_curve(errors, errors, fractions, true)?;
    let degenerate = errors.iter().all(|&e| e == 0.0);
    let value = if degenerate {
        0.0
    } else {
        u.mae.iter().zip(&o.mae).map(|(a, b)| a - b).sum::<f64>() / fractions.len() as f64
    };
    Ok(Ause {
        value,
        degenerate,
        curve_uncertainty: u.mae,
        curve_oracle: o.mae,
    })
}

/// Per-pixel mean absolute RGB difference.
pub fn error_map(rendered: &RenderBuffer, gt: &RenderBuffer) -> Result<Vec<f64>> {
    if rendered.width != gt.width || rendered.height != gt.height {
        return Err(Error::ShapeMismatch(format!(
            "render is {}x{}, ground truth is {}x{}",
            rendered.width, rendered.height, gt.width, gt.height
        )));
    }
    Ok(rendered
        .color
        .iter()
        .zip(&gt.color)
        .map(|(a, b)| ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEval {
    pub ause: f64,
    pub degenerate: bool,
    pub mae: f64,
    pub curve_uncertainty: Vec<f64>,
    pub curve_oracle: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fractions: Vec<f64>,
    pub views: Vec<ViewEval>,
    pub mean_ause: f64,
    /// Any view had an all-zero error map.
    pub degenerate: bool,
    pub mean_curve_uncertainty: Vec<f64>,
    pub mean_curve_oracle: Vec<f64>,
}

/// AUSE of `uncertainty_maps` against the error of `scene` rendered on each
/// evaluation camera.
pub fn evaluate_method(
    scene: &Scene,
    eval_cameras: &[Camera],
    gt_images: &[RenderBuffer],
    uncertainty_maps: &[Vec<f64>],
) -> Result<EvalReport> {
    if eval_cameras.is_empty() {
        return Err(Error::InvalidArgument("no evaluation cameras".into()));
    }
    if gt_images.len() != eval_cameras.len() || uncertainty_maps.len() != eval_cameras.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} cameras, {} ground-truth images, {} uncertainty maps",
            eval_cameras.len(),
            gt_images.len(),
            uncertainty_maps.len()
        )));
    }
    let errors = eval_cameras
        .par_iter()
        .zip(gt_images)
        .map(|(cam, gt)| error_map(&render(scene, cam)?, gt))
        .collect::<Result<Vec<_>>>()?;
    evaluate_errors(&errors, uncertainty_maps)
}

/// Same as [`evaluate_method`] with precomputed error maps.
pub fn evaluate_errors(errors: &[Vec<f64>], uncertainty_maps: &[Vec<f64>]) -> Result<EvalReport> {
    if errors.is_empty() || errors.len() != uncertainty_maps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} error maps vs {} uncertainty maps",
            errors.len(),
            uncertainty_maps.len()
        )));
    }
    let fractions = default_fractions();
    let views = errors
        .par_iter()
        .zip(uncertainty_maps)
        .map(|(e, u)| {
            let a = ause_with_grid(e, u, &fractions)?;
            Ok(ViewEval {
                ause: a.value,
                degenerate: a.degenerate,
                mae: e.iter().sum::<f64>() / e.len() as f64,
                curve_uncertainty: a.curve_uncertainty,
                curve_oracle: a.curve_oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = views.len() as f64;
    let mean_curve = |pick: fn(&ViewEval) -> &Vec<f64>| -> Vec<f64> {
        (0..fractions.len())
            .map(|i| views.iter().map(|v| pick(v)[i]).sum::<f64>() / n)
            .collect()
    };
    Ok(EvalReport {
        mean_ause: views.iter().map(|v| v.ause).sum::<f64>() / n,
        degenerate: views.iter().any(|v| v.degenerate),
        mean_curve_uncertainty: mean_curve(|v| &v.curve_uncertainty),
        mean_curve_oracle: mean_curve(|v| &v.curve_oracle),
        fractions,
        views,
    })
}

pub fn write_curves_csv(
    path: impl AsRef<Path>,
    fractions: &[f64],
    uncertainty: &[f64],
    oracle: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["fraction", "mae_uncertainty", "mae_oracle"])?;
    for ((f, u), o) in fractions.iter().zip(uncertainty).zip(oracle) {
        w.write_record([f.to_string(), u.to_string(), o.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Line plot of both curves.
pub fn curves_svg(fractions: &[f64], uncertainty: &[f64], oracle: &[f64]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let y_max = uncertainty
        .iter()
        .chain(oracle)
        .copied()
        .fold(1.0, f64::max)
        * 1.05;
    let px = |f: f64| M + f * (W - 2.0 * M);
    let py = |v: f64| H - M - v / y_max * (H - 2.0 * M);
    let line = |values: &[f64]| {
        fractions
            .iter()
            .zip(values)
            .map(|(&f, &v)| format!("{:.2},{:.2}", px(f), py(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{b}" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t}</text>"#,
            px(t),
            H - M + 16.0
        );
    }
    for t in [0.0, 0.5, 1.0] {
        if t <= y_max {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{t}</text>"#,
                M - 6.0,
                py(t) + 4.0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">fraction of pixels removed</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.1})">normalized MAE</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="crimson" stroke-width="2" points="{}"/>"#,
        line(uncertainty)
    );
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" stroke-dasharray="6 4" points="{}"/>"#,
        line(oracle)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="crimson">uncertainty</text>"#,
        W - M - 90.0,
        M + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="steelblue">oracle</text>"#,
        W - M - 90.0,
        M + 20.0
    );
    s.push_str("</svg>\n");
    s
}
