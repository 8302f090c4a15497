//! Forward splatting: EWA projection, depth-sorted front-to-back alpha
//! blending, and harvesting of per-gaussian contribution weights.
//!
//! Blending follows the reference rasterizer numerics: per-splat alpha
//! `k = min(0.99, opacity * exp(-0.5 * d^T conic d))`, splats with
//! `k < 1/255` are skipped, and a pixel stops accumulating once its
//! transmittance drops below `1e-4`. `k` is evaluated in screen space with
//! the projected 2D covariance. There is no tiling: splats are sorted once
//! per camera and rows are rendered in parallel.

use nalgebra::{Matrix2, Matrix2x3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::{Camera, Scene};

pub const NEAR_PLANE: f64 = 0.01;
/// Added to the diagonal of every projected covariance (pixels^2).
pub const LOW_PASS: f64 = 0.3;
pub const MAX_ALPHA: f64 = 0.99;
pub const MIN_ALPHA: f64 = 1.0 / 255.0;
pub const MIN_TRANSMITTANCE: f64 = 1e-4;

/// What a blend accumulates per splat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// View-dependent SH color.
    Color,
    /// Per-gaussian uncertainty `u(view_dir)`, blended against a zero background.
    Uncertainty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splat2D {
    pub gaussian_id: usize,
    pub mean2d: Vector2<f64>,
    /// Screen-space covariance including the low-pass term.
    pub cov2d: Matrix2<f64>,
    pub conic: Matrix2<f64>,
    /// Camera-space z.
    pub depth: f64,
    /// Unit vector from the gaussian center toward the camera center.
    pub view_dir: Vector3<f64>,
    pub opacity: f64,
    /// Radius (pixels) outside of which `k < 1/255`.
    pub radius: f64,
}

impl Splat2D {
    fn covers(&self, pixel: &Vector2<f64>) -> bool {
        (pixel.x - self.mean2d.x).abs() <= self.radius
            && (pixel.y - self.mean2d.y).abs() <= self.radius
    }

    fn covers_row(&self, y: f64) -> bool {
        (y - self.mean2d.y).abs() <= self.radius
    }

    /// Unclamped-falloff alpha `min(0.99, opacity * exp(-q/2))` at `pixel`.
    pub fn alpha_at(&self, pixel: &Vector2<f64>) -> f64 {
        let d = pixel - self.mean2d;
        let q = (d.transpose() * self.conic * d)[(0, 0)];
        (self.opacity * (-0.5 * q).exp()).min(MAX_ALPHA)
    }
}

/// Center of pixel `(x, y)` in continuous image coordinates.
pub fn pixel_center(x: usize, y: usize) -> Vector2<f64> {
    Vector2::new(x as f64 + 0.5, y as f64 + 0.5)
}

/// EWA projection of gaussian `id` of `scene` into `cam`.
///
/// Returns `None` when the center is at or behind the near plane, when the
/// opacity is too low to ever pass the `1/255` skip test, or when `cull` is
/// set and the footprint misses the image.
pub fn project_with(scene: &Scene, id: usize, cam: &Camera, cull: bool) -> Option<Splat2D> {
    let g = &scene.gaussians[id];
    let p = cam.to_camera(&g.position);
    if p.z <= NEAR_PLANE {
        return None;
    }
    if g.opacity.min(MAX_ALPHA) < MIN_ALPHA {
        return None;
    }
    let z = p.z;
    let jac = Matrix2x3::new(
        cam.fx / z,
        0.0,
        -cam.fx * p.x / (z * z),
        0.0,
        cam.fy / z,
        -cam.fy * p.y / (z * z),
    );
    let cov_cam = cam.rotation * g.covariance() * cam.rotation.transpose();
    let mut cov2d = jac * cov_cam * jac.transpose();
    // Exact symmetry keeps the conic symmetric too.
    let off = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(0, 1)] = off;
    cov2d[(1, 0)] = off;
    cov2d[(0, 0)] += LOW_PASS;
    cov2d[(1, 1)] += LOW_PASS;
    let conic = cov2d.try_inverse()?;

    let mean2d = Vector2::new(cam.fx * p.x / z + cam.cx, cam.fy * p.y / z + cam.cy);

    // Largest eigenvalue of the symmetric 2x2 covariance.
    let mid = 0.5 * (cov2d[(0, 0)] + cov2d[(1, 1)]);
    let det = cov2d.determinant();
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let reach = 2.0 * (g.opacity.min(MAX_ALPHA) / MIN_ALPHA).ln();
    let radius = (reach * lambda_max).sqrt();

    if cull {
        let (w, h) = (cam.width as f64, cam.height as f64);
        if mean2d.x + radius < 0.0
            || mean2d.x - radius > w
            || mean2d.y + radius < 0.0
            || mean2d.y - radius > h
        {
            return None;
        }
    }

    let view_dir = (cam.center() - g.position).normalize();
    Some(Splat2D {
        gaussian_id: id,
        mean2d,
        cov2d,
        conic,
        depth: z,
        view_dir,
        opacity: g.opacity,
        radius: if cull { radius } else { f64::INFINITY },
    })
}

/// [`project_with`] with frustum culling enabled.
pub fn project(scene: &Scene, id: usize, cam: &Camera) -> Option<Splat2D> {
    project_with(scene, id, cam, true)
}

/// Projects every gaussian and sorts by ascending depth, ties by id.
pub fn project_scene(scene: &Scene, cam: &Camera, cull: bool) -> Vec<Splat2D> {
    let mut splats: Vec<Splat2D> = (0..scene.len())
        .into_par_iter()
        .filter_map(|i| project_with(scene, i, cam, cull))
        .collect();
    splats.sort_by(|a, b| {
        a.depth
            .total_cmp(&b.depth)
            .then(a.gaussian_id.cmp(&b.gaussian_id))
    });
    splats
}

fn is_depth_sorted(splats: &[Splat2D]) -> bool {
    splats.windows(2).all(|w| {
        w[0].depth < w[1].depth || (w[0].depth == w[1].depth && w[0].gaussian_id < w[1].gaussian_id)
    })
}

/// Front-to-back compositing core shared by every raster path.
///
/// Calls `visit(index, weight)` for each splat that contributes, where
/// `index` points into `splats` and `weight = T_i * k_i`. Returns the final
/// transmittance.
#[inline]
fn composite<'a, I>(splats: I, pixel: &Vector2<f64>, mut visit: impl FnMut(usize, f64)) -> f64
where
    I: Iterator<Item = (usize, &'a Splat2D)>,
{
    let mut transmittance = 1.0;
    for (index, splat) in splats {
        let k = splat.alpha_at(pixel);
        if k < MIN_ALPHA {
            continue;
        }
        visit(index, transmittance * k);
        transmittance *= 1.0 - k;
        if transmittance < MIN_TRANSMITTANCE {
            break;
        }
    }
    transmittance
}

/// Per-splat value blended in `mode`, in channel form.
fn splat_value(scene: &Scene, splat: &Splat2D, mode: RenderMode) -> [f64; 3] {
    let g = &scene.gaussians[splat.gaussian_id];
    match mode {
        RenderMode::Color => g.color(&splat.view_dir),
        RenderMode::Uncertainty => [g.uncertainty_unit(&splat.view_dir); 3],
    }
}

fn mode_background(scene: &Scene, mode: RenderMode) -> [f64; 3] {
    match mode {
        RenderMode::Color => scene.background,
        RenderMode::Uncertainty => [0.0; 3],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelBlend {
    /// Blended value; all three channels are equal in uncertainty mode.
    pub value: [f64; 3],
    /// `(gaussian_id, T_i * k_i)` for every contributing splat, front to back.
    pub weights: Vec<(usize, f64)>,
    pub transmittance: f64,
}

/// Blends one pixel over depth-sorted splats.
pub fn blend_pixel(
    splats: &[Splat2D],
    pixel: Vector2<f64>,
    scene: &Scene,
    mode: RenderMode,
) -> Result<PixelBlend> {
    if !is_depth_sorted(splats) {
        return Err(Error::Contract("splats must be sorted by ascending depth".into()));
    }
    let mut value = [0.0; 3];
    let mut weights = Vec::new();
    let transmittance = composite(splats.iter().enumerate(), &pixel, |i, w| {
        let v = splat_value(scene, &splats[i], mode);
        for c in 0..3 {
            value[c] += w * v[c];
        }
        weights.push((splats[i].gaussian_id, w));
    });
    let bg = mode_background(scene, mode);
    for c in 0..3 {
        value[c] += bg[c] * transmittance;
    }
    Ok(PixelBlend {
        value,
        weights,
        transmittance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, clamped to [0, 1].
    pub color: Vec<[f64; 3]>,
    /// Row-major blended uncertainty in [0, 1].
    pub uncert: Vec<f64>,
    /// Row-major `1 - T_final`.
    pub alpha: Vec<f64>,
}

impl RenderBuffer {
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean of RGB per pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.color.iter().map(|c| (c[0] + c[1] + c[2]) / 3.0).collect()
    }

    /// A buffer holding only color, e.g. a ground-truth image.
    pub fn from_color(width: u32, height: u32, color: Vec<[f64; 3]>) -> Result<Self> {
        let n = width as usize * height as usize;
        if color.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} color values for a {width}x{height} image",
                color.len()
            )));
        }
        Ok(Self {
            width,
            height,
            color,
            uncert: vec![0.0; n],
            alpha: vec![0.0; n],
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    /// Drop splats outside the image and skip per-pixel bound checks when off.
    pub cull: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { cull: true }
    }
}

/// Splats sorted for one camera, with the per-splat values both modes need.
struct PreparedView {
    splats: Vec<Splat2D>,
    colors: Vec<[f64; 3]>,
    uncert: Vec<f64>,
}

impl PreparedView {
    fn new(scene: &Scene, cam: &Camera, cull: bool) -> Self {
        let splats = project_scene(scene, cam, cull);
        let colors = splats
            .iter()
            .map(|s| splat_value(scene, s, RenderMode::Color))
            .collect();
        let uncert = splats
            .iter()
            .map(|s| splat_value(scene, s, RenderMode::Uncertainty)[0])
            .collect();
        Self {
            splats,
            colors,
            uncert,
        }
    }

    /// Splats whose footprint reaches row `y`, in depth order.
    fn row_candidates(&self, y: usize) -> Vec<usize> {
        let cy = y as f64 + 0.5;
        (0..self.splats.len())
            .filter(|&i| self.splats[i].covers_row(cy))
            .collect()
    }

    fn composite_at(&self, candidates: &[usize], pixel: &Vector2<f64>, visit: impl FnMut(usize, f64)) -> f64 {
        let iter = candidates
            .iter()
            .map(|&i| (i, &self.splats[i]))
            .filter(|(_, s)| s.covers(pixel));
        composite(iter, pixel, visit)
    }
}

/// Renders color, uncertainty and alpha in one pass.
pub fn render(scene: &Scene, cam: &Camera) -> Result<RenderBuffer> {
    render_with(scene, cam, RenderOptions::default())
}

pub fn render_with(scene: &Scene, cam: &Camera, options: RenderOptions) -> Result<RenderBuffer> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let view = PreparedView::new(scene, cam, options.cull);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let bg = scene.background;

    let rows: Vec<Vec<([f64; 3], f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let candidates = view.row_candidates(y);
            (0..w)
                .map(|x| {
                    let pixel = pixel_center(x, y);
                    let mut color = [0.0; 3];
                    let mut u = 0.0;
                    let t = view.composite_at(&candidates, &pixel, |i, wgt| {
                        let c = &view.colors[i];
                        color[0] += wgt * c[0];
                        color[1] += wgt * c[1];
                        color[2] += wgt * c[2];
                        u += wgt * view.uncert[i];
                    });
                    let color = [0, 1, 2].map(|c| (color[c] + bg[c] * t).clamp(0.0, 1.0));
                    (color, u.clamp(0.0, 1.0), (1.0 - t).clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();

    let mut buf = RenderBuffer {
        width: cam.width,
        height: cam.height,
        color: Vec::with_capacity(w * h),
        uncert: Vec::with_capacity(w * h),
        alpha: Vec::with_capacity(w * h),
    };
    for (color, u, a) in rows.into_iter().flatten() {
        buf.color.push(color);
        buf.uncert.push(u);
        buf.alpha.push(a);
    }
    Ok(buf)
}

/// One gaussian's share of one pixel, the unit of uncertainty supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRecord {
    pub gaussian_id: usize,
    pub pixel: [u32; 2],
    /// Unit vector from the gaussian center toward the camera center.
    pub view_dir: Vector3<f64>,
    /// `T_i * k_i` at that pixel.
    pub weight: f64,
}

/// Every (gaussian, pixel) pair whose blend weight is at least `threshold`,
/// in row-major pixel order and front-to-back within a pixel.
pub fn collect_contributions(
    scene: &Scene,
    cam: &Camera,
    threshold: f64,
) -> Result<Vec<ContributionRecord>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "contribution threshold must be in (0, 1), got {threshold}"
        )));
    }
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let view = PreparedView::new(scene, cam, true);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let rows: Vec<Vec<ContributionRecord>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let candidates = view.row_candidates(y);
            let mut records = Vec::new();
            for x in 0..w {
                let pixel = pixel_center(x, y);
                view.composite_at(&candidates, &pixel, |i, wgt| {
                    if wgt >= threshold {
                        let s = &view.splats[i];
                        records.push(ContributionRecord {
                            gaussian_id: s.gaussian_id,
                            pixel: [x as u32, y as u32],
                            view_dir: s.view_dir,
                            weight: wgt,
                        });
                    }
                });
            }
            records
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Frozen blend weights of one camera: for each pixel, the contributing
/// gaussians and their `T_i * k_i`, plus the final transmittance.
///
/// Color is linear in these weights, which is what the ensemble refit
/// differentiates through.
#[derive(Debug, Clone)]
pub struct WeightMap {
    pub width: u32,
    pub height: u32,
    /// Pixel `p` owns `entries[offsets[p]..offsets[p + 1]]`.
    pub offsets: Vec<usize>,
    /// `(gaussian_id, weight)`.
    pub entries: Vec<(u32, f32)>,
    pub transmittance: Vec<f64>,
    /// Unit view direction per gaussian id; zero for gaussians not projected.
    pub view_dirs: Vec<Vector3<f64>>,
}

/// Per-pixel entry counts, (gaussian, weight) entries and transmittance for one row.
type RowWeights = (Vec<usize>, Vec<(u32, f32)>, Vec<f64>);

pub fn weight_map(scene: &Scene, cam: &Camera) -> Result<WeightMap> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    let view = PreparedView::new(scene, cam, true);
    let (w, h) = (cam.width as usize, cam.height as usize);
    let rows: Vec<RowWeights> = (0..h)
        .into_par_iter()
        .map(|y| {
            let candidates = view.row_candidates(y);
            let mut counts = Vec::with_capacity(w);
            let mut entries = Vec::new();
            let mut trans = Vec::with_capacity(w);
            for x in 0..w {
                let pixel = pixel_center(x, y);
                let before = entries.len();
                let t = view.composite_at(&candidates, &pixel, |i, wgt| {
                    entries.push((view.splats[i].gaussian_id as u32, wgt as f32));
                });
                counts.push(entries.len() - before);
                trans.push(t);
            }
            (counts, entries, trans)
        })
        .collect();

    let mut offsets = Vec::with_capacity(w * h + 1);
    offsets.push(0);
    let mut entries = Vec::new();
    let mut transmittance = Vec::with_capacity(w * h);
    for (counts, e, t) in rows {
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        entries.extend(e);
        transmittance.extend(t);
    }
    let mut view_dirs = vec![Vector3::zeros(); scene.len()];
    for s in &view.splats {
        view_dirs[s.gaussian_id] = s.view_dir;
    }
    Ok(WeightMap {
        width: cam.width,
        height: cam.height,
        offsets,
        entries,
        transmittance,
        view_dirs,
    })
}
