//! Binary little-endian PLY in the de-facto Gaussian splatting layout,
//! extended with `u_*` properties for the uncertainty field.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, Vector3};

use super::{logit, sigmoid, Gaussian, Scene, COLOR_DEGREE, DEFAULT_UNCERT_DEGREE};
use crate::error::{Error, Result};
use crate::sh::{num_coeffs, ShCoeffs, MAX_DEGREE};

/// Per-channel count of non-dc color coefficients at degree 3.
const REST_PER_CHANNEL: usize = num_coeffs(COLOR_DEGREE) - 1;

fn property_names(uncert_degree: usize) -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..3 * REST_PER_CHANNEL).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names.extend((0..num_coeffs(uncert_degree)).map(|i| format!("u_{i}")));
    names
}

/// Header text written for a scene of `count` gaussians.
pub fn ply_header(count: usize, uncert_degree: usize, background: [f64; 3]) -> String {
    let mut h = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(h, "comment uncert_sh_degree {uncert_degree}");
    let _ = writeln!(
        h,
        "comment background {} {} {}",
        background[0], background[1], background[2]
    );
    let _ = writeln!(h, "element vertex {count}");
    for name in property_names(uncert_degree) {
        let _ = writeln!(h, "property float {name}");
    }
    h.push_str("end_header\n");
    h
}

/// Serializes `scene`; identical scenes give identical bytes.
pub fn scene_to_ply_bytes(scene: &Scene) -> Result<Vec<u8>> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    scene.validate()?;
    let degree = scene.uncert_degree();
    let header = ply_header(scene.len(), degree, scene.background);
    let floats_per_record = property_names(degree).len();
    let mut out = Vec::with_capacity(header.len() + 4 * floats_per_record * scene.len());
    out.extend_from_slice(header.as_bytes());

    let mut record = Vec::with_capacity(floats_per_record);
    for g in &scene.gaussians {
        record.clear();
        record.extend(g.position.iter().copied());
        record.extend([0.0; 3]);
        record.extend(g.color_sh.iter().map(|c| c.values()[0]));
        for c in &g.color_sh {
            record.extend_from_slice(&c.values()[1..]);
        }
        record.push(logit(g.opacity));
        record.extend(g.scale.iter().map(|s| s.ln()));
        let q = &g.rotation;
        record.extend([q.w, q.i, q.j, q.k]);
        record.extend_from_slice(g.uncert_sh.values());
        debug_assert_eq!(record.len(), floats_per_record);
        for v in &record {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = scene_to_ply_bytes(scene)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&bytes)
}

fn header_err(message: impl Into<String>) -> Error {
    Error::Ply {
        element: None,
        message: message.into(),
    }
}

fn element_err(index: usize, message: impl Into<String>) -> Error {
    Error::Ply {
        element: Some(index),
        message: message.into(),
    }
}

struct Header {
    count: usize,
    properties: Vec<String>,
    uncert_degree_comment: Option<usize>,
    background: [f64; 3],
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| header_err("missing end_header"))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| header_err("header is not ASCII"))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(header_err("missing ply magic"));
    }

    let mut header = Header {
        count: 0,
        properties: Vec::new(),
        uncert_degree_comment: None,
        background: [0.0; 3],
        data_offset: end + END.len(),
    };
    let mut saw_format = false;
    let mut saw_vertex = false;
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["format", "binary_little_endian", "1.0"] => saw_format = true,
            ["format", other, ..] => {
                return Err(header_err(format!("unsupported format {other}")));
            }
            ["comment", "uncert_sh_degree", d] => {
                let d: usize = d
                    .parse()
                    .map_err(|_| header_err(format!("bad uncert_sh_degree {d}")))?;
                if d > MAX_DEGREE {
                    return Err(header_err(format!("uncert_sh_degree {d} above {MAX_DEGREE}")));
                }
                header.uncert_degree_comment = Some(d);
            }
            ["comment", "background", r, g, b] => {
                let parse = |s: &str| -> Result<f64> {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| (0.0..=1.0).contains(v))
                        .ok_or_else(|| header_err(format!("bad background component {s}")))
                };
                header.background = [parse(r)?, parse(g)?, parse(b)?];
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                if saw_vertex {
                    return Err(header_err("duplicate vertex element"));
                }
                saw_vertex = true;
                header.count = n
                    .parse()
                    .map_err(|_| header_err(format!("bad vertex count {n}")))?;
            }
            ["element", name, ..] => {
                return Err(header_err(format!("unexpected element {name}")));
            }
            ["property", "list", ..] => return Err(header_err("list properties are not supported")),
            ["property", ty, name] => {
                if !saw_vertex {
                    return Err(header_err("property before vertex element"));
                }
                if !matches!(*ty, "float" | "float32") {
                    return Err(header_err(format!(
                        "property {name} has type {ty}, expected float"
                    )));
                }
                header.properties.push(name.to_string());
            }
            _ => return Err(header_err(format!("unrecognized header line {line:?}"))),
        }
    }
    if !saw_format {
        return Err(header_err("missing binary_little_endian format line"));
    }
    if !saw_vertex {
        return Err(header_err("missing vertex element"));
    }
    Ok(header)
}

/// Column indices of the properties we understand.
struct Layout {
    position: [usize; 3],
    dc: [usize; 3],
    /// Non-dc color columns, channel-major; may be empty or shorter than degree 3.
    rest: Vec<usize>,
    rest_per_channel: usize,
    opacity: usize,
    scale: [usize; 3],
    rot: [usize; 4],
    uncert: Vec<usize>,
    uncert_degree: usize,
}

fn resolve_layout(header: &Header) -> Result<Layout> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.properties.iter().enumerate() {
        if index.insert(name.as_str(), i).is_some() {
            return Err(header_err(format!("duplicate property {name}")));
        }
    }
    let get = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| header_err(format!("missing property {name}")))
    };
    let numbered = |prefix: &str| -> Result<Vec<usize>> {
        let count = header
            .properties
            .iter()
            .filter(|p| p.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok()))
            .count();
        (0..count).map(|i| get(&format!("{prefix}{i}"))).collect()
    };

    let rest = numbered("f_rest_")?;
    let rest_per_channel = rest.len() / 3;
    if rest.len() % 3 != 0 || ![0, 3, 8, 15].contains(&rest_per_channel) {
        return Err(header_err(format!(
            "f_rest count {} does not match any SH degree",
            rest.len()
        )));
    }
    let uncert = numbered("u_")?;
    let uncert_degree = match uncert.len() {
        0 => header.uncert_degree_comment.unwrap_or(DEFAULT_UNCERT_DEGREE),
        n => {
            let d = (0..=MAX_DEGREE)
                .find(|&d| num_coeffs(d) == n)
                .ok_or_else(|| header_err(format!("u_* count {n} does not match any SH degree")))?;
            if header.uncert_degree_comment.is_some_and(|c| c != d) {
                return Err(header_err(format!(
                    "uncert_sh_degree comment disagrees with {n} u_* properties"
                )));
            }
            d
        }
    };

    let layout = Layout {
        position: [get("x")?, get("y")?, get("z")?],
        dc: [get("f_dc_0")?, get("f_dc_1")?, get("f_dc_2")?],
        rest,
        rest_per_channel,
        opacity: get("opacity")?,
        scale: [get("scale_0")?, get("scale_1")?, get("scale_2")?],
        rot: [get("rot_0")?, get("rot_1")?, get("rot_2")?, get("rot_3")?],
        uncert,
        uncert_degree,
    };

    let known = 3 + 3 + 1 + 3 + 4 + layout.rest.len() + layout.uncert.len();
    let normals = ["nx", "ny", "nz"].iter().filter(|n| index.contains_key(*n)).count();
    if known + normals != header.properties.len() {
        let unknown: Vec<&String> = header
            .properties
            .iter()
            .filter(|p| {
                !(p.starts_with("f_rest_") || p.starts_with("u_") || p.starts_with("f_dc_"))
                    && !["x", "y", "z", "nx", "ny", "nz", "opacity"].contains(&p.as_str())
                    && !p.starts_with("scale_")
                    && !p.starts_with("rot_")
            })
            .collect();
        return Err(header_err(format!("unexpected properties {unknown:?}")));
    }
    Ok(layout)
}

pub fn parse_scene(bytes: &[u8]) -> Result<Scene> {
    let header = parse_header(bytes)?;
    let layout = resolve_layout(&header)?;
    if header.count == 0 {
        return Err(Error::EmptyScene);
    }
    let stride = header.properties.len() * 4;
    let data = &bytes[header.data_offset..];
    if data.len() < stride * header.count {
        return Err(header_err(format!(
            "truncated body: {} bytes for {} records of {stride}",
            data.len(),
            header.count
        )));
    }
    if data.len() > stride * header.count {
        return Err(header_err("trailing bytes after vertex records"));
    }

    let mut gaussians = Vec::with_capacity(header.count);
    let mut row = vec![0.0f64; header.properties.len()];
    for (i, chunk) in data.chunks_exact(stride).enumerate() {
        for (v, b) in row.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(element_err(
                i,
                format!("non-finite value in property {}", header.properties[col]),
            ));
        }
        gaussians.push(gaussian_from_row(&row, &layout).map_err(|m| element_err(i, m))?);
    }
    Ok(Scene {
        gaussians,
        background: header.background,
    })
}

fn gaussian_from_row(row: &[f64], layout: &Layout) -> std::result::Result<Gaussian, String> {
    let position = Vector3::from(layout.position.map(|c| row[c]));

    let color_sh = [0, 1, 2].map(|ch| {
        let mut values = vec![0.0; num_coeffs(COLOR_DEGREE)];
        values[0] = row[layout.dc[ch]];
        let rest = &layout.rest[ch * layout.rest_per_channel..(ch + 1) * layout.rest_per_channel];
        for (k, &col) in rest.iter().enumerate() {
            values[k + 1] = row[col];
        }
        ShCoeffs::new(COLOR_DEGREE, values).expect("finite degree-3 coefficients")
    });

    let opacity = sigmoid(row[layout.opacity]);
    let scale = Vector3::from(layout.scale.map(|c| row[c].exp()));
    if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err("scale out of range".into());
    }

    let [w, x, y, z] = layout.rot.map(|c| row[c]);
    let mut rotation = Quaternion::new(w, x, y, z);
    let norm = rotation.norm();
    if norm == 0.0 {
        return Err("zero rotation quaternion".into());
    }
    // Files written by other tools often carry unnormalized quaternions.
    if (norm - 1.0).abs() > 1e-6 {
        rotation /= norm;
    }

    let uncert_sh = if layout.uncert.is_empty() {
        ShCoeffs::zeros(layout.uncert_degree)
    } else {
        ShCoeffs::new(
            layout.uncert_degree,
            layout.uncert.iter().map(|&c| row[c]).collect(),
        )
    }
    .map_err(|e| e.to_string())?;

    let g = Gaussian {
        position,
        rotation,
        scale,
        opacity,
        color_sh,
        uncert_sh,
    };
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}
