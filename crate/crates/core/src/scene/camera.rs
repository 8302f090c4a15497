use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Pinhole camera with an OpenCV-style frame: +x right, +y down, +z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("image size must be non-zero".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Validation("focal lengths must be positive".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::Validation(format!("cx {} outside image", self.cx)));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::Validation(format!("cy {} outside image", self.cy)));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("translation is not finite".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if !off.is_finite() || off > ORTHONORMAL_TOL || self.rotation.determinant() < 0.0 {
            return Err(Error::Validation("rotation is not orthonormal".into()));
        }
        Ok(())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// World-space unit optical axis.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    fn to_json(&self) -> CameraJson {
        let r = &self.rotation;
        let t = &self.translation;
        CameraJson {
            width: self.width,
            height: self.height,
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            world_to_camera: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    fn from_json(raw: &CameraJson) -> Result<Self> {
        let m = &raw.world_to_camera;
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Validation(
                "last row of world_to_camera must be [0, 0, 0, 1]".into(),
            ));
        }
        let cam = Camera {
            width: raw.width,
            height: raw.height,
            fx: raw.fx,
            fy: raw.fy,
            cx: raw.cx,
            cy: raw.cy,
            rotation: Matrix3::new(
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
            ),
            translation: Vector3::new(m[0][3], m[1][3], m[2][3]),
        };
        cam.validate()?;
        Ok(cam)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    /// Row-major 4x4.
    world_to_camera: [[f64; 4]; 4],
}

#[derive(Serialize, Deserialize)]
struct CameraFile {
    cameras: Vec<CameraJson>,
}

/// Converts a serde path (`cameras[2].fx`) into a JSON pointer (`/cameras/2/fx`).
fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn parse_cameras(json: &str) -> Result<Vec<Camera>> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let file: CameraFile = serde_path_to_error::deserialize(de).map_err(|e| Error::CameraJson {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    if file.cameras.is_empty() {
        return Err(Error::CameraJson {
            pointer: "/cameras".into(),
            message: "camera list is empty".into(),
        });
    }
    file.cameras
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            Camera::from_json(raw).map_err(|e| Error::CameraJson {
                pointer: format!("/cameras/{i}"),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn cameras_to_json(cameras: &[Camera]) -> Result<String> {
    let file = CameraFile {
        cameras: cameras.iter().map(Camera::to_json).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Reads an ordered camera list. Order is capture order.
pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cameras(&text)
}

pub fn save_cameras(cameras: &[Camera], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = cameras_to_json(cameras)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera {
            width: 64,
            height: 48,
            fx: 60.0,
            fy: 61.5,
            cx: 32.0,
            cy: 24.0,
            rotation: *nalgebra::Rotation3::from_euler_angles(0.1, 0.7, -0.4).matrix(),
            translation: Vector3::new(0.1, -0.2, 3.0),
        }
    }

    #[test]
    fn round_trip() {
        let cams = vec![cam(), Camera { fx: 10.0, ..cam() }];
        let json = cameras_to_json(&cams).unwrap();
        assert_eq!(parse_cameras(&json).unwrap(), cams);
    }

    #[test]
    fn center_maps_to_origin() {
        let c = cam();
        assert!(c.to_camera(&c.center()).norm() < 1e-12);
    }

    #[test]
    fn empty_list_is_an_error() {
        let err = parse_cameras(r#"{"cameras": []}"#).unwrap_err();
        assert!(matches!(err, Error::CameraJson { ref pointer, .. } if pointer == "/cameras"));
    }

    #[test]
    fn non_orthonormal_rotation_is_rejected() {
        let mut c = cam();
        c.rotation[(0, 0)] += 0.01;
        let json = cameras_to_json(&[cam(), c]).unwrap();
        let err = parse_cameras(&json).unwrap_err();
        assert!(
            matches!(err, Error::CameraJson { ref pointer, .. } if pointer == "/cameras/1"),
            "{err}"
        );
    }

    #[test]
    fn schema_errors_carry_a_pointer() {
        let err = parse_cameras(r#"{"cameras": [{"width": 4, "height": "x"}]}"#).unwrap_err();
        match err {
            Error::CameraJson { pointer, .. } => assert_eq!(pointer, "/cameras/0/height"),
            other => panic!("unexpected {other}"),
        }
    }
}
