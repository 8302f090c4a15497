//! 8-bit binary PPM (P6) and PGM (P5) output for rendered rasters.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::render::RenderBuffer;

/// `round(255 * clamp(v, 0, 1))`.
pub fn to_byte(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

fn image_err(path: &Path, e: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_pnm(
    path: &Path,
    bytes: &[u8],
    width: u32,
    height: u32,
    subtype: PnmSubtype,
    color: ExtendedColorType,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(subtype)
        .write_image(bytes, width, height, color)
        .map_err(|e| image_err(path, e))
}

pub fn save_ppm(buf: &RenderBuffer, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = buf.color.iter().flatten().map(|&v| to_byte(v)).collect();
    write_pnm(
        path.as_ref(),
        &bytes,
        buf.width,
        buf.height,
        PnmSubtype::Pixmap(SampleEncoding::Binary),
        ExtendedColorType::Rgb8,
    )
}

/// Writes a row-major scalar raster as grayscale.
pub fn save_pgm(values: &[f64], width: u32, height: u32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width as usize * height as usize {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    let bytes: Vec<u8> = values.iter().map(|&v| to_byte(v)).collect();
    write_pnm(
        path,
        &bytes,
        width,
        height,
        PnmSubtype::Graymap(SampleEncoding::Binary),
        ExtendedColorType::L8,
    )
}

/// Reads an RGB image (any format `image` understands with the enabled
/// features) into a color-only buffer with values in [0, 1].
pub fn load_color(path: impl AsRef<Path>) -> Result<RenderBuffer> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| image_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    let color = img
        .pixels()
        .map(|p| p.0.map(|c| c as f64 / 255.0))
        .collect();
    RenderBuffer::from_color(w, h, color)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_conversion_rounds_and_clamps() {
        assert_eq!(to_byte(-0.3), 0);
        assert_eq!(to_byte(1.7), 255);
        assert_eq!(to_byte(0.5), 128);
        assert_eq!(to_byte(1.0 / 255.0 * 0.49), 0);
    }

    #[test]
    fn ppm_round_trip_is_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let buf = RenderBuffer::from_color(2, 1, vec![[0.0, 0.5, 1.0], [0.25, 0.75, 0.1]]).unwrap();
        save_ppm(&buf, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6"));
        let back = load_color(&path).unwrap();
        for (a, b) in back.color.iter().flatten().zip(buf.color.iter().flatten()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_has_grayscale_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.pgm");
        save_pgm(&[0.0, 0.5, 1.0, 0.2], 2, 2, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 128, 255, 51]);
        assert!(save_pgm(&[0.0], 2, 2, &path).is_err());
    }
}
