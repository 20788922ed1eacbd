//! 8-bit PNG previews. Values are clamped to `[0, 1]` and rounded to the
//! nearest of 256 levels.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use rsc_core::Image;

use super::{read_bytes, write_bytes, FormatError};

const FORMAT: &str = "png";

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode(img: &Image) -> Result<Vec<u8>, FormatError> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let dynamic = match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).map(DynamicImage::ImageLuma8),
        3 => RgbImage::from_raw(w, h, bytes).map(DynamicImage::ImageRgb8),
        c => {
            return Err(FormatError::Unsupported {
                format: FORMAT,
                message: format!("only 1 or 3 channels can be stored, image has {c}"),
            })
        }
    }
    .expect("buffer length matches dimensions");
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| FormatError::Unsupported {
            format: FORMAT,
            message: e.to_string(),
        })?;
    Ok(out.into_inner())
}

pub fn decode(bytes: &[u8]) -> Result<Image, FormatError> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| FormatError::malformed(FORMAT, 0, e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let (channels, raw) = if dynamic.color().has_color() {
        (3, dynamic.into_rgb8().into_raw())
    } else {
        (1, dynamic.into_luma8().into_raw())
    };
    let data = raw.iter().map(|&b| b as f32 / 255.0).collect();
    Image::from_vec(w, h, channels, data)
        .map_err(|e| FormatError::malformed(FORMAT, 0, e.to_string()))
}

pub fn read(path: &Path) -> Result<Image, FormatError> {
    decode(&read_bytes(path)?)
}

pub fn write(path: &Path, img: &Image) -> Result<(), FormatError> {
    write_bytes(path, &encode(img)?)
}
