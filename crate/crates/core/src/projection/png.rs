//! PNG I/O for normalized range images.
//!
//! Internally row v = 0 is the lowest elevation angle; files are written
//! with that row at the bottom so the subject appears upright. `load_gray`
//! applies the inverse flip, making save → load the identity.

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::projection::NormalizedImage;

pub fn save_gray(img: &NormalizedImage, path: &Path) -> Result<()> {
    let (w, h) = (img.width, img.height);
    let mut rows = Vec::with_capacity(w * h);
    for v in (0..h).rev() {
        rows.extend_from_slice(&img.gray[v * w..(v + 1) * w]);
    }
    let buf = GrayImage::from_raw(w as u32, h as u32, rows)
        .expect("buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

pub fn save_rgb(img: &NormalizedImage, path: &Path) -> Result<()> {
    if img.rgb.len() != img.width * img.height * 3 {
        return Err(Error::InvalidParam(
            "rgb channels not populated; apply to_rgb first".into(),
        ));
    }
    let (w, h) = (img.width, img.height);
    let mut rows = Vec::with_capacity(w * h * 3);
    for v in (0..h).rev() {
        rows.extend_from_slice(&img.rgb[v * w * 3..(v + 1) * w * 3]);
    }
    let buf = RgbImage::from_raw(w as u32, h as u32, rows)
        .expect("buffer length matches dimensions");
    buf.save(path)?;
    Ok(())
}

/// Reads a PNG's gray channel scaled to [0, 1], un-flipping rows back into
/// elevation order. RGB files contribute their red channel, which equals
/// gray for images written by this module.
pub fn load_gray(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let decoded = image::open(path)?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (bytes, stride) = match decoded {
        image::DynamicImage::ImageLuma8(img) => (img.into_raw(), 1),
        image::DynamicImage::ImageRgb8(img) => (img.into_raw(), 3),
        other => (other.into_rgb8().into_raw(), 3),
    };
    let px: Vec<u8> = bytes.into_iter().step_by(stride).collect();
    let mut data = vec![0.0; w * h];
    for file_row in 0..h {
        let v = h - 1 - file_row;
        for x in 0..w {
            data[v * w + x] = px[file_row * w + x] as f64 / 255.0;
        }
    }
    Ok((w, h, data))
}
