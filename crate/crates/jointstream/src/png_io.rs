//! PNG input and output for slides, masks, patches and debug dumps.

use std::path::Path;

use image::{GrayImage, ImageReader, RgbImage};
use jointstream_core::{RasterImage, RoiMask};

use crate::error::{io, Error, Result};

fn png_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Png { path: path.to_path_buf(), source }
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let reader = ImageReader::open(path).map_err(io(path))?.with_guessed_format().map_err(io(path))?;
    reader.decode().map_err(png_err(path))
}

/// Loads an 8-bit RGB raster. Other colour types are converted.
pub fn load_rgb(path: &Path) -> Result<RasterImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok(RasterImage::from_rgb8_interleaved(w as usize, h as usize, img.as_raw())?)
}

/// Loads a mask; any nonzero gray level marks a malignant pixel.
pub fn load_mask(path: &Path) -> Result<RoiMask> {
    let img = open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    let bits = img.as_raw().iter().map(|&v| v != 0).collect();
    Ok(RoiMask::new(w as usize, h as usize, bits)?)
}

/// Writes an RGB8 raster as PNG.
pub fn save_rgb(img: &RasterImage, path: &Path) -> Result<()> {
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_rgb8_interleaved())
        .ok_or_else(|| crate::error::format(path, "raster size"))?;
    buf.save_with_format(path, image::ImageFormat::Png).map_err(png_err(path))
}

pub fn save_mask(mask: &RoiMask, path: &Path) -> Result<()> {
    let bytes = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let buf = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes).expect("mask size");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(png_err(path))
}

/// Grayscale dump of one channel stretched to the full 0–255 range.
/// Meant for eyeballing spectra and subbands, not for reading back.
pub fn dump_channel(img: &RasterImage, channel: usize, path: &Path) -> Result<()> {
    let plane = img.plane(channel);
    let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes = plane.iter().map(|v| ((v - lo) / span * 255.0).round() as u8).collect();
    let buf = GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes).expect("plane size");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(png_err(path))
}
