//! PNG / PGM loading and mask encoding.
//!
//! Grayscale inputs are divided by their bit depth maximum. Color inputs are
//! reduced to luminance with `0.299 R + 0.587 G + 0.114 B`. Masks treat any
//! nonzero sample as object and are written back as 0/255.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader, Luma};

use super::image::{BinaryMask, GrayImage};
use crate::error::{Error, Result};

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
}

fn dynamic_to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p[0] as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| p[0] as f64 / 65535.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| {
                luminance(
                    p[0] as f64 / 255.0,
                    p[1] as f64 / 255.0,
                    p[2] as f64 / 255.0,
                )
            })
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| {
                luminance(
                    p[0] as f64 / 255.0,
                    p[1] as f64 / 255.0,
                    p[2] as f64 / 255.0,
                )
            })
            .collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| luminance(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect(),
    };
    GrayImage::new(w, h, data)
}

fn dynamic_to_mask(img: &DynamicImage) -> Result<BinaryMask> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<bool> = match img {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p[0] != 0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| p[0] != 0).collect(),
        other => other
            .to_rgb16()
            .pixels()
            .map(|p| p[0] != 0 || p[1] != 0 || p[2] != 0)
            .collect(),
    };
    BinaryMask::new(w, h, data)
}

fn open(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    Ok(reader.decode()?)
}

/// Loads an 8/16-bit grayscale or color PNG/PGM image.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    dynamic_to_gray(&open(path.as_ref())?)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    dynamic_to_mask(&open(path.as_ref())?)
}

fn mask_buffer(mask: &BinaryMask) -> image::ImageBuffer<Luma<u8>, Vec<u8>> {
    let raw = mask
        .data()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    image::ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("mask buffer length matches dimensions")
}

fn gray_buffer(img: &GrayImage) -> image::ImageBuffer<Luma<u8>, Vec<u8>> {
    let raw = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("image buffer length matches dimensions")
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    mask_buffer(mask).save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Writes an 8-bit grayscale image; the format follows the file extension (`.png` or `.pgm`).
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = gray_buffer(img);
    match ImageFormat::from_path(path) {
        Ok(ImageFormat::Pnm) => {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            PnmEncoder::new(std::io::BufWriter::new(file))
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(
                    buf.as_raw(),
                    buf.width(),
                    buf.height(),
                    ExtendedColorType::L8,
                )?;
        }
        _ => buf.save_with_format(path, ImageFormat::Png)?,
    }
    Ok(())
}

pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    mask_buffer(mask).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    dynamic_to_mask(&img)
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    gray_buffer(img).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    dynamic_to_gray(&image::load_from_memory(bytes)?)
}
