//! 8-bit PNG encoding for masks, grayscale images and label overlays.

use std::io::Cursor;
use std::path::Path;

use super::{GrayImage, Label, LabelImage, Mask};
use crate::error::{Error, Result};

/// Decodes any PNG to luma and keeps pixels brighter than 127.
pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_luma8();
    let (w, h) = img.dimensions();
    Mask::from_bits(
        w as usize,
        h as usize,
        img.as_raw().iter().map(|&v| v > 127).collect(),
    )
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&std::fs::read(path)?)
}

/// Foreground 255, background 0.
pub fn encode_mask(m: &Mask) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = m.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_luma(m.width(), m.height(), &bytes)
}

pub fn write_mask(m: &Mask, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_mask(m)?)?;
    Ok(())
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_luma8();
    let (w, h) = img.dimensions();
    Ok(GrayImage::from_vec_unchecked(
        w as usize,
        h as usize,
        img.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
    ))
}

pub fn encode_gray(g: &GrayImage) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = g.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    encode_luma(g.width(), g.height(), &bytes)
}

fn encode_luma(width: usize, height: usize, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
    }
    Ok(out)
}

/// Indexed-colour PNG whose palette follows [`Label::rgb`].
pub fn encode_overlay(labels: &LabelImage) -> Result<Vec<u8>> {
    let palette: Vec<u8> = Label::ALL.iter().flat_map(|l| l.rgb()).collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, labels.width as u32, labels.height as u32);
        enc.set_color(png::ColorType::Indexed);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_palette(palette);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&labels.labels)?;
    }
    Ok(out)
}

/// Reads back the palette indices of an overlay PNG.
pub fn decode_overlay(bytes: &[u8]) -> Result<LabelImage> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info()?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::input("overlay PNG must be 8-bit indexed colour"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::input("overlay too large"))?];
    let frame = reader.next_frame(&mut buf)?;
    buf.truncate(frame.buffer_size());
    let mut labels = Vec::with_capacity(w * h);
    for row in buf.chunks(frame.line_size).take(h) {
        labels.extend_from_slice(&row[..w]);
    }
    if labels.iter().any(|&l| l > Label::Cej as u8) {
        return Err(Error::input("overlay contains an unknown label index"));
    }
    Ok(LabelImage {
        width: w,
        height: h,
        labels,
    })
}
