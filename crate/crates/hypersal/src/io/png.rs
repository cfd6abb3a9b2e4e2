//! 8-bit PNG previews for the browser. PGM stays the canonical map format.

use hypersal_core::{RgbImage, SaliencyMap};

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().expect("in-memory PNG header");
    writer.write_image_data(data).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG finish");
    out
}

/// Grayscale PNG; values are clamped to `[0, 1]`.
pub fn gray_png(map: &SaliencyMap) -> Vec<u8> {
    let data: Vec<u8> = map.as_slice().iter().map(|&v| to_byte(v)).collect();
    encode(map.width(), map.height(), png::ColorType::Grayscale, &data)
}

pub fn rgb_png(rgb: &RgbImage) -> Vec<u8> {
    let (h, w) = rgb.dims();
    let data: Vec<u8> = (0..h * w)
        .flat_map(|i| (0..3).map(move |ch| to_byte(rgb.plane(ch)[i])))
        .collect();
    encode(w, h, png::ColorType::Rgb, &data)
}
