//! Binary netpbm rasters. Maps are written as 16-bit P5 (maxval 65535,
//! big-endian samples); reading accepts P5/P6 with any maxval.

use std::fs;
use std::path::Path;

use hypersal_core::{Grid, Label, SaliencyMap, TriMask};

use crate::error::{Error, Result};

pub const MAXVAL: u16 = 65535;

/// Sample stored for each pseudo-label state.
pub const fn label_code(label: Label) -> u16 {
    match label {
        Label::Background => 0,
        Label::Unknown => 32768,
        Label::Foreground => MAXVAL,
    }
}

/// A decoded netpbm raster with samples in `[0, maxval]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub maxval: u16,
    /// Row-major, channels interleaved.
    pub samples: Vec<u16>,
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::format(path, "malformed-pgm", message)
}

/// `round(v · 65535)`; fails outside `[0, 1]`.
pub fn quantize(v: f64) -> Result<u16> {
    if !(0.0..=1.0).contains(&v) {
        return Err(hypersal_core::Error::ValueOutOfRange { value: v }.into());
    }
    Ok((v * f64::from(MAXVAL)).round() as u16)
}

/// The value a map pixel takes after a PGM round trip.
pub fn quantize16(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * f64::from(MAXVAL)).round() / f64::from(MAXVAL)
}

pub fn encode(magic: &str, width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n{MAXVAL}\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Pnm> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let channels = match token(&mut pos).as_deref() {
        Some("P5") => 1,
        Some("P6") => 3,
        Some(other) => return Err(malformed(path, format!("unsupported magic `{other}`; expected P5 or P6"))),
        None => return Err(malformed(path, "empty file")),
    };
    let number = |pos: &mut usize, what: &str| -> Result<usize> {
        token(pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(path, format!("missing or invalid {what}")))
    };
    let width = number(&mut pos, "width")?;
    let height = number(&mut pos, "height")?;
    let maxval = number(&mut pos, "maxval")?;
    if maxval == 0 || maxval > usize::from(MAXVAL) {
        return Err(malformed(path, format!("maxval {maxval} outside 1..=65535")));
    }
    // exactly one whitespace byte separates the header from the samples
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(path, "missing sample data"));
    }
    let data = &bytes[pos + 1..];
    let count = width * height * channels;
    let wide = maxval > 255;
    let need = if wide { count * 2 } else { count };
    if data.len() != need {
        return Err(malformed(
            path,
            format!("expected {need} sample bytes for {width}x{height}, found {}", data.len()),
        ));
    }
    let samples = if wide {
        data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        data.iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Pnm {
        channels,
        height,
        width,
        maxval: maxval as u16,
        samples,
    })
}

pub fn read(path: &Path) -> Result<Pnm> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn map_to_pgm(map: &SaliencyMap) -> Result<Vec<u8>> {
    let samples = map.as_slice().iter().map(|&v| quantize(v)).collect::<Result<Vec<_>>>()?;
    Ok(encode("P5", map.width(), map.height(), &samples))
}

pub fn write_map_pgm(map: &SaliencyMap, path: &Path) -> Result<()> {
    write_bytes(path, &map_to_pgm(map)?)
}

/// Single-channel sample values divided by maxval.
pub fn pnm_to_map(pnm: &Pnm, path: &Path) -> Result<SaliencyMap> {
    if pnm.channels != 1 {
        return Err(malformed(path, "expected a single-channel P5 map"));
    }
    let scale = f64::from(pnm.maxval);
    Ok(SaliencyMap::new(
        pnm.height,
        pnm.width,
        pnm.samples.iter().map(|&s| f64::from(s) / scale).collect(),
    )?)
}

pub fn read_map_pgm(path: &Path) -> Result<SaliencyMap> {
    pnm_to_map(&read(path)?, path)
}

pub fn mask_to_pgm(mask: &TriMask) -> Vec<u8> {
    let samples: Vec<u16> = mask.as_slice().iter().map(|&l| label_code(l)).collect();
    encode("P5", mask.width(), mask.height(), &samples)
}

pub fn write_mask_pgm(mask: &TriMask, path: &Path) -> Result<()> {
    write_bytes(path, &mask_to_pgm(mask))
}

/// Inverse of [`mask_to_pgm`]. Samples are rescaled to 16 bits first; any
/// value other than the three label codes is an error.
pub fn pnm_to_mask(pnm: &Pnm, path: &Path) -> Result<TriMask> {
    if pnm.channels != 1 {
        return Err(malformed(path, "expected a single-channel P5 label mask"));
    }
    let labels = pnm
        .samples
        .iter()
        .map(|&s| {
            let v = (f64::from(s) / f64::from(pnm.maxval) * f64::from(MAXVAL)).round() as u16;
            [Label::Background, Label::Unknown, Label::Foreground]
                .into_iter()
                .find(|&l| label_code(l) == v)
                .ok_or_else(|| malformed(path, format!("sample {s} is not a label code")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid::new(pnm.height, pnm.width, labels)?)
}

pub fn read_mask_pgm(path: &Path) -> Result<TriMask> {
    pnm_to_mask(&read(path)?, path)
}

pub fn binary_to_pgm(mask: &Grid<bool>) -> Vec<u8> {
    let samples: Vec<u16> = mask.as_slice().iter().map(|&b| if b { MAXVAL } else { 0 }).collect();
    encode("P5", mask.width(), mask.height(), &samples)
}

pub fn write_binary_pgm(mask: &Grid<bool>, path: &Path) -> Result<()> {
    write_bytes(path, &binary_to_pgm(mask))
}

/// 16-bit P6 from three planes in `[0, 1]`.
pub fn rgb_to_ppm(rgb: &hypersal_core::RgbImage) -> Result<Vec<u8>> {
    let (h, w) = rgb.dims();
    let mut samples = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        for ch in 0..3 {
            samples.push(quantize(rgb.plane(ch)[i])?);
        }
    }
    Ok(encode("P6", w, h, &samples))
}
