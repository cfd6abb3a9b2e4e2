//! ENVI-style cubes: a text header plus a raw band-sequential little-endian
//! float32 file next to it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hypersal_core::HyperCube;

use crate::error::{Error, Result};

/// Extensions tried, in order, when locating the raw file of a header.
const RAW_EXTENSIONS: [&str; 4] = ["raw", "img", "dat", "bsq"];

#[derive(Clone, Debug, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub header_offset: usize,
    pub wavelengths: Option<Vec<f64>>,
}

fn header_error(path: &Path, message: impl Into<String>) -> Error {
    Error::format(path, "malformed-header", message)
}

/// Splits the header into `(key, value)` pairs. Brace-delimited values may
/// span several lines.
fn header_fields(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    if lines.peek().is_some_and(|l| l.eq_ignore_ascii_case("envi")) {
        lines.next();
    }
    let mut fields = Vec::new();
    while let Some(line) = lines.next() {
        if line.starts_with(';') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| header_error(path, format!("expected `key = value`, found `{line}`")))?;
        let mut value = value.trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                let more = lines
                    .next()
                    .ok_or_else(|| header_error(path, format!("unterminated braces for `{}`", key.trim())))?;
                value.push(' ');
                value.push_str(more);
            }
        }
        fields.push((key.trim().to_ascii_lowercase(), value));
    }
    Ok(fields)
}

fn parse_usize(path: &Path, key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse()
        .map_err(|_| header_error(path, format!("`{key}` must be a non-negative integer, found `{value}`")))
}

/// Parses header text; `path` is only used in error messages.
pub fn parse_header(text: &str, path: &Path) -> Result<EnviHeader> {
    let (mut samples, mut lines, mut bands) = (None, None, None);
    let mut data_type = None;
    let mut interleave = None;
    let mut byte_order = 0;
    let mut header_offset = 0;
    let mut wavelengths = None;
    for (key, value) in header_fields(text, path)? {
        match key.as_str() {
            "samples" => samples = Some(parse_usize(path, &key, &value)?),
            "lines" => lines = Some(parse_usize(path, &key, &value)?),
            "bands" => bands = Some(parse_usize(path, &key, &value)?),
            "data type" => data_type = Some(parse_usize(path, &key, &value)?),
            "byte order" => byte_order = parse_usize(path, &key, &value)?,
            "header offset" => header_offset = parse_usize(path, &key, &value)?,
            "interleave" => interleave = Some(value.to_ascii_lowercase()),
            "wavelength" => {
                let inner = value.trim().trim_start_matches('{').trim_end_matches('}');
                let list = inner
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|_| header_error(path, "wavelength list must hold numbers"))?;
                wavelengths = Some(list);
            }
            _ => {}
        }
    }
    let require = |v: Option<usize>, key: &str| v.ok_or_else(|| header_error(path, format!("missing `{key}`")));
    let header = EnviHeader {
        samples: require(samples, "samples")?,
        lines: require(lines, "lines")?,
        bands: require(bands, "bands")?,
        header_offset,
        wavelengths,
    };
    match data_type {
        Some(4) => {}
        Some(t) => {
            return Err(Error::format(
                path,
                "unsupported-data-type",
                format!("data type {t} is not supported; only 4 (float32) is"),
            ))
        }
        None => return Err(header_error(path, "missing `data type`")),
    }
    match interleave.as_deref() {
        Some("bsq") => {}
        Some(other) => {
            return Err(Error::format(
                path,
                "unsupported-interleave",
                format!("interleave `{other}` is not supported; only bsq is"),
            ))
        }
        None => return Err(header_error(path, "missing `interleave`")),
    }
    if byte_order != 0 {
        return Err(Error::format(
            path,
            "unsupported-byte-order",
            "only little-endian data (byte order = 0) is supported",
        ));
    }
    Ok(header)
}

pub fn read_header(path: &Path) -> Result<EnviHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_header(&text, path)
}

/// Locates the raw data next to `header`: the header path without its
/// extension, then with each of `.raw`, `.img`, `.dat`, `.bsq`.
pub fn raw_path(header: &Path) -> Result<PathBuf> {
    let stem = header.with_extension("");
    std::iter::once(stem.clone())
        .chain(RAW_EXTENSIONS.iter().map(|ext| header.with_extension(ext)))
        .find(|p| p != header && p.is_file())
        .ok_or(Error::Missing {
            path: header.with_extension(RAW_EXTENSIONS[0]),
        })
}

pub fn read_cube(path: &Path) -> Result<HyperCube> {
    let header = read_header(path)?;
    let raw = raw_path(path)?;
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let count = header.samples * header.lines * header.bands;
    let payload = bytes.get(header.header_offset..).unwrap_or(&[]);
    if payload.len() != count * 4 {
        return Err(Error::format(
            &raw,
            "size-mismatch",
            format!(
                "header declares {}x{}x{} = {count} floats but the raw file holds {} bytes ({} floats)",
                header.lines,
                header.samples,
                header.bands,
                payload.len(),
                payload.len() / 4
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let cube = HyperCube::new(header.lines, header.samples, header.bands, data)?;
    match header.wavelengths {
        Some(w) => Ok(cube.with_wavelengths(w)?),
        None => Ok(cube),
    }
}

pub fn header_text(cube: &HyperCube) -> String {
    let mut s = String::from("ENVI\n");
    let _ = writeln!(s, "samples = {}", cube.width());
    let _ = writeln!(s, "lines = {}", cube.height());
    let _ = writeln!(s, "bands = {}", cube.bands());
    s.push_str("header offset = 0\nfile type = ENVI Standard\ndata type = 4\ninterleave = bsq\nbyte order = 0\n");
    if let Some(w) = cube.wavelengths() {
        let list: Vec<String> = w.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "wavelength = {{{}}}", list.join(", "));
    }
    s
}

/// Writes `path` (the header) and the raw data as `path` with extension `.raw`.
pub fn write_cube(cube: &HyperCube, path: &Path) -> Result<()> {
    let raw = path.with_extension(RAW_EXTENSIONS[0]);
    let bytes: Vec<u8> = cube.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    fs::write(path, header_text(cube)).map_err(|e| Error::io(path, e))
}
