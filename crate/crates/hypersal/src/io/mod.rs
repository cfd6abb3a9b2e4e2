//! File formats: ENVI cubes, 16-bit netpbm maps and masks, points JSON and
//! PNG previews.

pub mod envi;
pub mod png;
pub mod pnm;
pub mod points;

use std::path::Path;

use hypersal_core::resample::{default_false_color_bands, false_color};
use hypersal_core::{EdgeMap, RgbImage};

use crate::error::Result;

pub use envi::{read_cube, read_header, write_cube};
pub use pnm::{quantize16, read_map_pgm, read_mask_pgm, write_map_pgm, write_mask_pgm};
pub use points::{read_points, write_points};

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Loads a false-color guidance image from
///
/// - a 16-bit (or 8-bit) P6 image,
/// - a P5 image, replicated to three channels,
/// - an ENVI header, rendered with the default band triple,
/// - `r.pgm,g.pgm,b.pgm`, three single-channel planes.
pub fn read_rgb(spec: &str) -> Result<RgbImage> {
    let parts: Vec<&str> = spec.split(',').collect();
    if let [r, g, b] = parts[..] {
        let maps = [r, g, b].map(|p| read_map_pgm(Path::new(p.trim())));
        let [r, g, b] = maps;
        let (r, g, b) = (r?, g?, b?);
        return Ok(RgbImage::new(
            r.height(),
            r.width(),
            [r.into_vec(), g.into_vec(), b.into_vec()],
        )?);
    }
    let path = Path::new(spec);
    if has_extension(path, "hdr") {
        let cube = read_cube(path)?;
        return Ok(false_color(&cube, default_false_color_bands(cube.bands()))?);
    }
    let pnm = pnm::read(path)?;
    let scale = f64::from(pnm.maxval);
    let n = pnm.height * pnm.width;
    let planes: [Vec<f64>; 3] = if pnm.channels == 3 {
        [0, 1, 2].map(|ch| (0..n).map(|i| f64::from(pnm.samples[i * 3 + ch]) / scale).collect())
    } else {
        let gray: Vec<f64> = pnm.samples.iter().map(|&s| f64::from(s) / scale).collect();
        [gray.clone(), gray.clone(), gray]
    };
    Ok(RgbImage::new(pnm.height, pnm.width, planes)?)
}

/// A precomputed edge map stored as a P5 image, values scaled to `[0, 1]`.
pub fn read_edge_map(path: &Path) -> Result<EdgeMap> {
    let map = read_map_pgm(path)?;
    let (h, w) = map.dims();
    Ok(EdgeMap::new(h, w, map.into_vec())?)
}
