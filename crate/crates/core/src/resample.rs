//! Resampling and false-color rendering.

use alloc::vec::Vec;

use crate::raster::{normalize_min_max, EdgeMap, Grid, HyperCube, RgbImage, SaliencyMap};
use crate::{Error, Result};

/// Source coordinate for output index `i` under corner-aligned sampling.
#[inline]
fn source_position(i: usize, src: usize, dst: usize) -> f64 {
    if dst <= 1 || src <= 1 {
        0.0
    } else {
        (i * (src - 1)) as f64 / (dst - 1) as f64
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    // rounding may overshoot the endpoints by an ulp
    if a <= b {
        v.clamp(a, b)
    } else {
        v.clamp(b, a)
    }
}

/// Bilinear resize of a single row-major plane with corner-aligned sampling:
/// output pixel `i` samples source position `i·(src−1)/(dst−1)`.
pub fn resize_plane(src: &[f64], height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), height * width);
    if out_h == height && out_w == width {
        return src.to_vec();
    }
    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|x| {
            let sx = source_position(x, width, out_w);
            let x0 = (libm::floor(sx) as usize).min(width - 1);
            let x1 = (x0 + 1).min(width - 1);
            (x0, x1, sx - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let sy = source_position(y, height, out_h);
        let y0 = (libm::floor(sy) as usize).min(height - 1);
        let y1 = (y0 + 1).min(height - 1);
        let ty = sy - y0 as f64;
        let row0 = &src[y0 * width..(y0 + 1) * width];
        let row1 = &src[y1 * width..(y1 + 1) * width];
        for &(x0, x1, tx) in &cols {
            let top = lerp(row0[x0], row0[x1], tx);
            let bottom = lerp(row1[x0], row1[x1], tx);
            out.push(lerp(top, bottom, ty));
        }
    }
    out
}

/// Rasters that can be resized with [`resize_bilinear`].
pub trait Resample: Sized {
    fn resized(&self, out_h: usize, out_w: usize) -> Result<Self>;
}

/// Corner-aligned bilinear resize. Constant inputs stay constant and output
/// values never leave `[min(input), max(input)]`.
pub fn resize_bilinear<T: Resample>(raster: &T, out_h: usize, out_w: usize) -> Result<T> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::ZeroDimension);
    }
    raster.resized(out_h, out_w)
}

impl Resample for SaliencyMap {
    fn resized(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let data = resize_plane(self.as_slice(), self.height(), self.width(), out_h, out_w);
        SaliencyMap::new(out_h, out_w, data)
    }
}

impl Resample for EdgeMap {
    fn resized(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let data = resize_plane(self.as_slice(), self.height(), self.width(), out_h, out_w);
        EdgeMap::new(out_h, out_w, data)
    }
}

impl Resample for RgbImage {
    fn resized(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let (h, w) = self.dims();
        let planes = [0, 1, 2].map(|c| resize_plane(self.plane(c), h, w, out_h, out_w));
        RgbImage::new(out_h, out_w, planes)
    }
}

/// Nearest-neighbor resize for categorical rasters. Output pixel `y` takes
/// source row `⌊y·h/out_h⌋`.
pub fn resize_nearest<T: Copy>(grid: &Grid<T>, out_h: usize, out_w: usize) -> Result<Grid<T>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::ZeroDimension);
    }
    let (h, w) = grid.dims();
    Grid::from_fn(out_h, out_w, |y, x| grid.get(y * h / out_h, x * w / out_w))
}

/// Renders three cube bands as an RGB image, each channel min-max normalized
/// on its own.
pub fn false_color(cube: &HyperCube, bands: [usize; 3]) -> Result<RgbImage> {
    for &index in &bands {
        if index >= cube.bands() {
            return Err(Error::BandOutOfRange {
                index,
                bands: cube.bands(),
            });
        }
    }
    let planes = bands.map(|b| {
        let mut plane: Vec<f64> = cube.band(b).iter().map(|&v| v as f64).collect();
        normalize_min_max(&mut plane);
        plane
    });
    RgbImage::new(cube.height(), cube.width(), planes)
}

/// A red/green/blue band choice spread over the spectrum at 3/4, 1/2 and 1/4
/// of the band range.
pub fn default_false_color_bands(bands: usize) -> [usize; 3] {
    let last = bands.saturating_sub(1);
    [last * 3 / 4, last / 2, last / 4]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_map_stays_constant() {
        let m = SaliencyMap::filled(10, 10, 0.7).unwrap();
        let r = resize_bilinear(&m, 5, 5).unwrap();
        assert!(r.as_slice().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn corner_aligned_upsample() {
        let m = SaliencyMap::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = resize_bilinear(&m, 2, 4).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for row in 0..2 {
            for (c, e) in expected.iter().enumerate() {
                assert!((r.get(row, c) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_resize_is_bitwise() {
        let m = SaliencyMap::from_fn(3, 5, |r, c| (r * 7 + c) as f64 / 13.0).unwrap();
        assert_eq!(resize_bilinear(&m, 3, 5).unwrap(), m);
    }

    #[test]
    fn zero_target_is_an_error() {
        let m = SaliencyMap::filled(2, 2, 0.0).unwrap();
        assert_eq!(resize_bilinear(&m, 0, 3), Err(Error::ZeroDimension));
    }

    #[test]
    fn nearest_downsample_then_upsample() {
        let g = Grid::from_fn(2, 2, |r, c| r * 2 + c).unwrap();
        let up = resize_nearest(&g, 4, 4).unwrap();
        assert_eq!(up.get(3, 3), 3);
        assert_eq!(up.get(1, 2), 1);
    }

    #[test]
    fn false_color_rules() {
        let constant = HyperCube::from_fn(3, 3, 4, |_, _, _| 5.0).unwrap();
        let rgb = false_color(&constant, [0, 1, 2]).unwrap();
        assert!(rgb.planes().iter().all(|p| p.iter().all(|&v| v == 0.0)));

        let ramp = HyperCube::from_fn(1, 5, 2, |_, c, b| if b == 1 { c as f32 / 4.0 } else { 1.0 }).unwrap();
        let rgb = false_color(&ramp, [1, 1, 0]).unwrap();
        assert_eq!(rgb.plane(0), &[0.0, 0.25, 0.5, 0.75, 1.0]);

        assert_eq!(
            false_color(&ramp, [2, 0, 0]),
            Err(Error::BandOutOfRange { index: 2, bands: 2 })
        );
    }
}
