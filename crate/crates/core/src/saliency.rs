//! Spectral saliency: a Gaussian pyramid over the cube and center-surround
//! spectral angle distances between fine and coarse layers.

use alloc::vec::Vec;

use crate::par::for_each_row;
use crate::raster::{ensure_dims, normalize_min_max, HyperCube, SaliencyMap};
use crate::resample::resize_plane;
use crate::{Error, Result};

/// Default number of pyramid layers.
pub const DEFAULT_LEVELS: usize = 9;

/// `(center, surround)` layer pairs: center in {2, 3, 4}, surround at
/// center + 3 and center + 4.
pub const CENTER_SURROUND_PAIRS: [(usize, usize); 6] = [(2, 5), (2, 6), (3, 6), (3, 7), (4, 7), (4, 8)];

/// Separable 5-tap binomial kernel; the 2-D kernel is the outer product of
/// the taps with themselves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianKernel {
    taps: [f64; 5],
}

impl GaussianKernel {
    pub const fn binomial() -> Self {
        Self {
            taps: [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0],
        }
    }

    pub fn taps(&self) -> [f64; 5] {
        self.taps
    }

    /// The 5×5 kernel `gᵀg`.
    pub fn matrix(&self) -> [[f64; 5]; 5] {
        let g = self.taps;
        g.map(|a| g.map(|b| a * b))
    }
}

impl Default for GaussianKernel {
    fn default() -> Self {
        Self::binomial()
    }
}

/// A band-sequential spectral raster in 64-bit floats; pyramid layers use
/// this so that angles between nearly parallel spectra stay accurate.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension);
        }
        if data.len() != height * width * bands {
            return Err(Error::LengthMismatch {
                expected: height * width * bands,
                found: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[band * plane..(band + 1) * plane]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear resize of every band.
    pub fn resized(&self, out_h: usize, out_w: usize) -> Self {
        let mut data = Vec::with_capacity(out_h * out_w * self.bands);
        for b in 0..self.bands {
            data.extend(resize_plane(self.band(b), self.height, self.width, out_h, out_w));
        }
        Self {
            height: out_h,
            width: out_w,
            bands: self.bands,
            data,
        }
    }
}

impl From<&HyperCube> for SpectralGrid {
    fn from(cube: &HyperCube) -> Self {
        Self {
            height: cube.height(),
            width: cube.width(),
            bands: cube.bands(),
            data: cube.as_slice().iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Blurs every band with the 5×5 kernel under edge-replicate padding and keeps
/// the even rows and columns. Output is `⌈h/2⌉ × ⌈w/2⌉`.
pub fn gaussian_downsample(layer: &SpectralGrid, kernel: &GaussianKernel) -> SpectralGrid {
    let (h, w) = layer.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let g = kernel.taps();
    let clamp = |i: isize, n: usize| -> usize { i.clamp(0, n as isize - 1) as usize };

    let mut data = Vec::with_capacity(oh * ow * layer.bands);
    let mut horizontal = alloc::vec![0.0; h * ow];
    for b in 0..layer.bands {
        let src = layer.band(b);
        for r in 0..h {
            let row = &src[r * w..(r + 1) * w];
            for oc in 0..ow {
                let c = (2 * oc) as isize;
                let mut acc = 0.0;
                for (k, &gk) in g.iter().enumerate() {
                    acc += gk * row[clamp(c + k as isize - 2, w)];
                }
                horizontal[r * ow + oc] = acc;
            }
        }
        for or in 0..oh {
            let r = (2 * or) as isize;
            for oc in 0..ow {
                let mut acc = 0.0;
                for (k, &gk) in g.iter().enumerate() {
                    acc += gk * horizontal[clamp(r + k as isize - 2, h) * ow + oc];
                }
                data.push(acc);
            }
        }
    }
    SpectralGrid {
        height: oh,
        width: ow,
        bands: layer.bands,
        data,
    }
}

/// Gaussian pyramid; layer 0 is the input.
#[derive(Clone, Debug)]
pub struct Pyramid {
    layers: Vec<SpectralGrid>,
}

impl Pyramid {
    pub fn levels(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, index: usize) -> &SpectralGrid {
        &self.layers[index]
    }

    pub fn layers(&self) -> &[SpectralGrid] {
        &self.layers
    }
}

/// Builds a `levels`-layer pyramid. Dimensions halve with ceiling, so layers
/// bottom out at 1×1 rather than vanishing.
pub fn build_pyramid(cube: &HyperCube, levels: usize) -> Result<Pyramid> {
    if levels == 0 {
        return Err(Error::TooFewLevels {
            levels,
            required: 1,
        });
    }
    let kernel = GaussianKernel::binomial();
    let mut layers = Vec::with_capacity(levels);
    layers.push(SpectralGrid::from(cube));
    for l in 1..levels {
        let next = gaussian_downsample(&layers[l - 1], &kernel);
        layers.push(next);
    }
    Ok(Pyramid { layers })
}

/// Per-pixel spectral angle `arccos(⟨c, s⟩ / (|c||s|))` between two layers of
/// equal shape. Zero-norm spectra give angle 0.
pub fn spectral_angle_map(center: &SpectralGrid, surround: &SpectralGrid) -> Result<SaliencyMap> {
    ensure_dims(center.dims(), surround.dims())?;
    if center.bands != surround.bands {
        return Err(Error::ShapeMismatch("center and surround band counts differ"));
    }
    let (h, w) = center.dims();
    let plane = h * w;
    let bands = center.bands;
    let mut out = alloc::vec![0.0; plane];
    for_each_row(&mut out, w, |r, row| {
        for (c, slot) in row.iter_mut().enumerate() {
            let i = r * w + c;
            let (mut dot, mut nc, mut ns) = (0.0, 0.0, 0.0);
            for b in 0..bands {
                let x = center.data[b * plane + i];
                let y = surround.data[b * plane + i];
                dot += x * y;
                nc += x * x;
                ns += y * y;
            }
            *slot = if nc == 0.0 || ns == 0.0 {
                0.0
            } else {
                libm::acos((dot / libm::sqrt(nc * ns)).clamp(-1.0, 1.0))
            };
        }
    });
    SaliencyMap::new(h, w, out)
}

/// Spectral saliency with [`DEFAULT_LEVELS`] pyramid layers.
pub fn spectral_saliency(cube: &HyperCube) -> Result<SaliencyMap> {
    spectral_saliency_with_levels(cube, DEFAULT_LEVELS)
}

/// Sums the center-surround angle maps for every pair in
/// [`CENTER_SURROUND_PAIRS`] whose surround layer exists, each upsampled to
/// full resolution, then min-max normalizes the sum.
///
/// Surround layers are bilinearly upsampled to the center layer before the
/// angle is taken; each angle map is bilinearly upsampled to `H×W`.
pub fn spectral_saliency_with_levels(cube: &HyperCube, levels: usize) -> Result<SaliencyMap> {
    let pairs: Vec<(usize, usize)> = CENTER_SURROUND_PAIRS
        .iter()
        .copied()
        .filter(|&(_, s)| s < levels)
        .collect();
    if pairs.is_empty() {
        return Err(Error::TooFewLevels {
            levels,
            required: CENTER_SURROUND_PAIRS[0].1 + 1,
        });
    }
    let pyramid = build_pyramid(cube, levels)?;
    let (h, w) = cube.dims();
    let mut sum = alloc::vec![0.0; h * w];
    for (c, s) in pairs {
        let center = pyramid.layer(c);
        let (ch, cw) = center.dims();
        let surround = pyramid.layer(s).resized(ch, cw);
        let angles = spectral_angle_map(center, &surround)?;
        let full = resize_plane(angles.as_slice(), ch, cw, h, w);
        for (acc, v) in sum.iter_mut().zip(full) {
            *acc += v;
        }
    }
    normalize_min_max(&mut sum);
    SaliencyMap::new(h, w, sum)
}
