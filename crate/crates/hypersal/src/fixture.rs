//! Synthetic scenes with known ground truth: a bright square object on a
//! flat background.

use std::path::Path;

use hypersal_core::{Grid, HyperCube, PointSet, SaliencyMap};

use crate::error::Result;
use crate::io;

pub const SIZE: usize = 128;
pub const BANDS: usize = 16;
/// The object occupies rows and columns `OBJECT.0..OBJECT.1`.
pub const OBJECT: (usize, usize) = (44, 84);
pub const SALIENT_POINT: (usize, usize) = (64, 64);
pub const BACKGROUND_POINT: (usize, usize) = (5, 5);

#[derive(Clone, Debug)]
pub struct Scene {
    pub cube: HyperCube,
    pub points: PointSet,
    pub gt: Grid<bool>,
}

impl Scene {
    pub fn gt_map(&self) -> SaliencyMap {
        let (h, w) = self.gt.dims();
        SaliencyMap::new(h, w, self.gt.as_slice().iter().map(|&g| f64::from(u8::from(g))).collect())
            .expect("fixture dims are valid")
    }

    /// Writes `<stem>.hdr` + `<stem>.raw`, `<stem>.points.json` and
    /// `<stem>.gt.pgm` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_cube(&self.cube, &dir.join(format!("{stem}.hdr")))?;
        io::write_points(&self.points, &dir.join(format!("{stem}.points.json")))?;
        io::write_map_pgm(&self.gt_map(), &dir.join(format!("{stem}.gt.pgm")))
    }
}

fn inside(r: usize, c: usize) -> bool {
    (OBJECT.0..OBJECT.1).contains(&r) && (OBJECT.0..OBJECT.1).contains(&c)
}

fn background_spectrum(b: usize) -> f32 {
    1.0 + 0.25 * (b as f32 * 0.4).sin()
}

fn build(object_spectrum: impl Fn(usize) -> f32) -> Scene {
    let cube = HyperCube::from_fn(SIZE, SIZE, BANDS, |r, c, b| {
        if inside(r, c) {
            object_spectrum(b)
        } else {
            background_spectrum(b)
        }
    })
    .expect("fixture cube is valid");
    let points = PointSet::new((SIZE, SIZE), vec![SALIENT_POINT], BACKGROUND_POINT).expect("fixture points are valid");
    let gt = Grid::from_fn(SIZE, SIZE, inside).expect("fixture dims are valid");
    Scene { cube, points, gt }
}

/// Object with a spectrum of a different shape and a visible color change.
pub fn square_scene() -> Scene {
    build(|b| 0.6 + 0.05 * b as f32)
}

/// Object identical to the background in the three default false-color bands
/// and different in every other band, so its contour is invisible in the
/// false-color rendering.
pub fn overexposed_scene() -> Scene {
    let shown = hypersal_core::resample::default_false_color_bands(BANDS);
    build(move |b| {
        if shown.contains(&b) {
            background_spectrum(b)
        } else {
            0.6 + 0.05 * b as f32
        }
    })
}
