use std::fs;
use std::path::Path;

use hypersal_core::{Coord, PointSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk form of a [`PointSet`]: `{"frame":[H,W],"salient":[[r,c],...],"background":[r,c]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsFile {
    pub frame: (usize, usize),
    pub salient: Vec<Coord>,
    pub background: Coord,
}

impl PointsFile {
    pub fn validate(&self) -> Result<PointSet> {
        Ok(PointSet::new(self.frame, self.salient.clone(), self.background)?)
    }
}

impl From<&PointSet> for PointsFile {
    fn from(p: &PointSet) -> Self {
        Self {
            frame: p.frame(),
            salient: p.salient().to_vec(),
            background: p.background(),
        }
    }
}

pub fn parse_points(text: &str, path: &Path) -> Result<PointSet> {
    let file: PointsFile =
        serde_json::from_str(text).map_err(|e| Error::format(path, "malformed-points", e.to_string()))?;
    file.validate()
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_points(&text, path)
}

pub fn points_json(points: &PointSet) -> String {
    serde_json::to_string(&PointsFile::from(points)).expect("points serialize")
}

pub fn write_points(points: &PointSet, path: &Path) -> Result<()> {
    fs::write(path, points_json(points)).map_err(|e| Error::io(path, e))
}
