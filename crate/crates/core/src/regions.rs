//! Nested BraTS evaluation regions.
//!
//! ET = {4}, TC = {1, 4}, WT = {1, 2, 4}; hence ET ⊆ TC ⊆ WT for every label map.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelMap, Spatial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    ET,
    TC,
    WT,
}

impl Region {
    /// Evaluation order used in reports and CSV columns.
    pub const ALL: [Region; 3] = [Region::ET, Region::TC, Region::WT];

    pub fn member_labels(self) -> &'static [u8] {
        match self {
            Region::ET => &[4],
            Region::TC => &[1, 4],
            Region::WT => &[1, 2, 4],
        }
    }

    #[inline]
    pub fn contains(self, label: u8) -> bool {
        match self {
            Region::ET => label == 4,
            Region::TC => label == 1 || label == 4,
            Region::WT => label != 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::ET => "ET",
            Region::TC => "TC",
            Region::WT => "WT",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary mask, optionally tagged with the region it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub(crate) region: Option<Region>,
    pub(crate) geom: Geometry,
    pub(crate) data: Vec<bool>,
}

impl RegionMask {
    pub fn new(region: Option<Region>, geom: Geometry, data: Vec<bool>) -> Result<Self> {
        if geom.len() != data.len() {
            return Err(Error::InvalidData(format!(
                "expected {} voxels for shape {:?}, got {}",
                geom.len(),
                geom.shape,
                data.len()
            )));
        }
        Ok(RegionMask { region, geom, data })
    }

    pub fn empty(region: Option<Region>, geom: Geometry) -> Self {
        let data = vec![false; geom.len()];
        RegionMask { region, geom, data }
    }

    pub fn from_fn(
        region: Option<Region>,
        geom: Geometry,
        mut f: impl FnMut([usize; 3]) -> bool,
    ) -> Self {
        let data = (0..geom.len()).map(|i| f(geom.coords(i))).collect();
        RegionMask { region, geom, data }
    }

    pub fn region(&self) -> Option<Region> {
        self.region
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.geom.index(x, y, z)]
    }

    pub fn with_region(mut self, region: Option<Region>) -> Self {
        self.region = region;
        self
    }
}

pub fn region_mask(m: &LabelMap, r: Region) -> RegionMask {
    let data = m.data().iter().map(|&l| r.contains(l)).collect();
    RegionMask {
        region: Some(r),
        geom: m.geometry().clone(),
        data,
    }
}

/// Rebuilds a label map from per-region masks.
///
/// Non-nested input is repaired by union first (TC ∪= ET, then WT ∪= TC), so
/// a voxel flagged ET is always labelled 4 whatever the other masks say.
pub fn recompose_labels(et: &RegionMask, tc: &RegionMask, wt: &RegionMask) -> Result<LabelMap> {
    et.geom.ensure_same(&tc.geom)?;
    et.geom.ensure_same(&wt.geom)?;
    let data = et
        .data
        .iter()
        .zip(&tc.data)
        .zip(&wt.data)
        .map(|((&e, &t), &w)| {
            if e {
                4
            } else if t {
                1
            } else if w {
                2
            } else {
                0
            }
        })
        .collect();
    Ok(LabelMap::from_valid(et.geom.clone(), data))
}
