//! Small-ET relabelling and 3-D connected components.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::RegionMask;
use crate::volume::{Geometry, LabelMap, Spatial};

pub const DEFAULT_ET_THRESHOLD: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6 or 26, got {other}"
            ))),
        }
    }

    fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    pub geometry: Geometry,
    /// 0 for background, 1..=K otherwise.
    pub component_id: Vec<u32>,
    /// `component_sizes[k - 1]` is the voxel count of component k.
    pub component_sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.component_sizes.len()
    }
}

/// Labels foreground components; ids follow the raster order (x fastest) of
/// each component's first voxel.
pub fn connected_components(m: &RegionMask, connectivity: Connectivity) -> ComponentLabeling {
    let geom = m.geometry().clone();
    let shape = geom.shape;
    let offsets = connectivity.offsets();
    let mut ids = vec![0u32; geom.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..geom.len() {
        if !m.data()[seed] || ids[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        ids[seed] = id;
        queue.push_back(seed);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let p = geom.coords(i);
            for d in &offsets {
                let q = [0, 1, 2].map(|a| p[a] as i64 + d[a]);
                if (0..3).any(|a| q[a] < 0 || q[a] >= shape[a] as i64) {
                    continue;
                }
                let j = geom.index(q[0] as usize, q[1] as usize, q[2] as usize);
                if m.data()[j] && ids[j] == 0 {
                    ids[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    ComponentLabeling {
        geometry: geom,
        component_id: ids,
        component_sizes: sizes,
        connectivity,
    }
}

/// Relabels every ET voxel (4) as necrosis (1) when the total ET count is
/// strictly below `threshold`.
pub fn et_threshold_relabel(m: &LabelMap, threshold: usize) -> LabelMap {
    if m.count(4) >= threshold {
        return m.clone();
    }
    let data = m
        .data()
        .iter()
        .map(|&l| if l == 4 { 1 } else { l })
        .collect();
    LabelMap::from_valid(m.geometry().clone(), data)
}
