//! Sliding-window decomposition and weighted stitching for patch-wise inference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BBox, Geometry, ProbMap, Shape, Spatial, Volume};

pub const DEFAULT_PATCH: Shape = [128, 128, 128];
pub const DEFAULT_SIGMA_FRAC: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub volume_shape: Shape,
    pub patch_shape: Shape,
    pub stride: Shape,
    /// Zero padding appended at the far end of each axis when the volume is
    /// smaller than the patch.
    pub padding: Shape,
    /// Windows in padded coordinates, z outermost and x innermost.
    pub windows: Vec<BBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Weighting {
    Uniform,
    Gaussian { sigma_frac: f64 },
}

impl Default for Weighting {
    fn default() -> Self {
        Weighting::Gaussian {
            sigma_frac: DEFAULT_SIGMA_FRAC,
        }
    }
}

/// Window starts 0, s, 2s, … with the last clamped to `dim - patch`.
fn axis_starts(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = dim - patch;
    let mut starts: Vec<usize> = (0..=last).step_by(stride).collect();
    if *starts.last().unwrap() != last {
        starts.push(last);
    }
    starts
}

/// Half the patch along each axis.
pub fn default_stride(patch_shape: Shape) -> Shape {
    patch_shape.map(|p| (p / 2).max(1))
}

pub fn plan_tiling(volume_shape: Shape, patch_shape: Shape, stride: Shape) -> Result<TilingPlan> {
    if volume_shape.contains(&0) || patch_shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "empty volume {volume_shape:?} or patch {patch_shape:?}"
        )));
    }
    if (0..3).any(|a| stride[a] == 0 || stride[a] > patch_shape[a]) {
        return Err(Error::InvalidArgument(format!(
            "stride {stride:?} must lie in [1, patch {patch_shape:?}]"
        )));
    }
    let padded = [0, 1, 2].map(|a| volume_shape[a].max(patch_shape[a]));
    let padding = [0, 1, 2].map(|a| padded[a] - volume_shape[a]);
    let starts = [0, 1, 2].map(|a| axis_starts(padded[a], patch_shape[a], stride[a]));
    let mut windows = Vec::with_capacity(starts.iter().map(Vec::len).product());
    for &z in &starts[2] {
        for &y in &starts[1] {
            for &x in &starts[0] {
                windows.push(BBox::from_origin([x, y, z], patch_shape)?);
            }
        }
    }
    Ok(TilingPlan {
        volume_shape,
        patch_shape,
        stride,
        padding,
        windows,
    })
}

impl TilingPlan {
    pub fn padded_shape(&self) -> Shape {
        [0, 1, 2].map(|a| self.volume_shape[a] + self.padding[a])
    }

    fn window(&self, index: usize) -> Result<&BBox> {
        self.windows.get(index).ok_or(Error::IndexOutOfRange {
            index,
            count: self.windows.len(),
        })
    }

    fn check_volume(&self, geom: &Geometry) -> Result<()> {
        if geom.shape != self.volume_shape {
            return Err(Error::PlanMismatch(format!(
                "volume shape {:?} but plan was made for {:?}",
                geom.shape, self.volume_shape
            )));
        }
        Ok(())
    }

    /// Per-voxel patch weights in x-fastest order.
    pub fn weights(&self, weighting: Weighting) -> Result<Vec<f64>> {
        let [px, py, pz] = self.patch_shape;
        match weighting {
            Weighting::Uniform => Ok(vec![1.0; px * py * pz]),
            Weighting::Gaussian { sigma_frac } => {
                if !(sigma_frac.is_finite() && sigma_frac > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "sigma_frac {sigma_frac} must be positive"
                    )));
                }
                let axis = |p: usize| -> Vec<f64> {
                    let c = (p as f64 - 1.0) / 2.0;
                    let sigma = sigma_frac * p as f64;
                    (0..p)
                        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
                        .collect()
                };
                let (wx, wy, wz) = (axis(px), axis(py), axis(pz));
                let mut w = Vec::with_capacity(px * py * pz);
                for z in &wz {
                    for y in &wy {
                        for x in &wx {
                            // underflow far from the centre would make the weight vanish
                            w.push((x * y * z).max(f64::MIN_POSITIVE));
                        }
                    }
                }
                Ok(w)
            }
        }
    }
}

/// Grids that can be cut into plan windows.
pub trait Tileable: Spatial {}
impl Tileable for Volume {}
impl Tileable for ProbMap {}

/// Copies window `index` out of `v`; padding reads as background.
pub fn extract<T: Tileable>(v: &T, plan: &TilingPlan, index: usize) -> Result<T> {
    plan.check_volume(v.geometry())?;
    let w = plan.window(index)?;
    v.crop_padded(w.lo.map(|c| c as i64), plan.patch_shape)
}

/// Weighted average of overlapping patch predictions, accumulated in window
/// order and renormalised per voxel.
pub fn stitch(patches: &[ProbMap], plan: &TilingPlan, weighting: Weighting) -> Result<ProbMap> {
    if patches.len() != plan.windows.len() {
        return Err(Error::PlanMismatch(format!(
            "{} patches for {} windows",
            patches.len(),
            plan.windows.len()
        )));
    }
    for (i, p) in patches.iter().enumerate() {
        if p.shape() != plan.patch_shape {
            return Err(Error::PlanMismatch(format!(
                "patch {i} has shape {:?}, plan patch is {:?}",
                p.shape(),
                plan.patch_shape
            )));
        }
        p.geometry().ensure_same(&Geometry {
            shape: plan.patch_shape,
            ..patches[0].geometry().clone()
        })?;
    }
    let weights = plan.weights(weighting)?;
    let padded = plan.padded_shape();
    let n_pad: usize = padded.iter().product();
    let [px, py, pz] = plan.patch_shape;
    let n_patch = px * py * pz;
    let mut acc = vec![0.0; n_pad * ProbMap::CHANNELS];
    let mut norm = vec![0.0; n_pad];

    for (w, patch) in plan.windows.iter().zip(patches) {
        for z in 0..pz {
            for y in 0..py {
                let prow = (y + py * z) * px;
                let vrow = w.lo[0] + padded[0] * (w.lo[1] + y + padded[1] * (w.lo[2] + z));
                for x in 0..px {
                    let wt = weights[prow + x];
                    norm[vrow + x] += wt;
                    for c in 0..ProbMap::CHANNELS {
                        acc[c * n_pad + vrow + x] += wt * patch.data()[c * n_patch + prow + x];
                    }
                }
            }
        }
    }
    for c in 0..ProbMap::CHANNELS {
        for i in 0..n_pad {
            acc[c * n_pad + i] /= norm[i];
        }
    }

    // window 0 starts at the volume origin
    let g0 = patches[0].geometry();
    let full = Geometry {
        shape: padded,
        ..g0.clone()
    };
    let stitched = ProbMap::from_unnormalized(full, acc);
    stitched.crop(&BBox::full(plan.volume_shape))
}
