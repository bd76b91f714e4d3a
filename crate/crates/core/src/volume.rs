//! Volumetric grids and their shared geometry.
//!
//! Every grid stores its voxels in a flat buffer with x varying fastest,
//! i.e. `index = x + nx * (y + ny * z)`, which is the on-disk order of NIfTI-1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::RegionMask;

pub type Shape = [usize; 3];

/// BraTS label codes in channel order: background, NCR, ED, ET.
pub const LABELS: [u8; 4] = [0, 1, 2, 4];

/// Tolerance on the per-voxel channel sum of a [`ProbMap`].
pub const PROB_SUM_TOL: f64 = 1e-6;

pub fn is_label(v: u8) -> bool {
    matches!(v, 0 | 1 | 2 | 4)
}

/// Channel index of a label in [`LABELS`] order.
pub fn channel_of(label: u8) -> Option<usize> {
    LABELS.iter().position(|&l| l == label)
}

/// Orientation fields carried through NIfTI round trips without being interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Xform {
    pub qform_code: i16,
    pub sform_code: i16,
    pub qfac: f32,
    pub quatern: [f32; 3],
    pub srow: [[f32; 4]; 3],
}

impl Default for Xform {
    fn default() -> Self {
        Xform {
            qform_code: 0,
            sform_code: 0,
            qfac: 1.0,
            quatern: [0.0; 3],
            srow: [[0.0; 4]; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub shape: Shape,
    /// Millimetres per voxel along each axis.
    pub spacing: [f64; 3],
    /// World position (mm) of voxel (0, 0, 0).
    pub origin: [f64; 3],
    #[serde(default)]
    pub xform: Xform,
}

impl Geometry {
    pub fn new(shape: Shape, spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::InvalidDimensions(format!(
                "shape {shape:?} has a zero extent"
            )));
        }
        if shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).is_none() {
            return Err(Error::InvalidDimensions(format!("shape {shape:?} overflows")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidDimensions(format!(
                "spacing {spacing:?} must be positive and finite"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidDimensions(format!(
                "origin {origin:?} must be finite"
            )));
        }
        Ok(Geometry {
            shape,
            spacing,
            origin,
            xform: Xform::default(),
        })
    }

    /// Unit spacing, zero origin.
    pub fn with_shape(shape: Shape) -> Result<Self> {
        Self::new(shape, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Same shape and (up to float32 header precision) the same spacing.
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.shape == other.shape
            && self
                .spacing
                .iter()
                .zip(&other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()))
    }

    pub(crate) fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "shape {:?} spacing {:?} vs shape {:?} spacing {:?}",
                self.shape, self.spacing, other.shape, other.spacing
            )))
        }
    }

    /// Geometry of a sub-grid whose voxel (0,0,0) sits at `offset` in this grid.
    fn shifted(&self, offset: [i64; 3], shape: Shape) -> Geometry {
        let mut origin = self.origin;
        for a in 0..3 {
            origin[a] += offset[a] as f64 * self.spacing[a];
        }
        Geometry {
            shape,
            spacing: self.spacing,
            origin,
            xform: self.xform,
        }
    }
}

/// Inclusive voxel-index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| lo[a] > hi[a]) {
            return Err(Error::InvalidArgument(format!(
                "bbox lo {lo:?} exceeds hi {hi:?}"
            )));
        }
        Ok(BBox { lo, hi })
    }

    /// Box of `size` voxels starting at `lo`.
    pub fn from_origin(lo: [usize; 3], size: Shape) -> Result<Self> {
        if size.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("empty bbox size {size:?}")));
        }
        Ok(BBox {
            lo,
            hi: [lo[0] + size[0] - 1, lo[1] + size[1] - 1, lo[2] + size[2] - 1],
        })
    }

    pub fn full(shape: Shape) -> Self {
        BBox {
            lo: [0; 3],
            hi: [shape[0] - 1, shape[1] - 1, shape[2] - 1],
        }
    }

    pub fn size(&self) -> Shape {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn fits(&self, shape: Shape) -> bool {
        (0..3).all(|a| self.hi[a] < shape[a])
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }

    fn check_fits(&self, shape: Shape) -> Result<()> {
        if self.fits(shape) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                lo: self.lo,
                hi: self.hi,
                shape,
            })
        }
    }

    /// Signed start of a `size`-shaped box centred on this box. The result may
    /// reach outside the volume; use [`Spatial::crop_padded`] to read it.
    pub fn centered_start(&self, size: Shape) -> [i64; 3] {
        let mut start = [0i64; 3];
        for a in 0..3 {
            let have = (self.hi[a] - self.lo[a] + 1) as i64;
            start[a] = self.lo[a] as i64 - (size[a] as i64 - have).div_euclid(2);
        }
        start
    }
}

/// Tightest box around all voxels satisfying `pred`, or `None` when none do.
pub(crate) fn bbox_where(shape: Shape, mut pred: impl FnMut(usize) -> bool) -> Option<BBox> {
    let [nx, ny, nz] = shape;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut idx = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if pred(idx) {
                    let p = [x, y, z];
                    for a in 0..3 {
                        lo[a] = lo[a].min(p[a]);
                        hi[a] = hi[a].max(p[a]);
                    }
                }
                idx += 1;
            }
        }
    }
    (lo[0] != usize::MAX).then_some(BBox { lo, hi })
}

/// Copies a `dst_shape` window out of `src`, where destination voxel (0,0,0)
/// corresponds to source voxel `offset`. Voxels outside the source read `fill`.
pub(crate) fn window_copy<T: Copy>(
    src: &[T],
    src_shape: Shape,
    dst_shape: Shape,
    offset: [i64; 3],
    fill: T,
) -> Vec<T> {
    let [dx, dy, dz] = dst_shape;
    let [sx, sy, sz] = src_shape;
    let mut out = vec![fill; dx * dy * dz];
    // x-range overlap is the same for every row
    let x0 = (-offset[0]).clamp(0, dx as i64) as usize;
    let x1 = (sx as i64 - offset[0]).clamp(0, dx as i64) as usize;
    if x0 >= x1 {
        return out;
    }
    for z in 0..dz {
        let zs = z as i64 + offset[2];
        if zs < 0 || zs >= sz as i64 {
            continue;
        }
        for y in 0..dy {
            let ys = y as i64 + offset[1];
            if ys < 0 || ys >= sy as i64 {
                continue;
            }
            let src_row = (ys as usize + sy * zs as usize) * sx;
            let xs0 = (x0 as i64 + offset[0]) as usize;
            let dst_row = (y + dy * z) * dx;
            out[dst_row + x0..dst_row + x1]
                .copy_from_slice(&src[src_row + xs0..src_row + xs0 + (x1 - x0)]);
        }
    }
    out
}

/// Spatial sub-windowing shared by all grid kinds.
pub trait Spatial: Sized {
    fn geometry(&self) -> &Geometry;

    /// Reads a `size`-shaped window starting at signed voxel `start`; voxels
    /// outside the grid take the kind's background value.
    fn crop_padded(&self, start: [i64; 3], size: Shape) -> Result<Self>;

    fn shape(&self) -> Shape {
        self.geometry().shape
    }

    /// Output shape is `b.size()`; the origin moves by `b.lo * spacing`.
    fn crop(&self, b: &BBox) -> Result<Self> {
        b.check_fits(self.shape())?;
        self.crop_padded(b.lo.map(|v| v as i64), b.size())
    }

    /// Inverse of [`Spatial::crop`]: places `self` at `b` inside a background
    /// grid of `full_shape`.
    fn embed(&self, b: &BBox, full_shape: Shape) -> Result<Self> {
        if b.size() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: b.size(),
                actual: self.shape(),
            });
        }
        if !b.fits(full_shape) {
            return Err(Error::ShapeMismatch {
                expected: full_shape,
                actual: [b.hi[0] + 1, b.hi[1] + 1, b.hi[2] + 1],
            });
        }
        self.crop_padded(b.lo.map(|v| -(v as i64)), full_shape)
    }
}

fn check_len(geom: &Geometry, len: usize) -> Result<()> {
    if geom.len() != len {
        return Err(Error::InvalidData(format!(
            "expected {} voxels for shape {:?}, got {}",
            geom.len(),
            geom.shape,
            len
        )));
    }
    Ok(())
}

/// Scalar volume (intensity, distance, weight).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geom: Geometry,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(geom: Geometry, data: Vec<f64>) -> Result<Self> {
        check_len(&geom, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at voxel {i}"
            )));
        }
        Ok(Volume { geom, data })
    }

    pub fn zeros(geom: Geometry) -> Self {
        let data = vec![0.0; geom.len()];
        Volume { geom, data }
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut([usize; 3]) -> f64) -> Result<Self> {
        let data = (0..geom.len()).map(|i| f(geom.coords(i))).collect();
        Self::new(geom, data)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geom.index(x, y, z)]
    }

    /// Same geometry, values replaced. Caller guarantees the length and finiteness.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Volume {
        debug_assert_eq!(data.len(), self.data.len());
        Volume {
            geom: self.geom.clone(),
            data,
        }
    }
}

impl Spatial for Volume {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn crop_padded(&self, start: [i64; 3], size: Shape) -> Result<Self> {
        let geom = self.geom.shifted(start, size);
        geom_ok(&geom)?;
        let data = window_copy(&self.data, self.geom.shape, size, start, 0.0);
        Ok(Volume { geom, data })
    }
}

fn geom_ok(geom: &Geometry) -> Result<()> {
    Geometry::new(geom.shape, geom.spacing, geom.origin).map(|_| ())
}

/// Tightest box around the nonzero voxels of `v`.
pub fn nonzero_bbox(v: &Volume) -> Result<BBox> {
    bbox_where(v.geom.shape, |i| v.data[i] != 0.0).ok_or(Error::EmptyVolume)
}

/// BraTS label volume with codes in {0, 1, 2, 4}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    geom: Geometry,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(geom: Geometry, data: Vec<u8>) -> Result<Self> {
        check_len(&geom, data.len())?;
        if let Some(&bad) = data.iter().find(|&&v| !is_label(v)) {
            return Err(Error::InvalidLabel(bad as f64));
        }
        Ok(LabelMap { geom, data })
    }

    pub fn zeros(geom: Geometry) -> Self {
        let data = vec![0; geom.len()];
        LabelMap { geom, data }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.geom.index(x, y, z)]
    }

    pub fn count(&self, label: u8) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }

    /// Builds a map from values already known to be valid labels.
    pub(crate) fn from_valid(geom: Geometry, data: Vec<u8>) -> Self {
        debug_assert!(data.iter().all(|&v| is_label(v)));
        debug_assert_eq!(geom.len(), data.len());
        LabelMap { geom, data }
    }

    pub fn nonzero_bbox(&self) -> Result<BBox> {
        bbox_where(self.geom.shape, |i| self.data[i] != 0).ok_or(Error::EmptyVolume)
    }
}

impl Spatial for LabelMap {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn crop_padded(&self, start: [i64; 3], size: Shape) -> Result<Self> {
        let geom = self.geom.shifted(start, size);
        geom_ok(&geom)?;
        let data = window_copy(&self.data, self.geom.shape, size, start, 0);
        Ok(LabelMap { geom, data })
    }
}

/// Per-class probabilities over the channels [0, 1, 2, 4].
///
/// Stored channel-major: all voxels of channel 0, then channel 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    geom: Geometry,
    data: Vec<f64>,
}

impl ProbMap {
    pub const CHANNELS: usize = 4;

    pub fn new(geom: Geometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geom.len() * Self::CHANNELS {
            return Err(Error::InvalidData(format!(
                "expected {} probabilities for shape {:?}, got {}",
                geom.len() * Self::CHANNELS,
                geom.shape,
                data.len()
            )));
        }
        let n = geom.len();
        for i in 0..n {
            let mut sum = 0.0;
            for c in 0..Self::CHANNELS {
                let p = data[c * n + i];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidData(format!(
                        "probability {p} at voxel {i} channel {c} outside [0, 1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::InvalidData(format!(
                    "channel sum {sum} at voxel {i} is not 1"
                )));
            }
        }
        Ok(ProbMap { geom, data })
    }

    pub fn from_channels(geom: Geometry, channels: [Vec<f64>; 4]) -> Result<Self> {
        let mut data = Vec::with_capacity(geom.len() * Self::CHANNELS);
        for ch in channels {
            check_len(&geom, ch.len())?;
            data.extend(ch);
        }
        Self::new(geom, data)
    }

    /// One-hot encoding of a label map.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let n = labels.geom.len();
        let mut data = vec![0.0; n * Self::CHANNELS];
        for (i, &l) in labels.data.iter().enumerate() {
            let c = channel_of(l).expect("LabelMap holds valid labels");
            data[c * n + i] = 1.0;
        }
        ProbMap {
            geom: labels.geom.clone(),
            data,
        }
    }

    /// All voxels background with probability one.
    pub fn background(geom: Geometry) -> Self {
        let n = geom.len();
        let mut data = vec![0.0; n * Self::CHANNELS];
        data[..n].fill(1.0);
        ProbMap { geom, data }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.geom.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn voxel(&self, i: usize) -> [f64; 4] {
        let n = self.geom.len();
        [
            self.data[i],
            self.data[n + i],
            self.data[2 * n + i],
            self.data[3 * n + i],
        ]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Channel-major buffer that is already normalized up to rounding; each
    /// voxel is rescaled so its channels sum to one.
    pub(crate) fn from_unnormalized(geom: Geometry, mut data: Vec<f64>) -> Self {
        let n = geom.len();
        for i in 0..n {
            let sum: f64 = (0..Self::CHANNELS).map(|c| data[c * n + i]).sum();
            for c in 0..Self::CHANNELS {
                data[c * n + i] = (data[c * n + i] / sum).clamp(0.0, 1.0);
            }
        }
        ProbMap { geom, data }
    }
}

impl Spatial for ProbMap {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn crop_padded(&self, start: [i64; 3], size: Shape) -> Result<Self> {
        let geom = self.geom.shifted(start, size);
        geom_ok(&geom)?;
        let mut data = Vec::with_capacity(geom.len() * Self::CHANNELS);
        for c in 0..Self::CHANNELS {
            let fill = if c == 0 { 1.0 } else { 0.0 };
            data.extend(window_copy(
                self.channel(c),
                self.geom.shape,
                size,
                start,
                fill,
            ));
        }
        Ok(ProbMap { geom, data })
    }
}

impl Spatial for RegionMask {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn crop_padded(&self, start: [i64; 3], size: Shape) -> Result<Self> {
        let geom = self.geom.shifted(start, size);
        geom_ok(&geom)?;
        let data = window_copy(&self.data, self.geom.shape, size, start, false);
        Ok(RegionMask {
            region: self.region,
            geom,
            data,
        })
    }
}

pub fn crop<T: Spatial>(v: &T, b: &BBox) -> Result<T> {
    v.crop(b)
}

pub fn embed<T: Spatial>(v: &T, b: &BBox, full_shape: Shape) -> Result<T> {
    v.embed(b, full_shape)
}
