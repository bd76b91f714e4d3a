//! Intensity normalisation and seeded spatial/intensity augmentations.
//!
//! Random draws use ChaCha8 seeded with the spec's 64-bit seed; each draw index
//! selects its own ChaCha stream, so draws are reproducible and independent of
//! the order in which they are requested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelMap, Spatial, Volume};

/// Normalises `v` to zero mean and unit population stddev over its nonzero
/// voxels. Zero voxels stay zero; a constant nonzero set maps to zeros.
pub fn znorm(v: &Volume) -> Result<Volume> {
    let support: Vec<f64> = v.data().iter().copied().filter(|&x| x != 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptyVolume);
    }
    let n = support.len() as f64;
    let mean = support.iter().sum::<f64>() / n;
    let var = support.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let degenerate = std <= 1e-12 * mean.abs().max(1e-300);
    let data = v
        .data()
        .iter()
        .map(|&x| {
            if x == 0.0 || degenerate {
                0.0
            } else {
                (x - mean) / std
            }
        })
        .collect();
    Ok(v.with_data(data))
}

fn flip_slice<T: Copy>(data: &[T], shape: [usize; 3], axes: [bool; 3]) -> Vec<T> {
    let [nx, ny, nz] = shape;
    let mut out = Vec::with_capacity(data.len());
    for z in 0..nz {
        let zs = if axes[2] { nz - 1 - z } else { z };
        for y in 0..ny {
            let ys = if axes[1] { ny - 1 - y } else { y };
            let row = (ys + ny * zs) * nx;
            if axes[0] {
                out.extend(data[row..row + nx].iter().rev());
            } else {
                out.extend_from_slice(&data[row..row + nx]);
            }
        }
    }
    out
}

/// Grids that can be mirrored along axes.
pub trait Flip: Sized {
    fn flipped(&self, axes: [bool; 3]) -> Self;
}

impl Flip for Volume {
    fn flipped(&self, axes: [bool; 3]) -> Self {
        self.with_data(flip_slice(self.data(), self.shape(), axes))
    }
}

impl Flip for LabelMap {
    fn flipped(&self, axes: [bool; 3]) -> Self {
        LabelMap::from_valid(
            self.geometry().clone(),
            flip_slice(self.data(), self.shape(), axes),
        )
    }
}

pub fn flip3d<T: Flip>(v: &T, axes: [bool; 3]) -> T {
    v.flipped(axes)
}

/// Power-law intensity transform that keeps the volume's [min, max] range.
pub fn gamma_transform(v: &Volume, gamma: f64) -> Result<Volume> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be positive")));
    }
    let (lo, hi) = v
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if hi <= lo {
        return Err(Error::ConstantVolume);
    }
    let range = hi - lo;
    let data = v
        .data()
        .iter()
        .map(|&x| {
            let t = ((x - lo) / range).clamp(0.0, 1.0);
            (lo + range * t.powf(gamma)).clamp(lo, hi)
        })
        .collect();
    Ok(v.with_data(data))
}

/// Exact values at multiples of 90° so axis-aligned rotations are permutations.
fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        r.to_radians().sin_cos()
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Rotation applying x first, then y, then z: R = Rz · Ry · Rx.
fn rotation(angles_deg: [f64; 3]) -> Mat3 {
    let (sx, cx) = sin_cos_deg(angles_deg[0]);
    let (sy, cy) = sin_cos_deg(angles_deg[1]);
    let (sz, cz) = sin_cos_deg(angles_deg[2]);
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// For every output voxel, the continuous source index it samples from
/// (inverse rotation about the volume centre, in millimetres).
fn for_each_source(geom: &Geometry, angles_deg: [f64; 3], mut f: impl FnMut(usize, [f64; 3])) {
    let r = rotation(angles_deg);
    let center = geom.shape.map(|n| (n as f64 - 1.0) / 2.0);
    let s = geom.spacing;
    for idx in 0..geom.len() {
        let p = geom.coords(idx);
        let d = [0, 1, 2].map(|a| (p[a] as f64 - center[a]) * s[a]);
        // R^T d
        let src = [0, 1, 2].map(|a| {
            let mm = r[0][a] * d[0] + r[1][a] * d[1] + r[2][a] * d[2];
            snap(mm / s[a] + center[a])
        });
        f(idx, src);
    }
}

/// Rotates about the volume centre (axis order x, y, z) with trilinear
/// interpolation; samples outside the volume read zero.
pub fn rotate3d(v: &Volume, angles_deg: [f64; 3]) -> Volume {
    let geom = v.geometry();
    let shape = geom.shape;
    let data = v.data();
    let mut out = vec![0.0; data.len()];
    for_each_source(geom, angles_deg, |idx, src| {
        let base = src.map(f64::floor);
        let frac = [src[0] - base[0], src[1] - base[1], src[2] - base[2]];
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut q = [0i64; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                q[a] = base[a] as i64 + hi as i64;
            }
            if w == 0.0 || (0..3).any(|a| q[a] < 0 || q[a] >= shape[a] as i64) {
                continue;
            }
            acc += w * data[geom.index(q[0] as usize, q[1] as usize, q[2] as usize)];
        }
        out[idx] = acc;
    });
    v.with_data(out)
}

/// Nearest-neighbour counterpart of [`rotate3d`] for label maps; outside
/// samples read background.
pub fn rotate_labels(m: &LabelMap, angles_deg: [f64; 3]) -> LabelMap {
    let geom = m.geometry();
    let shape = geom.shape;
    let mut out = vec![0u8; geom.len()];
    for_each_source(geom, angles_deg, |idx, src| {
        let q = src.map(|c| c.round() as i64);
        if (0..3).all(|a| q[a] >= 0 && q[a] < shape[a] as i64) {
            out[idx] = m.data()[geom.index(q[0] as usize, q[1] as usize, q[2] as usize)];
        }
    });
    LabelMap::from_valid(geom.clone(), out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub seed: u64,
    #[serde(default = "AugmentSpec::default_rotation")]
    pub rotation_max_deg: f64,
    #[serde(default = "AugmentSpec::default_flips")]
    pub flip_axes_enabled: [bool; 3],
    #[serde(default = "AugmentSpec::default_gamma")]
    pub gamma_range: (f64, f64),
}

impl AugmentSpec {
    fn default_rotation() -> f64 {
        30.0
    }

    fn default_flips() -> [bool; 3] {
        [true; 3]
    }

    fn default_gamma() -> (f64, f64) {
        (0.7, 1.5)
    }

    pub fn new(seed: u64) -> Self {
        AugmentSpec {
            seed,
            rotation_max_deg: Self::default_rotation(),
            flip_axes_enabled: Self::default_flips(),
            gamma_range: Self::default_gamma(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=180.0).contains(&self.rotation_max_deg) {
            return Err(Error::InvalidArgument(format!(
                "rotation_max_deg {} outside [0, 180]",
                self.rotation_max_deg
            )));
        }
        let (lo, hi) = self.gamma_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "gamma_range ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        Ok(())
    }
}

/// One concrete augmentation draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub angles_deg: [f64; 3],
    pub flips: [bool; 3],
    pub gamma: f64,
}

impl Augmentation {
    pub fn is_identity(&self) -> bool {
        self.angles_deg == [0.0; 3] && self.flips == [false; 3] && self.gamma == 1.0
    }

    /// Gamma, then flips, then rotation. Gamma is skipped on constant volumes.
    pub fn apply(&self, v: &Volume) -> Volume {
        let mut out = match gamma_transform(v, self.gamma) {
            Ok(g) if self.gamma != 1.0 => g,
            _ => v.clone(),
        };
        if self.flips.iter().any(|&f| f) {
            out = flip3d(&out, self.flips);
        }
        if self.angles_deg != [0.0; 3] {
            out = rotate3d(&out, self.angles_deg);
        }
        out
    }

    /// The spatial part of [`Augmentation::apply`] with nearest-neighbour sampling.
    pub fn apply_labels(&self, m: &LabelMap) -> LabelMap {
        let mut out = flip3d(m, self.flips);
        if self.angles_deg != [0.0; 3] {
            out = rotate_labels(&out, self.angles_deg);
        }
        out
    }
}

/// Deterministic draw `draw_index` of the augmentation distribution: per-axis
/// angles uniform in [0, max], a fair coin per enabled flip axis, gamma uniform
/// in the configured range.
pub fn sample_augmentation(spec: &AugmentSpec, draw_index: u64) -> Result<Augmentation> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(draw_index);
    let max = spec.rotation_max_deg;
    let angles_deg = [(); 3].map(|_| rng.random_range(0.0..=max));
    let coins: [bool; 3] = [(); 3].map(|_| rng.random_bool(0.5));
    let flips = [0, 1, 2].map(|a| coins[a] && spec.flip_axes_enabled[a]);
    let (lo, hi) = spec.gamma_range;
    let gamma = rng.random_range(lo..=hi);
    Ok(Augmentation {
        angles_deg,
        flips,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(shape: [usize; 3], data: Vec<f64>) -> Volume {
        Volume::new(Geometry::with_shape(shape).unwrap(), data).unwrap()
    }

    #[test]
    fn znorm_two_values() {
        let v = vol([3, 1, 1], vec![1.0, 0.0, 3.0]);
        assert_eq!(znorm(&v).unwrap().data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn znorm_constant_and_empty() {
        let v = vol([3, 1, 1], vec![5.0, 0.0, 5.0]);
        assert_eq!(znorm(&v).unwrap().data(), &[0.0, 0.0, 0.0]);
        let z = vol([2, 1, 1], vec![0.0, 0.0]);
        assert!(matches!(znorm(&z), Err(Error::EmptyVolume)));
    }

    #[test]
    fn znorm_moments() {
        let data: Vec<f64> = (0..64).map(|i| if i % 5 == 0 { 0.0 } else { (i * i) as f64 * 0.37 }).collect();
        let out = znorm(&vol([4, 4, 4], data.clone())).unwrap();
        let s: Vec<f64> = data
            .iter()
            .zip(out.data())
            .filter(|(x, _)| **x != 0.0)
            .map(|(_, y)| *y)
            .collect();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let std = (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-6);
        assert!((std - 1.0).abs() < 1e-6);
        let again = znorm(&out).unwrap();
        for (a, b) in again.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn flip_examples() {
        let v = vol([2, 1, 1], vec![1.0, 2.0]);
        assert_eq!(flip3d(&v, [false; 3]), v);
        assert_eq!(flip3d(&v, [true, false, false]).data(), &[2.0, 1.0]);
        let w = vol([2, 2, 2], (0..8).map(f64::from).collect());
        assert_eq!(flip3d(&flip3d(&w, [true, false, true]), [true, false, true]), w);
        assert_eq!(flip3d(&w, [false, false, true]).data(), &[4.0, 5.0, 6.0, 7.0, 0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn gamma_examples() {
        let v = vol([3, 1, 1], vec![0.0, 0.25, 1.0]);
        assert_eq!(gamma_transform(&v, 2.0).unwrap().data(), &[0.0, 0.0625, 1.0]);
        let w = vol([3, 1, 1], vec![-3.0, 1.7, 12.0]);
        for (a, b) in gamma_transform(&w, 1.0).unwrap().data().iter().zip(w.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for g in [0.3, 1.0, 2.5] {
            let out = gamma_transform(&w, g).unwrap();
            assert_eq!(out.data()[0], -3.0);
            assert_eq!(out.data()[2], 12.0);
        }
        assert!(matches!(
            gamma_transform(&vol([2, 1, 1], vec![3.0, 3.0]), 2.0),
            Err(Error::ConstantVolume)
        ));
        assert!(gamma_transform(&w, 0.0).is_err());
    }

    #[test]
    fn rotate_quarter_turn_about_z() {
        // hot voxel at (2,1,0) relative to centre (1,1,0) is (+1,0): a +90° turn about z
        // sends it to (0,+1), i.e. index (1,2,0)
        let g = Geometry::with_shape([3, 3, 1]).unwrap();
        let v = Volume::from_fn(g, |p| if p == [2, 1, 0] { 1.0 } else { 0.0 }).unwrap();
        let r = rotate3d(&v, [0.0, 0.0, 90.0]);
        let hot: Vec<usize> = (0..9).filter(|&i| r.data()[i] != 0.0).collect();
        assert_eq!(hot, vec![r.geometry().index(1, 2, 0)]);
        assert_eq!(r.get(1, 2, 0), 1.0);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let v = vol([3, 2, 2], (0..12).map(|i| i as f64 * 0.5).collect());
        assert_eq!(rotate3d(&v, [0.0; 3]), v);
    }

    #[test]
    fn label_rotation_keeps_label_set() {
        let g = Geometry::with_shape([7, 7, 7]).unwrap();
        let m = LabelMap::new(
            g.clone(),
            (0..g.len())
                .map(|i| [0u8, 1, 2, 4][(i * 7 + i / 11) % 4])
                .collect(),
        )
        .unwrap();
        let r = rotate_labels(&m, [13.0, 27.0, 5.0]);
        assert!(r.data().iter().all(|l| [0, 1, 2, 4].contains(l)));
    }

    #[test]
    fn augmentation_draws() {
        let spec = AugmentSpec::new(42);
        let a = sample_augmentation(&spec, 7).unwrap();
        assert_eq!(a, sample_augmentation(&spec, 7).unwrap());
        assert_ne!(a, sample_augmentation(&spec, 8).unwrap());

        let off = AugmentSpec {
            seed: 1,
            rotation_max_deg: 0.0,
            flip_axes_enabled: [false; 3],
            gamma_range: (1.0, 1.0),
        };
        assert!(sample_augmentation(&off, 3).unwrap().is_identity());

        let bad = AugmentSpec {
            gamma_range: (0.0, 1.0),
            ..AugmentSpec::new(0)
        };
        assert!(sample_augmentation(&bad, 0).is_err());
    }

    #[test]
    fn augmentation_angle_mean() {
        let spec = AugmentSpec::new(42);
        let n = 10_000;
        let mut sum = 0.0;
        for i in 0..n {
            let a = sample_augmentation(&spec, i).unwrap();
            assert!(a.angles_deg.iter().all(|x| (0.0..=30.0).contains(x)));
            assert!((0.7..=1.5).contains(&a.gamma));
            sum += a.angles_deg[0];
        }
        let mean = sum / n as f64;
        assert!((13.5..=16.5).contains(&mean), "mean {mean}");
    }
}
