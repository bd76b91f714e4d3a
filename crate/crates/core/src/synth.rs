//! Synthetic phantoms and noisy raters standing in for trained networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelMap, ProbMap, Shape, Spatial, Volume, LABELS};

/// Mean intensity per label; brain tissue outside the tumour uses `BRAIN_BASE`.
const LABEL_BASE: [(u8, f64); 3] = [(2, 160.0), (1, 60.0), (4, 230.0)];
const BRAIN_BASE: f64 = 100.0;
const NOISE_SD: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub shape: Shape,
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 3],
    pub seed: u64,
    /// Semi-axes in voxels.
    pub wt_radii: [f64; 3],
    pub tc_radii: [f64; 3],
    pub et_radii: [f64; 3],
    /// Fraction of the free room the tumour centre may move, per axis.
    #[serde(default)]
    pub jitter: f64,
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

impl PhantomSpec {
    /// Tumour radii scaled to the volume: 30%, 20% and 12% of each extent.
    pub fn new(shape: Shape, seed: u64) -> Self {
        let r = |f: f64| shape.map(|n| n as f64 * f);
        PhantomSpec {
            shape,
            spacing: unit_spacing(),
            seed,
            wt_radii: r(0.3),
            tc_radii: r(0.2),
            et_radii: r(0.12),
            jitter: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Geometry::new(self.shape, self.spacing, [0.0; 3])?;
        for a in 0..3 {
            let (w, t, e) = (self.wt_radii[a], self.tc_radii[a], self.et_radii[a]);
            if !(w > t && t > e && e > 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "radii must satisfy WT > TC > ET > 0 on every axis, got {w}, {t}, {e} on axis {a}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(Error::InvalidArgument(format!(
                "jitter must lie in [0, 1], got {}",
                self.jitter
            )));
        }
        if (0..3).any(|a| self.wt_radii[a] > (self.shape[a] as f64 - 1.0) / 2.0) {
            return Err(Error::RadiiDontFit(self.shape));
        }
        Ok(())
    }
}

fn inside(p: [usize; 3], c: [f64; 3], r: [f64; 3]) -> bool {
    (0..3)
        .map(|a| ((p[a] as f64 - c[a]) / r[a]).powi(2))
        .sum::<f64>()
        <= 1.0
}

/// Nested ellipsoids with labels 2, 1 and 4 from the outside in, plus an
/// intensity image whose values are all exactly representable as f32.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(LabelMap, Volume)> {
    spec.validate()?;
    let geom = Geometry::new(spec.shape, spec.spacing, [0.0; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mid = spec.shape.map(|n| (n as f64 - 1.0) / 2.0);
    let mut centre = mid;
    for a in 0..3 {
        let room = mid[a] - spec.wt_radii[a];
        centre[a] += spec.jitter * room * rng.random_range(-1.0..=1.0);
    }
    let brain = spec.shape.map(|n| n as f64 / 2.0);

    let labels: Vec<u8> = (0..geom.len())
        .map(|i| {
            let p = geom.coords(i);
            if inside(p, centre, spec.et_radii) {
                4
            } else if inside(p, centre, spec.tc_radii) {
                1
            } else if inside(p, centre, spec.wt_radii) {
                2
            } else {
                0
            }
        })
        .collect();

    let noise = Normal::new(0.0, NOISE_SD).expect("constant sd");
    let intensity: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let base = LABEL_BASE
                .iter()
                .find(|(lab, _)| *lab == l)
                .map(|&(_, b)| b)
                .or_else(|| inside(geom.coords(i), mid, brain).then_some(BRAIN_BASE));
            match base {
                Some(b) => ((b + noise.sample(&mut rng)).max(1.0) as f32) as f64,
                None => 0.0,
            }
        })
        .collect();

    Ok((
        LabelMap::from_valid(geom.clone(), labels),
        Volume::new(geom, intensity)?,
    ))
}

/// Each voxel is, with probability `rate`, replaced by one of the three other
/// labels chosen uniformly. `rate` is clamped to [0, 1]; NaN counts as 0.
pub fn corrupt_labels(gt: &LabelMap, rate: f64, seed: u64) -> LabelMap {
    let rate = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = gt
        .data()
        .iter()
        .map(|&l| {
            let u: f64 = rng.random();
            if u < rate {
                let others: Vec<u8> = LABELS.iter().copied().filter(|&o| o != l).collect();
                others[rng.random_range(0..others.len())]
            } else {
                l
            }
        })
        .collect();
    LabelMap::from_valid(gt.geometry().clone(), data)
}

/// One-hot `gt` plus `temperature` times uniform noise per channel, then
/// renormalised. For temperature below 1 the argmax is always `gt`.
/// Non-positive or NaN temperatures give the exact one-hot map.
pub fn noisy_probmap(gt: &LabelMap, temperature: f64, seed: u64) -> ProbMap {
    let t = if temperature > 0.0 { temperature } else { 0.0 };
    let geom = gt.geometry().clone();
    let n = geom.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; 4 * n];
    for (i, &l) in gt.data().iter().enumerate() {
        for (c, &lab) in LABELS.iter().enumerate() {
            let hot = if lab == l { 1.0 } else { 0.0 };
            let u: f64 = rng.random();
            data[c * n + i] = hot + t * u;
        }
    }
    ProbMap::from_unnormalized(geom, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::argmax_labels;
    use crate::regions::{region_mask, Region};

    #[test]
    fn phantom_is_deterministic_and_nested() {
        let spec = PhantomSpec::new([24, 20, 16], 4);
        let (a, va) = make_phantom(&spec).unwrap();
        let (b, vb) = make_phantom(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(va, vb);
        let et = region_mask(&a, Region::ET);
        let tc = region_mask(&a, Region::TC);
        let wt = region_mask(&a, Region::WT);
        for i in 0..a.data().len() {
            assert!(!et.data()[i] || tc.data()[i]);
            assert!(!tc.data()[i] || wt.data()[i]);
        }
        for l in [1, 2, 4] {
            assert!(a.count(l) > 0, "label {l} missing");
        }
        assert!(va.data().iter().all(|&v| (v as f32) as f64 == v));
    }

    #[test]
    fn radii_checks() {
        let mut spec = PhantomSpec::new([16; 3], 0);
        spec.wt_radii = [9.0; 3];
        assert!(matches!(make_phantom(&spec), Err(Error::RadiiDontFit(_))));
        let mut spec = PhantomSpec::new([16; 3], 0);
        spec.tc_radii = spec.wt_radii;
        assert!(matches!(make_phantom(&spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn corrupt_extremes() {
        let (gt, _) = make_phantom(&PhantomSpec::new([12; 3], 1)).unwrap();
        assert_eq!(corrupt_labels(&gt, 0.0, 3), gt);
        let all = corrupt_labels(&gt, 1.0, 3);
        assert!(gt.data().iter().zip(all.data()).all(|(a, b)| a != b));
    }

    #[test]
    fn probmap_argmax_and_limit() {
        let (gt, _) = make_phantom(&PhantomSpec::new([10; 3], 2)).unwrap();
        assert_eq!(argmax_labels(&noisy_probmap(&gt, 0.1, 5)), gt);
        assert_eq!(noisy_probmap(&gt, 0.0, 5), ProbMap::one_hot(&gt));
        let p = noisy_probmap(&gt, 3.0, 5);
        for i in 0..gt.data().len() {
            assert!((p.voxel(i).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
