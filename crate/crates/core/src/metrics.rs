//! Dice overlap and 95th-percentile Hausdorff distance over ET/TC/WT.
//!
//! HD95 is measured between mask boundaries (foreground voxels with a
//! background or out-of-volume face neighbour) using an exact anisotropic
//! Euclidean distance transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::{region_mask, Region, RegionMask};
use crate::volume::{Geometry, LabelMap, Spatial, Volume};

/// HD95 reported when exactly one of the two masks is empty (mm).
pub const EMPTY_HD95_PENALTY: f64 = 373.1287;

pub fn dice(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    a.geom.ensure_same(&b.geom)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        na += x as usize;
        nb += y as usize;
        both += (x && y) as usize;
    }
    Ok(if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    })
}

/// Foreground voxels with at least one face neighbour that is background or
/// outside the volume.
pub fn boundary(m: &RegionMask) -> RegionMask {
    let geom = &m.geom;
    let [nx, ny, nz] = geom.shape;
    let mut data = vec![false; geom.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = geom.index(x, y, z);
                if !m.data[i] {
                    continue;
                }
                let interior = x > 0
                    && x + 1 < nx
                    && y > 0
                    && y + 1 < ny
                    && z > 0
                    && z + 1 < nz
                    && m.data[i - 1]
                    && m.data[i + 1]
                    && m.data[i - nx]
                    && m.data[i + nx]
                    && m.data[i - nx * ny]
                    && m.data[i + nx * ny];
                data[i] = !interior;
            }
        }
    }
    RegionMask {
        region: m.region,
        geom: geom.clone(),
        data,
    }
}

/// Per-voxel Euclidean distance (mm) to the nearest voxel of a source mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField(Volume);

impl DistanceField {
    pub fn distances(&self) -> &[f64] {
        self.0.data()
    }

    pub fn geometry(&self) -> &Geometry {
        self.0.geometry()
    }

    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.0.get(x, y, z)
    }

    pub fn into_volume(self) -> Volume {
        self.0
    }
}

/// Lower envelope of parabolas along one line (Felzenszwalb & Huttenlocher),
/// with sample spacing `s`. `f` holds squared distances, `INFINITY` where no
/// source has been seen yet.
fn edt_line(f: &[f64], s: f64, out: &mut [f64], hull: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    let s2 = s * s;
    hull.clear();
    bounds.clear();
    let height = |q: usize| f[q] + s2 * (q * q) as f64;
    for q in 0..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let Some(&p) = hull.last() else {
                hull.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let cross = (height(q) - height(p)) / (2.0 * s2 * (q - p) as f64);
            if cross <= *bounds.last().unwrap() {
                hull.pop();
                bounds.pop();
            } else {
                hull.push(q);
                bounds.push(cross);
                break;
            }
        }
    }
    if hull.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < hull.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let p = hull[k];
        let d = q.abs_diff(p) as f64 * s;
        *o = d * d + f[p];
    }
}

/// Exact Euclidean distance transform honouring anisotropic spacing.
pub fn edt(m: &RegionMask) -> Result<DistanceField> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let geom = m.geom.clone();
    let shape = geom.shape;
    let mut sq: Vec<f64> = m
        .data
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = *shape.iter().max().unwrap();
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut hull = Vec::with_capacity(longest);
    let mut bounds = Vec::with_capacity(longest);
    let strides = [1, shape[0], shape[0] * shape[1]];
    for axis in 0..3 {
        let n = shape[axis];
        let stride = strides[axis];
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for b in 0..shape[o2] {
            for a in 0..shape[o1] {
                let start = a * strides[o1] + b * strides[o2];
                for k in 0..n {
                    line[k] = sq[start + k * stride];
                }
                edt_line(&line[..n], geom.spacing[axis], &mut out[..n], &mut hull, &mut bounds);
                for k in 0..n {
                    sq[start + k * stride] = out[k];
                }
            }
        }
    }
    let dist = sq.into_iter().map(f64::sqrt).collect();
    Ok(DistanceField(Volume::new(geom, dist)?))
}

/// Percentile with linear interpolation between closest ranks (`q` in [0, 1]).
pub fn percentile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    values.sort_unstable_by(f64::total_cmp);
    let rank = q * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    values[lo] + (values[hi] - values[lo]) * frac
}

fn directed_hd95(from: &RegionMask, to_field: &DistanceField) -> f64 {
    let mut d: Vec<f64> = from
        .data
        .iter()
        .zip(to_field.distances())
        .filter(|(&b, _)| b)
        .map(|(_, &d)| d)
        .collect();
    percentile(&mut d, 0.95)
}

/// Symmetric boundary HD95 with the default empty-mask penalty.
pub fn hd95(a: &RegionMask, b: &RegionMask) -> Result<f64> {
    hd95_with_penalty(a, b, EMPTY_HD95_PENALTY)
}

pub fn hd95_with_penalty(a: &RegionMask, b: &RegionMask, empty_penalty: f64) -> Result<f64> {
    a.geom.ensure_same(&b.geom)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(empty_penalty),
        _ => {}
    }
    let (ba, bb) = (boundary(a), boundary(b));
    let ab = directed_hd95(&ba, &edt(&bb)?);
    let ba_ = directed_hd95(&bb, &edt(&ba)?);
    Ok(ab.max(ba_))
}

/// Dice and HD95 for ET, TC and WT of one case. Field names double as CSV
/// column headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    #[serde(rename = "DSC_ET")]
    pub dsc_et: f64,
    #[serde(rename = "DSC_TC")]
    pub dsc_tc: f64,
    #[serde(rename = "DSC_WT")]
    pub dsc_wt: f64,
    #[serde(rename = "HD95_ET")]
    pub hd95_et: f64,
    #[serde(rename = "HD95_TC")]
    pub hd95_tc: f64,
    #[serde(rename = "HD95_WT")]
    pub hd95_wt: f64,
}

impl CaseMetrics {
    pub const CSV_HEADER: [&'static str; 7] =
        ["case_id", "DSC_ET", "DSC_TC", "DSC_WT", "HD95_ET", "HD95_TC", "HD95_WT"];

    pub fn dsc(&self, r: Region) -> f64 {
        match r {
            Region::ET => self.dsc_et,
            Region::TC => self.dsc_tc,
            Region::WT => self.dsc_wt,
        }
    }

    pub fn hd95(&self, r: Region) -> f64 {
        match r {
            Region::ET => self.hd95_et,
            Region::TC => self.hd95_tc,
            Region::WT => self.hd95_wt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub empty_penalty: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            empty_penalty: EMPTY_HD95_PENALTY,
        }
    }
}

pub fn evaluate_case(pred: &LabelMap, gt: &LabelMap, case_id: &str) -> Result<CaseMetrics> {
    evaluate_case_with(pred, gt, case_id, &EvalConfig::default())
}

pub fn evaluate_case_with(
    pred: &LabelMap,
    gt: &LabelMap,
    case_id: &str,
    config: &EvalConfig,
) -> Result<CaseMetrics> {
    pred.geometry().ensure_same(gt.geometry())?;
    let mut dsc = [0.0; 3];
    let mut hd = [0.0; 3];
    for (k, r) in Region::ALL.into_iter().enumerate() {
        let (p, g) = (region_mask(pred, r), region_mask(gt, r));
        dsc[k] = dice(&p, &g)?;
        hd[k] = hd95_with_penalty(&p, &g, config.empty_penalty)?;
    }
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        dsc_et: dsc[0],
        dsc_tc: dsc[1],
        dsc_wt: dsc[2],
        hd95_et: hd[0],
        hd95_tc: hd[1],
        hd95_wt: hd[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(shape: [usize; 3], on: &[[usize; 3]]) -> RegionMask {
        RegionMask::from_fn(None, Geometry::with_shape(shape).unwrap(), |p| on.contains(&p))
    }

    #[test]
    fn dice_examples() {
        let a = mask([4, 4, 1], &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = mask(
            [4, 4, 1],
            &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0], [1, 1, 0], [2, 1, 0]],
        );
        assert!((dice(&a, &b).unwrap() - 0.6).abs() < 1e-15);
        let empty = mask([4, 4, 1], &[]);
        let five = mask([4, 4, 1], &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0], [0, 1, 0]]);
        assert_eq!(dice(&empty, &five).unwrap(), 0.0);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        let other = mask([4, 1, 4], &[]);
        assert!(matches!(dice(&empty, &other), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn boundary_examples() {
        let single = mask([3, 3, 3], &[[1, 1, 1]]);
        assert_eq!(boundary(&single), single);
        let cube = RegionMask::from_fn(None, Geometry::with_shape([5, 5, 5]).unwrap(), |p| {
            p.iter().all(|&c| (1..4).contains(&c))
        });
        let b = boundary(&cube);
        assert_eq!(b.count(), 26);
        assert!(!b.get(2, 2, 2));
        let empty = mask([3, 3, 3], &[]);
        assert!(boundary(&empty).is_empty());
    }

    #[test]
    fn edt_examples() {
        let m = mask([5, 5, 1], &[[0, 0, 0]]);
        let d = edt(&m).unwrap();
        assert_eq!(d.at(0, 0, 0), 0.0);
        assert_eq!(d.at(3, 4, 0), 5.0);

        let g = Geometry::new([3, 2, 1], [2.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let m = RegionMask::from_fn(None, g, |p| p == [0, 0, 0]);
        let d = edt(&m).unwrap();
        assert_eq!(d.at(1, 0, 0), 2.0);
        assert!((d.at(1, 1, 0) - 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(edt(&mask([2, 2, 2], &[])), Err(Error::EmptyMask)));
    }

    #[test]
    fn hd95_examples() {
        let a = mask([5, 5, 1], &[[0, 0, 0]]);
        let b = mask([5, 5, 1], &[[3, 4, 0]]);
        assert_eq!(hd95(&a, &a).unwrap(), 0.0);
        assert_eq!(hd95(&a, &b).unwrap(), 5.0);
        let empty = mask([5, 5, 1], &[]);
        assert_eq!(hd95(&a, &empty).unwrap(), EMPTY_HD95_PENALTY);
        assert_eq!(hd95(&empty, &a).unwrap(), EMPTY_HD95_PENALTY);
        assert_eq!(hd95(&empty, &empty).unwrap(), 0.0);
        assert_eq!(hd95_with_penalty(&a, &empty, 99.0).unwrap(), 99.0);
    }

    #[test]
    fn percentile_conventions() {
        assert_eq!(percentile(&mut [7.5], 0.95), 7.5);
        assert_eq!(percentile(&mut [4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert!((percentile(&mut [4.0, 1.0, 3.0, 2.0], 0.25) - 1.75).abs() < 1e-15);
        // 0.95 * 20 = 19 exactly: the top element of 21
        let mut v: Vec<f64> = (0..=20).map(f64::from).collect();
        assert_eq!(percentile(&mut v, 0.95), 19.0);
    }

    #[test]
    fn evaluate_identical_and_empty_et() {
        let g = Geometry::with_shape([4, 4, 4]).unwrap();
        let m = LabelMap::new(g.clone(), (0..64).map(|i| [0, 1, 2, 2][i % 4]).collect()).unwrap();
        let r = evaluate_case(&m, &m, "c1").unwrap();
        for reg in Region::ALL {
            assert_eq!(r.dsc(reg), 1.0);
            assert_eq!(r.hd95(reg), 0.0);
        }
        assert_eq!(r.case_id, "c1");
    }

    #[test]
    fn csv_field_names() {
        let m = CaseMetrics {
            case_id: "a".into(),
            dsc_et: 1.0,
            dsc_tc: 0.5,
            dsc_wt: 0.25,
            hd95_et: 0.0,
            hd95_tc: 2.0,
            hd95_wt: 3.5,
        };
        let json = serde_json::to_value(&m).unwrap();
        for key in CaseMetrics::CSV_HEADER {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
