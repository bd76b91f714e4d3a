//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segfuse::{Geometry, RegionMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn idx(shape: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + shape[0] * (y + shape[1] * z)
}

pub fn coords(shape: [usize; 3], i: usize) -> [usize; 3] {
    [i % shape[0], (i / shape[0]) % shape[1], i / (shape[0] * shape[1])]
}

pub fn mask(geom: &Geometry, data: Vec<bool>) -> RegionMask {
    RegionMask::new(None, geom.clone(), data).unwrap()
}

/// Random blobby mask: a few random boxes unioned with sparse noise.
pub fn random_mask(r: &mut ChaCha8Rng, shape: [usize; 3], allow_empty: bool) -> Vec<bool> {
    let n = shape.iter().product();
    let mut m = vec![false; n];
    let boxes = r.random_range(if allow_empty { 0 } else { 1 }..4);
    for _ in 0..boxes {
        let lo = shape.map(|s| r.random_range(0..s));
        let hi = [0, 1, 2].map(|a| r.random_range(lo[a]..shape[a]));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    m[idx(shape, x, y, z)] = true;
                }
            }
        }
    }
    let noise = r.random_range(0.0..0.1);
    for v in m.iter_mut() {
        if r.random::<f64>() < noise {
            *v = !*v;
        }
    }
    if !allow_empty && !m.iter().any(|&b| b) {
        m[r.random_range(0..n)] = true;
    }
    m
}

// ---------------------------------------------------------------- STAPLE

pub struct RefStaple {
    pub posterior: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp(x: f64) -> f64 {
    x.max(1e-7).min(1.0 - 1e-7)
}

/// Plain-product STAPLE: E-step, M-step, stop once two consecutive
/// posteriors differ by less than `tol`.
pub fn staple_ref(d: &[Vec<bool>], p0: f64, q0: f64, gamma: f64, tol: f64, max_iters: usize) -> RefStaple {
    let raters = d.len();
    let n = d[0].len();
    let mut p = vec![clamp(p0); raters];
    let mut q = vec![clamp(q0); raters];
    let mut prev: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=max_iters {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut a = gamma;
            let mut b = 1.0 - gamma;
            for j in 0..raters {
                if d[j][i] {
                    a *= p[j];
                    b *= 1.0 - q[j];
                } else {
                    a *= 1.0 - p[j];
                    b *= q[j];
                }
            }
            w[i] = a / (a + b);
        }
        let (np, nq) = mstep_ref(d, &w, &p, &q);
        p = np;
        q = nq;
        iterations = it;
        let stop = prev
            .as_ref()
            .map(|pw| pw.iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < tol)
            .unwrap_or(false);
        prev = Some(w);
        if stop {
            converged = true;
            break;
        }
    }
    RefStaple {
        posterior: prev.unwrap(),
        p,
        q,
        iterations,
        converged,
    }
}

/// Clamped M-step; keeps the previous value when a denominator vanishes.
pub fn mstep_ref(d: &[Vec<bool>], w: &[f64], p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sw: f64 = w.iter().sum();
    let sb: f64 = w.iter().map(|x| 1.0 - x).sum();
    let mut np = Vec::new();
    let mut nq = Vec::new();
    for j in 0..d.len() {
        let tp: f64 = (0..w.len()).filter(|&i| d[j][i]).map(|i| w[i]).sum();
        let tn: f64 = (0..w.len()).filter(|&i| !d[j][i]).map(|i| 1.0 - w[i]).sum();
        np.push(if sw > 0.0 { clamp(tp / sw) } else { p[j] });
        nq.push(if sb > 0.0 { clamp(tn / sb) } else { q[j] });
    }
    (np, nq)
}

pub fn mean_rate(d: &[Vec<bool>]) -> f64 {
    let total: usize = d.iter().map(|m| m.iter().filter(|&&b| b).count()).sum();
    total as f64 / (d.len() * d[0].len()) as f64
}

// ---------------------------------------------------------------- distances

pub fn dist(a: [usize; 3], b: [usize; 3], spacing: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| ((a[k] as f64 - b[k] as f64) * spacing[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance from every voxel to the nearest `true` voxel, by full scan.
pub fn edt_brute(m: &[bool], shape: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let src: Vec<[usize; 3]> = (0..m.len()).filter(|&i| m[i]).map(|i| coords(shape, i)).collect();
    (0..m.len())
        .map(|i| {
            let p = coords(shape, i);
            src.iter().map(|&s| dist(p, s, spacing)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Foreground voxels with a face neighbour that is background or outside.
pub fn boundary_ref(m: &[bool], shape: [usize; 3]) -> Vec<bool> {
    (0..m.len())
        .map(|i| {
            if !m[i] {
                return false;
            }
            let p = coords(shape, i);
            for a in 0..3 {
                for step in [-1i64, 1] {
                    let c = p[a] as i64 + step;
                    if c < 0 || c >= shape[a] as i64 {
                        return true;
                    }
                    let mut q = p;
                    q[a] = c as usize;
                    if !m[idx(shape, q[0], q[1], q[2])] {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

/// Linear interpolation between closest ranks.
pub fn percentile_ref(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// HD95 from all pairs of boundary voxels.
pub fn hd95_ref(a: &[bool], b: &[bool], shape: [usize; 3], spacing: [f64; 3], penalty: f64) -> f64 {
    let ea = !a.iter().any(|&x| x);
    let eb = !b.iter().any(|&x| x);
    if ea && eb {
        return 0.0;
    }
    if ea || eb {
        return penalty;
    }
    let ba: Vec<[usize; 3]> = {
        let s = boundary_ref(a, shape);
        (0..a.len()).filter(|&i| s[i]).map(|i| coords(shape, i)).collect()
    };
    let bb: Vec<[usize; 3]> = {
        let s = boundary_ref(b, shape);
        (0..b.len()).filter(|&i| s[i]).map(|i| coords(shape, i)).collect()
    };
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| {
        let d: Vec<f64> = from
            .iter()
            .map(|&p| to.iter().map(|&t| dist(p, t, spacing)).fold(f64::INFINITY, f64::min))
            .collect();
        percentile_ref(&d, 0.95)
    };
    directed(&ba, &bb).max(directed(&bb, &ba))
}

pub fn dice_ref(a: &[bool], b: &[bool]) -> f64 {
    let na = a.iter().filter(|&&x| x).count();
    let nb = b.iter().filter(|&&x| x).count();
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

pub const BRATS_PENALTY: f64 = 373.1287;

/// Six metrics of a label-map pair, region membership spelled out directly.
pub fn case_metrics_ref(pred: &[u8], gt: &[u8], shape: [usize; 3], spacing: [f64; 3]) -> [f64; 6] {
    let sets: [&[u8]; 3] = [&[4], &[1, 4], &[1, 2, 4]];
    let mut out = [0.0; 6];
    for (k, s) in sets.iter().enumerate() {
        let a: Vec<bool> = pred.iter().map(|l| s.contains(l)).collect();
        let b: Vec<bool> = gt.iter().map(|l| s.contains(l)).collect();
        out[k] = dice_ref(&a, &b);
        out[3 + k] = hd95_ref(&a, &b, shape, spacing, BRATS_PENALTY);
    }
    out
}
