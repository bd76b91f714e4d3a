//! Ensemble combination: softmax averaging, argmax decoding, majority vote and
//! binary STAPLE expectation-maximisation.
//!
//! STAPLE models each rater j by a sensitivity p_j and specificity q_j and
//! alternates
//!
//! * E-step: `W_i = a_i / (a_i + b_i)` with
//!   `a_i = γ ∏_j p_j^D_ij (1-p_j)^(1-D_ij)` and
//!   `b_i = (1-γ) ∏_j (1-q_j)^D_ij q_j^(1-D_ij)`;
//! * M-step: `p_j = Σ W_i D_ij / Σ W_i`,
//!   `q_j = Σ (1-W_i)(1-D_ij) / Σ (1-W_i)`;
//!
//! until the largest posterior change drops below `tol`. Products are taken in
//! log space. Voxels that share a rater decision pattern share a posterior, so
//! the default path iterates over distinct patterns only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regions::{recompose_labels, region_mask, Region, RegionMask};
use crate::volume::{channel_of, Geometry, LabelMap, ProbMap, Spatial, LABELS};

/// Initial sensitivity and specificity assumed for every rater.
pub const DEFAULT_RATER_QUALITY: f64 = 0.99999;
/// p, q and γ are kept inside [CLAMP, 1 - CLAMP].
pub const PARAM_CLAMP: f64 = 1e-7;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;

fn check_same_geometry<'a>(mut geoms: impl Iterator<Item = &'a Geometry>) -> Result<&'a Geometry> {
    let first = geoms.next().ok_or(Error::EmptyList)?;
    for g in geoms {
        first.ensure_same(g)?;
    }
    Ok(first)
}

fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Voxelwise, channelwise mean of probability maps.
///
/// Each voxel's values are summed in sorted order, so the result does not
/// depend on the order of `maps`.
pub fn average_probs(maps: &[ProbMap]) -> Result<ProbMap> {
    let geom = check_same_geometry(maps.iter().map(Spatial::geometry))?.clone();
    let n = maps.len() as f64;
    let len = maps[0].data().len();
    let mut scratch = vec![0.0; maps.len()];
    let mut data = Vec::with_capacity(len);
    for i in 0..len {
        for (s, m) in scratch.iter_mut().zip(maps) {
            *s = m.data()[i];
        }
        let sum = sorted_sum(&mut scratch);
        // identical inputs return that value exactly
        let mean = if scratch[0] == scratch[scratch.len() - 1] {
            scratch[0]
        } else {
            (sum / n).clamp(0.0, 1.0)
        };
        data.push(mean);
    }
    ProbMap::new(geom, data)
}

/// Most probable class per voxel; ties go to the later channel in [0, 1, 2, 4].
pub fn argmax_labels(p: &ProbMap) -> LabelMap {
    let n = p.geometry().len();
    let data = (0..n)
        .map(|i| {
            let v = p.voxel(i);
            let mut best = 0;
            for c in 1..ProbMap::CHANNELS {
                if v[c] >= v[best] {
                    best = c;
                }
            }
            LABELS[best]
        })
        .collect();
    LabelMap::from_valid(p.geometry().clone(), data)
}

/// Tie-break order for [`majority_vote`].
pub const VOTE_PRIORITY: [u8; 4] = [4, 1, 2, 0];

/// Most frequent label per voxel; ties resolved by [`VOTE_PRIORITY`].
pub fn majority_vote(maps: &[LabelMap]) -> Result<LabelMap> {
    let geom = check_same_geometry(maps.iter().map(Spatial::geometry))?.clone();
    let n = geom.len();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let mut counts = [0usize; 4];
        for m in maps {
            counts[channel_of(m.data()[i]).expect("valid label")] += 1;
        }
        let mut best = VOTE_PRIORITY[0];
        let mut best_count = counts[channel_of(best).unwrap()];
        for &l in &VOTE_PRIORITY[1..] {
            let c = counts[channel_of(l).unwrap()];
            if c > best_count {
                best = l;
                best_count = c;
            }
        }
        data.push(best);
    }
    Ok(LabelMap::from_valid(geom, data))
}

fn clamp_prob(x: f64) -> f64 {
    x.clamp(PARAM_CLAMP, 1.0 - PARAM_CLAMP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StapleParams {
    /// Per-rater sensitivity p_j.
    pub sensitivity: Vec<f64>,
    /// Per-rater specificity q_j.
    pub specificity: Vec<f64>,
    /// Stationary foreground prior γ.
    pub prior: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl StapleParams {
    pub fn uniform(raters: usize, quality: f64, prior: f64) -> Self {
        StapleParams {
            sensitivity: vec![quality; raters],
            specificity: vec![quality; raters],
            prior,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }

    /// Default initialisation: near-perfect raters and γ equal to the mean
    /// foreground rate over all raters and voxels.
    pub fn default_for(masks: &[RegionMask]) -> Self {
        Self::uniform(masks.len(), DEFAULT_RATER_QUALITY, global_prior(masks))
    }

    fn validate(&self, raters: usize) -> Result<()> {
        if self.sensitivity.len() != raters || self.specificity.len() != raters {
            return Err(Error::InvalidArgument(format!(
                "{} raters but {} sensitivities and {} specificities",
                raters,
                self.sensitivity.len(),
                self.specificity.len()
            )));
        }
        let probs = self
            .sensitivity
            .iter()
            .chain(&self.specificity)
            .chain(std::iter::once(&self.prior));
        for &p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "STAPLE probability {p} outside [0, 1]"
                )));
            }
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(
                "STAPLE needs max_iters >= 1 and tol > 0".into(),
            ));
        }
        Ok(())
    }

    fn clamped(&self) -> Self {
        StapleParams {
            sensitivity: self.sensitivity.iter().map(|&p| clamp_prob(p)).collect(),
            specificity: self.specificity.iter().map(|&q| clamp_prob(q)).collect(),
            prior: clamp_prob(self.prior),
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

/// Mean foreground rate over all raters and voxels.
pub fn global_prior(masks: &[RegionMask]) -> f64 {
    let total: usize = masks.iter().map(|m| m.data().len()).sum();
    if total == 0 {
        return 0.5;
    }
    let fg: usize = masks.iter().map(RegionMask::count).sum();
    fg as f64 / total as f64
}

/// Initial quality and stopping rule; the prior is derived from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StapleConfig {
    pub init_sensitivity: f64,
    pub init_specificity: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for StapleConfig {
    fn default() -> Self {
        StapleConfig {
            init_sensitivity: DEFAULT_RATER_QUALITY,
            init_specificity: DEFAULT_RATER_QUALITY,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

impl StapleConfig {
    pub fn params_for(&self, masks: &[RegionMask]) -> StapleParams {
        StapleParams {
            sensitivity: vec![self.init_sensitivity; masks.len()],
            specificity: vec![self.init_specificity; masks.len()],
            prior: global_prior(masks),
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StapleResult {
    /// `posterior >= 0.5`.
    pub mask: RegionMask,
    pub posterior: Vec<f64>,
    pub final_params: StapleParams,
    pub iterations: usize,
    pub converged: bool,
}

/// JSON-friendly summary of a STAPLE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StapleDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub prior: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl StapleResult {
    pub fn diagnostics(&self) -> StapleDiagnostics {
        StapleDiagnostics {
            region: self.mask.region(),
            sensitivity: self.final_params.sensitivity.clone(),
            specificity: self.final_params.specificity.clone(),
            prior: self.final_params.prior,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// Per-rater log-likelihood ratio contributions for the two possible decisions.
struct LogTerms {
    /// ln p_j - ln(1 - q_j): rater said foreground
    on: Vec<f64>,
    /// ln(1 - p_j) - ln q_j: rater said background
    off: Vec<f64>,
}

impl LogTerms {
    fn new(params: &StapleParams) -> Self {
        let on = params
            .sensitivity
            .iter()
            .zip(&params.specificity)
            .map(|(&p, &q)| p.ln() - (1.0 - q).ln())
            .collect();
        let off = params
            .sensitivity
            .iter()
            .zip(&params.specificity)
            .map(|(&p, &q)| (1.0 - p).ln() - q.ln())
            .collect();
        LogTerms { on, off }
    }

    /// Posterior for one decision vector given the prior log-odds.
    fn posterior(&self, prior_logit: f64, decisions: impl Iterator<Item = bool>, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(
            decisions
                .enumerate()
                .map(|(j, d)| if d { self.on[j] } else { self.off[j] }),
        );
        let logit = prior_logit + sorted_sum(scratch);
        logistic(logit)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

/// Distinct rater decision patterns (J <= 64) with multiplicities.
struct Patterns {
    keys: Vec<u64>,
    counts: Vec<f64>,
    /// pattern index of each voxel
    of_voxel: Vec<u32>,
}

impl Patterns {
    fn build(masks: &[RegionMask]) -> Self {
        let n = masks[0].data().len();
        let voxel_keys: Vec<u64> = (0..n)
            .map(|i| {
                masks
                    .iter()
                    .enumerate()
                    .fold(0u64, |k, (j, m)| k | ((m.data()[i] as u64) << j))
            })
            .collect();
        let mut keys = voxel_keys.clone();
        keys.sort_unstable();
        keys.dedup();
        let mut counts = vec![0.0; keys.len()];
        let of_voxel = voxel_keys
            .iter()
            .map(|k| {
                let idx = keys.binary_search(k).expect("key present");
                counts[idx] += 1.0;
                idx as u32
            })
            .collect();
        Patterns {
            keys,
            counts,
            of_voxel,
        }
    }
}

/// Sufficient statistics for the M-step, one entry per voxel or pattern.
struct MStepInput<'a> {
    weights: &'a [f64],
    posterior: &'a [f64],
    decision: &'a dyn Fn(usize, usize) -> bool,
}

fn m_step(input: &MStepInput<'_>, prev: &StapleParams) -> StapleParams {
    let raters = prev.sensitivity.len();
    let k = input.posterior.len();
    let fg: Vec<f64> = (0..k).map(|i| input.weights[i] * input.posterior[i]).collect();
    let bg: Vec<f64> = (0..k)
        .map(|i| input.weights[i] * (1.0 - input.posterior[i]))
        .collect();
    let mut scratch = Vec::with_capacity(k);
    let sum_fg = {
        scratch.clone_from(&fg);
        sorted_sum(&mut scratch)
    };
    let sum_bg = {
        scratch.clone_from(&bg);
        sorted_sum(&mut scratch)
    };
    let mut sensitivity = Vec::with_capacity(raters);
    let mut specificity = Vec::with_capacity(raters);
    for j in 0..raters {
        scratch.clear();
        scratch.extend((0..k).filter(|&i| (input.decision)(i, j)).map(|i| fg[i]));
        let tp = sorted_sum(&mut scratch);
        scratch.clear();
        scratch.extend((0..k).filter(|&i| !(input.decision)(i, j)).map(|i| bg[i]));
        let tn = sorted_sum(&mut scratch);
        sensitivity.push(if sum_fg > 0.0 {
            clamp_prob(tp / sum_fg)
        } else {
            prev.sensitivity[j]
        });
        specificity.push(if sum_bg > 0.0 {
            clamp_prob(tn / sum_bg)
        } else {
            prev.specificity[j]
        });
    }
    StapleParams {
        sensitivity,
        specificity,
        prior: prev.prior,
        max_iters: prev.max_iters,
        tol: prev.tol,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Runs EM over `k` units (patterns or voxels) and returns the posterior per
/// unit together with the parameters re-estimated from it.
fn run_em(
    k: usize,
    raters: usize,
    init: &StapleParams,
    weights: &[f64],
    prior_logit: &dyn Fn(usize) -> f64,
    decision: &dyn Fn(usize, usize) -> bool,
) -> (Vec<f64>, StapleParams, usize, bool) {
    let mut params = init.clamped();
    let mut previous: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut scratch = Vec::with_capacity(raters);
    for it in 1..=init.max_iters {
        let terms = LogTerms::new(&params);
        let w: Vec<f64> = (0..k)
            .map(|u| terms.posterior(prior_logit(u), (0..raters).map(|j| decision(u, j)), &mut scratch))
            .collect();
        params = m_step(
            &MStepInput {
                weights,
                posterior: &w,
                decision,
            },
            &params,
        );
        iterations = it;
        let done = previous
            .as_ref()
            .is_some_and(|prev| max_abs_diff(prev, &w) < init.tol);
        previous = Some(w);
        if done {
            converged = true;
            break;
        }
    }
    (previous.expect("at least one iteration"), params, iterations, converged)
}

fn staple_inputs(masks: &[RegionMask], init: &StapleParams) -> Result<Geometry> {
    let geom = check_same_geometry(masks.iter().map(|m| &m.geom))?.clone();
    init.validate(masks.len())?;
    Ok(geom)
}

fn finish(
    geom: Geometry,
    region: Option<Region>,
    posterior: Vec<f64>,
    final_params: StapleParams,
    iterations: usize,
    converged: bool,
) -> StapleResult {
    let data = posterior.iter().map(|&w| w >= 0.5).collect();
    StapleResult {
        mask: RegionMask { region, geom, data },
        posterior,
        final_params,
        iterations,
        converged,
    }
}

fn common_region(masks: &[RegionMask]) -> Option<Region> {
    let r = masks[0].region();
    masks.iter().all(|m| m.region() == r).then_some(r).flatten()
}

/// Binary STAPLE with a stationary prior `init.prior`.
pub fn staple_binary(masks: &[RegionMask], init: &StapleParams) -> Result<StapleResult> {
    let geom = staple_inputs(masks, init)?;
    let raters = masks.len();
    if raters > 64 {
        let prior = vec![init.prior; geom.len()];
        return staple_voxelwise(masks, init, &prior, geom);
    }
    let patterns = Patterns::build(masks);
    let prior_logit = logit(clamp_prob(init.prior));
    let keys = &patterns.keys;
    let (w, params, iterations, converged) = run_em(
        keys.len(),
        raters,
        init,
        &patterns.counts,
        &|_| prior_logit,
        &|u, j| (keys[u] >> j) & 1 == 1,
    );
    let posterior = patterns.of_voxel.iter().map(|&u| w[u as usize]).collect();
    Ok(finish(geom, common_region(masks), posterior, params, iterations, converged))
}

/// Binary STAPLE with a spatially varying prior (one γ per voxel).
pub fn staple_binary_with_prior(
    masks: &[RegionMask],
    init: &StapleParams,
    prior: &[f64],
) -> Result<StapleResult> {
    let geom = staple_inputs(masks, init)?;
    if prior.len() != geom.len() || prior.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument(format!(
            "per-voxel prior needs {} values in [0, 1]",
            geom.len()
        )));
    }
    staple_voxelwise(masks, init, prior, geom)
}

fn staple_voxelwise(
    masks: &[RegionMask],
    init: &StapleParams,
    prior: &[f64],
    geom: Geometry,
) -> Result<StapleResult> {
    let n = geom.len();
    let logits: Vec<f64> = prior.iter().map(|&g| logit(clamp_prob(g))).collect();
    let ones = vec![1.0; n];
    let (w, params, iterations, converged) = run_em(
        n,
        masks.len(),
        init,
        &ones,
        &|u| logits[u],
        &|u, j| masks[j].data()[u],
    );
    Ok(finish(geom, common_region(masks), w, params, iterations, converged))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelStaple {
    pub labels: LabelMap,
    /// One binary run per region in ET, TC, WT order.
    pub regions: Vec<StapleResult>,
}

/// Label-map STAPLE: binary STAPLE on each of ET/TC/WT, then recomposition
/// with the nesting repair of [`recompose_labels`].
pub fn staple_multilabel(maps: &[LabelMap], config: &StapleConfig) -> Result<MultiLabelStaple> {
    check_same_geometry(maps.iter().map(Spatial::geometry))?;
    let mut regions = Vec::with_capacity(3);
    for r in Region::ALL {
        let masks: Vec<RegionMask> = maps.iter().map(|m| region_mask(m, r)).collect();
        regions.push(staple_binary(&masks, &config.params_for(&masks))?);
    }
    let labels = recompose_labels(&regions[0].mask, &regions[1].mask, &regions[2].mask)?;
    Ok(MultiLabelStaple { labels, regions })
}
