//! Per-dataset summary statistics and the DSC-first model ranking.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{percentile, CaseMetrics};
use crate::regions::Region;

/// Two average DSCs closer than this are treated as tied.
pub const RANK_DSC_TIE: f64 = 5e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyList);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        Ok(Stats {
            mean,
            stddev: var.sqrt(),
            median: percentile(&mut sorted, 0.5),
            q25: percentile(&mut sorted, 0.25),
            q75: percentile(&mut sorted, 0.75),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerRegion<T> {
    #[serde(rename = "ET")]
    pub et: T,
    #[serde(rename = "TC")]
    pub tc: T,
    #[serde(rename = "WT")]
    pub wt: T,
}

impl<T: Copy> PerRegion<T> {
    pub fn from_fn(mut f: impl FnMut(Region) -> T) -> Self {
        PerRegion {
            et: f(Region::ET),
            tc: f(Region::TC),
            wt: f(Region::WT),
        }
    }

    pub fn get(&self, r: Region) -> T {
        match r {
            Region::ET => self.et,
            Region::TC => self.tc,
            Region::WT => self.wt,
        }
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.et, self.tc, self.wt]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub cases: usize,
    pub dsc: PerRegion<Stats>,
    pub hd95: PerRegion<Stats>,
}

/// Mean, population stddev, median and quartiles per metric and region.
/// Quantiles interpolate linearly, so the result is independent of case order.
pub fn summarize(cases: &[CaseMetrics]) -> Result<SummaryStats> {
    if cases.is_empty() {
        return Err(Error::EmptyList);
    }
    let stats = |f: &dyn Fn(&CaseMetrics) -> f64| -> Result<Stats> {
        let mut v: Vec<f64> = cases.iter().map(f).collect();
        // fixed summation order for permutation invariance
        v.sort_unstable_by(f64::total_cmp);
        Stats::of(&v)
    };
    let mut dsc = Vec::with_capacity(3);
    let mut hd = Vec::with_capacity(3);
    for r in Region::ALL {
        dsc.push(stats(&|c| c.dsc(r))?);
        hd.push(stats(&|c| c.hd95(r))?);
    }
    Ok(SummaryStats {
        cases: cases.len(),
        dsc: PerRegion {
            et: dsc[0],
            tc: dsc[1],
            wt: dsc[2],
        },
        hd95: PerRegion {
            et: hd[0],
            tc: hd[1],
            wt: hd[2],
        },
    })
}

impl SummaryStats {
    /// Row layout of the challenge result tables: DSC to four decimals, HD95 to two.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12}{:<30}{}", "", "DSC", "HD95");
        let _ = writeln!(
            out,
            "{:<12}{:<10}{:<10}{:<10}{:<10}{:<10}{}",
            "", "ET", "TC", "WT", "ET", "TC", "WT"
        );
        type Pick = fn(&Stats) -> f64;
        let rows: [(&str, Pick); 5] = [
            ("Mean", |s| s.mean),
            ("StdDev", |s| s.stddev),
            ("Median", |s| s.median),
            ("25quantile", |s| s.q25),
            ("75quantile", |s| s.q75),
        ];
        for (label, pick) in rows {
            let _ = write!(out, "{label:<12}");
            for s in self.dsc.to_array() {
                let _ = write!(out, "{:<10.4}", pick(&s));
            }
            let hd = self.hd95.to_array();
            for (k, s) in hd.iter().enumerate() {
                if k + 1 < hd.len() {
                    let _ = write!(out, "{:<10.2}", pick(s));
                } else {
                    let _ = write!(out, "{:.2}", pick(s));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub dsc: PerRegion<f64>,
    pub hd95: PerRegion<f64>,
    pub avg_dsc: f64,
    pub avg_hd95: f64,
}

/// Builds a model row from per-region means given in ET, TC, WT order.
pub fn model_summary(name: &str, dsc: [f64; 3], hd95: [f64; 3]) -> ModelSummary {
    ModelSummary {
        name: name.to_string(),
        dsc: PerRegion {
            et: dsc[0],
            tc: dsc[1],
            wt: dsc[2],
        },
        hd95: PerRegion {
            et: hd95[0],
            tc: hd95[1],
            wt: hd95[2],
        },
        avg_dsc: dsc.iter().sum::<f64>() / 3.0,
        avg_hd95: hd95.iter().sum::<f64>() / 3.0,
    }
}

impl ModelSummary {
    /// Model row from the per-case metrics of one model.
    pub fn from_cases(name: &str, cases: &[CaseMetrics]) -> Result<Self> {
        let s = summarize(cases)?;
        Ok(model_summary(
            name,
            s.dsc.to_array().map(|x| x.mean),
            s.hd95.to_array().map(|x| x.mean),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankEntry {
    pub name: String,
    pub rank: usize,
}

/// Entries ordered by rank (best first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRanking {
    pub entries: Vec<RankEntry>,
}

impl ModelRanking {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.rank)
    }
}

fn by_hd_then_name(a: &ModelSummary, b: &ModelSummary) -> std::cmp::Ordering {
    a.avg_hd95
        .total_cmp(&b.avg_hd95)
        .then_with(|| a.name.cmp(&b.name))
}

/// Ranks by average DSC (descending). Models whose average DSC lies within
/// [`RANK_DSC_TIE`] of the best model in their tie group are ordered by
/// average HD95 (ascending), then by name.
pub fn rank_models(summaries: &[ModelSummary]) -> Result<ModelRanking> {
    if summaries.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut sorted: Vec<&ModelSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| b.avg_dsc.total_cmp(&a.avg_dsc).then_with(|| by_hd_then_name(a, b)));

    let mut ordered = Vec::with_capacity(sorted.len());
    let mut start = 0;
    while start < sorted.len() {
        let anchor = sorted[start].avg_dsc;
        let mut end = start + 1;
        while end < sorted.len() && anchor - sorted[end].avg_dsc <= RANK_DSC_TIE {
            end += 1;
        }
        let mut group = sorted[start..end].to_vec();
        group.sort_by(|a, b| by_hd_then_name(a, b));
        ordered.extend(group);
        start = end;
    }
    Ok(ModelRanking {
        entries: ordered
            .into_iter()
            .enumerate()
            .map(|(i, m)| RankEntry {
                name: m.name.clone(),
                rank: i + 1,
            })
            .collect(),
    })
}

/// Model comparison table in input order: per-region DSC and HD95, their
/// averages, and the rank.
pub fn ranking_table(summaries: &[ModelSummary], ranking: &ModelRanking) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16}{:<8}{:<8}{:<8}{:<8}{:<8}{:<8}{:<8}{:<8}Rank",
        "Model", "DSC_ET", "DSC_TC", "DSC_WT", "DSC_Avg", "HD_ET", "HD_TC", "HD_WT", "HD_Avg"
    );
    for m in summaries {
        let _ = write!(out, "{:<16}", m.name);
        for v in m.dsc.to_array().into_iter().chain([m.avg_dsc]) {
            let _ = write!(out, "{v:<8.4}");
        }
        for v in m.hd95.to_array().into_iter().chain([m.avg_hd95]) {
            let _ = write!(out, "{v:<8.2}");
        }
        let _ = writeln!(out, "{}", ranking.rank_of(&m.name).unwrap_or(0));
    }
    out
}
