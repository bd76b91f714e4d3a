//! Browser bindings for the segfuse demo page.
//!
//! Everything returns flat RGBA buffers sized for a `<canvas>` ImageData,
//! plus a few plain numbers for the readouts.

use wasm_bindgen::prelude::*;

use segfuse::fusion::{staple_multilabel, StapleConfig};
use segfuse::metrics::{dice, edt, hd95};
use segfuse::synth::{corrupt_labels, make_phantom, PhantomSpec};
use segfuse::tiling::{plan_tiling, TilingPlan, Weighting, DEFAULT_SIGMA_FRAC};
use segfuse::{region_mask, LabelMap, Region, RegionMask, Volume};

fn js_err(e: segfuse::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn label_color(label: u8) -> Option<[u8; 3]> {
    match label {
        1 => Some([220, 60, 50]),
        2 => Some([70, 190, 80]),
        4 => Some([250, 210, 40]),
        _ => None,
    }
}

/// Blue to yellow ramp for t in [0, 1].
fn heat(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [(255.0 * t) as u8, (200.0 * t.sqrt()) as u8, (255.0 * (1.0 - t)) as u8]
}

/// Phantom, corrupted raters and their STAPLE fusion.
#[wasm_bindgen]
pub struct FusionDemo {
    size: usize,
    image: Volume,
    panels: Vec<LabelMap>,
}

#[wasm_bindgen]
impl FusionDemo {
    /// Builds a `size`^3 phantom with `raters` copies corrupted at `rate`,
    /// then fuses them. Panels: truth, each rater, fused.
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, raters: usize, rate: f64, seed: u32) -> Result<FusionDemo, JsError> {
        Self::build(size, raters, rate, seed).map_err(js_err)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[wasm_bindgen(js_name = panelCount)]
    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Axial slice `z` of panel `panel`: intensity with the labels on top.
    #[wasm_bindgen(js_name = sliceRgba)]
    pub fn slice_rgba(&self, panel: usize, z: usize) -> Vec<u8> {
        let (n, labels) = (self.size, &self.panels[panel.min(self.panels.len() - 1)]);
        let z = z.min(n - 1);
        let max = self.image.data().iter().cloned().fold(1.0, f64::max);
        let mut out = Vec::with_capacity(n * n * 4);
        for y in 0..n {
            for x in 0..n {
                let g = (self.image.get(x, y, z) / max * 200.0) as u8;
                let rgb = match label_color(labels.get(x, y, z)) {
                    Some(c) => c.map(|v| ((v as u16 * 3 + g as u16) / 4) as u8),
                    None => [g; 3],
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }

    /// Dice of each panel against the truth for `region` (0 ET, 1 TC, 2 WT).
    pub fn dice(&self, region: usize) -> Vec<f64> {
        let r = Region::ALL[region.min(2)];
        let truth = region_mask(&self.panels[0], r);
        self.panels
            .iter()
            .map(|m| dice(&region_mask(m, r), &truth).unwrap_or(f64::NAN))
            .collect()
    }

    /// HD95 in mm of each panel against the truth for `region`.
    pub fn hd95(&self, region: usize) -> Vec<f64> {
        let r = Region::ALL[region.min(2)];
        let truth = region_mask(&self.panels[0], r);
        self.panels
            .iter()
            .map(|m| hd95(&region_mask(m, r), &truth).unwrap_or(f64::NAN))
            .collect()
    }

    /// Distance (mm) from each voxel of slice `z` to the panel's `region`,
    /// as a heat map clipped at `max_mm`. Region voxels are drawn white.
    #[wasm_bindgen(js_name = distanceRgba)]
    pub fn distance_rgba(&self, panel: usize, region: usize, z: usize, max_mm: f64) -> Vec<u8> {
        let n = self.size;
        let z = z.min(n - 1);
        let m = region_mask(&self.panels[panel.min(self.panels.len() - 1)], Region::ALL[region.min(2)]);
        let mut out = Vec::with_capacity(n * n * 4);
        let field = edt(&m).ok();
        for y in 0..n {
            for x in 0..n {
                let rgb = match &field {
                    _ if m.get(x, y, z) => [255; 3],
                    Some(f) => heat(f.at(x, y, z) / max_mm.max(1e-9)),
                    None => [0; 3],
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }
}

impl FusionDemo {
    fn build(size: usize, raters: usize, rate: f64, seed: u32) -> segfuse::Result<Self> {
        if raters == 0 {
            return Err(segfuse::Error::InvalidArgument("need at least one rater".into()));
        }
        let (gt, image) = make_phantom(&PhantomSpec::new([size; 3], seed as u64))?;
        let mut panels = vec![gt.clone()];
        for k in 0..raters {
            panels.push(corrupt_labels(&gt, rate, (seed as u64) << 8 | k as u64));
        }
        let fused = staple_multilabel(&panels[1..], &StapleConfig::default())?.labels;
        panels.push(fused);
        Ok(FusionDemo { size, image, panels })
    }

    pub fn labels(&self, panel: usize) -> &LabelMap {
        &self.panels[panel]
    }

    pub fn mask(&self, panel: usize, region: Region) -> RegionMask {
        region_mask(&self.panels[panel], region)
    }
}

/// Stitching weight accumulated over a 2-D sliding-window plan.
#[wasm_bindgen]
pub struct TilingDemo {
    plan: TilingPlan,
    sum: Vec<f64>,
}

#[wasm_bindgen]
impl TilingDemo {
    /// A `width` x `height` image tiled with square patches.
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize, patch: usize, stride: usize, gaussian: bool) -> Result<TilingDemo, JsError> {
        Self::build(width, height, patch, stride, gaussian).map_err(js_err)
    }

    #[wasm_bindgen(js_name = windowCount)]
    pub fn window_count(&self) -> usize {
        self.plan.windows.len()
    }

    /// Summed window weight per pixel, normalised to the maximum, with
    /// window outlines drawn over it.
    pub fn rgba(&self) -> Vec<u8> {
        let [w, h, _] = self.plan.volume_shape;
        let max = self.sum.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        let mut out = Vec::with_capacity(w * h * 4);
        for y in 0..h {
            for x in 0..w {
                let edge = self.plan.windows.iter().any(|b| {
                    let inside = (b.lo[0]..=b.hi[0]).contains(&x) && (b.lo[1]..=b.hi[1]).contains(&y);
                    inside && (x == b.lo[0] || x == b.hi[0] || y == b.lo[1] || y == b.hi[1])
                });
                let rgb = if edge { [255; 3] } else { heat(self.sum[x + w * y] / max) };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }

    /// Smallest and largest summed weight over the image.
    pub fn range(&self) -> Vec<f64> {
        let lo = self.sum.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.sum.iter().cloned().fold(0.0, f64::max);
        vec![lo, hi]
    }
}

impl TilingDemo {
    fn build(width: usize, height: usize, patch: usize, stride: usize, gaussian: bool) -> segfuse::Result<Self> {
        let plan = plan_tiling([width, height, 1], [patch, patch, 1], [stride, stride, 1])?;
        let weighting = if gaussian {
            Weighting::Gaussian {
                sigma_frac: DEFAULT_SIGMA_FRAC,
            }
        } else {
            Weighting::Uniform
        };
        let wts = plan.weights(weighting)?;
        let pw = plan.patch_shape[0];
        let mut sum = vec![0.0; width * height];
        for b in &plan.windows {
            for y in b.lo[1]..=b.hi[1] {
                for x in b.lo[0]..=b.hi[0] {
                    if x < width && y < height {
                        sum[x + width * y] += wts[(x - b.lo[0]) + pw * (y - b.lo[1])];
                    }
                }
            }
        }
        Ok(TilingDemo { plan, sum })
    }
}
