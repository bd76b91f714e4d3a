//! Phantom, three noisy raters, STAPLE, small-ET relabelling, metrics.

use segfuse::fusion::{staple_multilabel, StapleConfig};
use segfuse::metrics::evaluate_case;
use segfuse::postprocess::et_threshold_relabel;
use segfuse::synth::{corrupt_labels, make_phantom, PhantomSpec};

fn main() -> segfuse::Result<()> {
    let (gt, _image) = make_phantom(&PhantomSpec::new([32; 3], 7))?;
    let raters: Vec<_> = (0..3).map(|k| corrupt_labels(&gt, 0.1, k)).collect();
    let fused = staple_multilabel(&raters, &StapleConfig::default())?.labels;
    let fused = et_threshold_relabel(&fused, 200);
    let m = evaluate_case(&fused, &gt, "case_007")?;
    println!("WT Dice {:.4}, HD95 {:.2} mm", m.dsc_wt, m.hd95_wt);
    Ok(())
}
