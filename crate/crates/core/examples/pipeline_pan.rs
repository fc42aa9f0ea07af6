//! Run the full detector on a synthetic panning scene and score it against
//! the exact masks.
//!
//! cargo run --release --example pipeline_pan -- [out_dir]

use std::time::Instant;

use bmc_saliency::evaluation::{evaluate_masks, metrics, GroundTruthFrame};
use bmc_saliency::imaging::io::FrameTemplate;
use bmc_saliency::imaging::{FrameSequence, MaskFrame};
use bmc_saliency::pipeline::{run_video, write_run, PipelineConfig};
use bmc_saliency::synth::{generate, SceneKind, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let scene = generate(&SceneSpec::new(SceneKind::Pan));
    let seq = FrameSequence::new(scene.frames.clone(), "pan")?;
    let cfg = PipelineConfig::default();

    let start = Instant::now();
    let out = run_video(&seq, &cfg)?;
    println!("{} frames in {:.2?}", seq.len(), start.elapsed());
    println!("refreshes after frames {:?}", out.manifest.refresh_indices());

    let preds: Vec<MaskFrame> = out.records.iter().map(|r| r.mask.clone()).collect();
    let truth: Vec<GroundTruthFrame> = scene.ground_truth.iter().map(GroundTruthFrame::from_mask).collect();
    let warm: Vec<bool> = out.records.iter().map(|r| r.warm_up).collect();
    for include in [false, true] {
        let vc = evaluate_masks(&preds, &truth, &warm, include)?;
        let m = metrics(&vc.counts);
        println!(
            "{} frames{}: recall {:.4} precision {:.4} F {:.4}",
            vc.frames,
            if include { " incl. warm-up" } else { "" },
            m.recall.unwrap_or(f64::NAN),
            m.precision.unwrap_or(f64::NAN),
            m.f_measure.unwrap_or(f64::NAN),
        );
    }

    if let Some(dir) = std::env::args().nth(1) {
        write_run(dir.as_ref(), &out.records, &out.manifest, &FrameTemplate::parse("bin%06d.png")?, false)?;
        println!("masks and manifest written to {dir}");
    }
    Ok(())
}
