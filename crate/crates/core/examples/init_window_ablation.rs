//! Compare initialization windows on the parked-object scene. The object
//! leaves after frame 80, so a 30-frame window never sees the background
//! behind it and the later frames are pure false positives.
//!
//! cargo run --release --example init_window_ablation

use std::time::Instant;

use bmc_saliency::evaluation::{evaluate_masks, metrics, GroundTruthFrame};
use bmc_saliency::imaging::{FrameSequence, MaskFrame};
use bmc_saliency::pipeline::{run_video, PipelineConfig};
use bmc_saliency::synth::{generate, SceneKind, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let scene = generate(&SceneSpec {
        length: 200,
        ..SceneSpec::new(SceneKind::StaticGhost)
    });
    let seq = FrameSequence::new(scene.frames.clone(), "static-ghost")?;
    let truth: Vec<GroundTruthFrame> = scene.ground_truth.iter().map(GroundTruthFrame::from_mask).collect();

    println!("{:>6} {:>12} {:>8} {:>10}", "window", "fp px/frame", "PWC", "time");
    for window in [30, 100] {
        let mut cfg = PipelineConfig {
            init_window: window,
            ..PipelineConfig::default()
        };
        cfg.completion.window = window;
        let start = Instant::now();
        let out = run_video(&seq, &cfg)?;
        let elapsed = start.elapsed();
        // Same frames for both windows; the ground truth there is empty.
        let tail = 100..seq.len();
        let preds: Vec<MaskFrame> = out.records[tail.clone()].iter().map(|r| r.mask.clone()).collect();
        let vc = evaluate_masks(&preds, &truth[tail.clone()], &vec![false; tail.len()], false)?;
        let pwc = metrics(&vc.counts).pwc.unwrap_or(f64::NAN);
        let fp = vc.counts.fp as f64 / vc.frames as f64;
        println!("{window:>6} {fp:>12.1} {pwc:>8.4} {elapsed:>10.2?}");
    }
    Ok(())
}
