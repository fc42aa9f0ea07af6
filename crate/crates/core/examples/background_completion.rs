//! Complete the last frame of a synthetic window and compare it with the
//! known clean plate.
//!
//! cargo run --release --example background_completion -- [static|pan|static-ghost] [out_dir]

use std::time::Instant;

use bmc_saliency::completion::{complete_background, CompletionConfig, FillTag};
use bmc_saliency::imaging::io::{ensure_dir, save_frame};
use bmc_saliency::imaging::{dilate_mask, FrameSequence, MaskFrame};
use bmc_saliency::synth::{generate, SceneKind, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let kind: SceneKind = args.next().as_deref().unwrap_or("pan").parse()?;
    let out_dir = args.next();

    let cfg = CompletionConfig::default();
    let scene = generate(&SceneSpec {
        length: cfg.window,
        ..SceneSpec::new(kind)
    });
    let mut masks: Vec<MaskFrame> = scene.ground_truth.iter().map(|m| dilate_mask(m, 2)).collect();
    if kind == SceneKind::StaticGhost {
        // Pretend the detector still flags where the parked object was.
        let parked = dilate_mask(&scene.ground_truth[0], 2);
        let last = masks.len() - 1;
        masks[last] = masks[last].union(&parked);
    }
    let window = FrameSequence::new(scene.frames.clone(), format!("{kind:?}"))?;

    let start = Instant::now();
    let done = complete_background(&window, &masks, &cfg)?;
    let elapsed = start.elapsed();

    let plate = scene.plates.last().expect("non-empty scene");
    let diffs: Vec<u8> = done
        .frame
        .data()
        .iter()
        .zip(plate.data())
        .map(|(a, b)| a.abs_diff(*b))
        .collect();
    let mean = diffs.iter().map(|&d| f64::from(d)).sum::<f64>() / diffs.len() as f64;
    let within3 = diffs.chunks(3).filter(|p| p.iter().all(|&d| d <= 3)).count();
    let masked = masks.last().unwrap();
    let hole: Vec<u8> = (0..masked.width() * masked.height())
        .filter(|&i| masked.is_fg_index(i))
        .flat_map(|i| diffs[i * 3..i * 3 + 3].to_vec())
        .collect();
    let hole_mean = hole.iter().map(|&d| f64::from(d)).sum::<f64>() / hole.len().max(1) as f64;

    println!("scene {kind:?}, window {} frames, {elapsed:.2?}", cfg.window);
    println!("stats {:?}", done.stats);
    for tag in [FillTag::Observed, FillTag::FlowFilled, FillTag::Poisson, FillTag::DiffusionInpainted] {
        println!("  {tag:?}: {}", done.count(tag));
    }
    println!("mean abs error {mean:.4}, inside hole {hole_mean:.3}, max {}", diffs.iter().max().unwrap());
    println!("pixels within 3 levels {:.4}%", 100.0 * within3 as f64 / (diffs.len() / 3) as f64);
    if !done.issues.is_empty() {
        println!("issues: {:?}", done.issues);
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir.as_ref())?;
        save_frame(&done.frame, format!("{dir}/completed.png").as_ref())?;
        save_frame(&done.provenance_image(), format!("{dir}/provenance.png").as_ref())?;
        save_frame(plate, format!("{dir}/plate.png").as_ref())?;
    }
    Ok(())
}
