//! Run the full encoder-decoder on one synthetic frame.
//!
//! `cargo run --release --example segmenter_forward [weights.bin]`
//! Without a weights file a seeded random store is used, which exercises
//! every layer but carries no learned behaviour.

use std::path::PathBuf;
use std::time::Instant;

use bmc_saliency::imaging::{CANONICAL_HEIGHT, CANONICAL_WIDTH};
use bmc_saliency::segmenter::{assemble_input, segment_with_network, FpmSource, NetworkSpec, WeightStore};
use bmc_saliency::synth::{generate, SceneKind, SceneSpec};

fn main() -> bmc_saliency::Result<()> {
    let net = NetworkSpec::standard();
    let trace = net.shape_trace(CANONICAL_HEIGHT, CANONICAL_WIDTH)?;
    for (layer, (c, h, w)) in net.layers.iter().zip(&trace) {
        let skip = if layer.skip_channels > 0 {
            format!("{}+{}", layer.skip_channels, layer.in_channels)
        } else {
            layer.in_channels.to_string()
        };
        println!("{:<16} {:>8} -> {:>4} x {:>3} x {:>3}", format!("{:?}", layer.kind), skip, c, h, w);
    }

    let weights = match std::env::args().nth(1).map(PathBuf::from) {
        Some(path) => WeightStore::load(&path, &net)?,
        None => WeightStore::random(&net, 7),
    };
    println!("parameters: {}", weights.parameter_count());

    let scene = generate(&SceneSpec {
        length: 40,
        ..SceneSpec::new(SceneKind::Pan)
    });
    let frames = &scene.frames;
    let input = assemble_input(&scene.plates[39], &frames[9..39], &frames[39], &FpmSource::default(), None)?;

    let t = Instant::now();
    let (prob, mask) = segment_with_network(&net, &weights, &input, 0.5)?;
    let (lo, hi) = prob.data.iter().fold((1.0f32, 0.0f32), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    println!(
        "forward {:.2?}: {}x{}, p in [{lo:.4}, {hi:.4}], foreground {:.3}",
        t.elapsed(),
        prob.width,
        prob.height,
        mask.fg_ratio()
    );
    Ok(())
}
