//! Estimate flow between two shifted renderings of a texture and report the
//! endpoint error against the true shift.
//!
//! cargo run --release --example flow_estimation -- [dx] [dy] [out.flo]

use std::time::Instant;

use bmc_saliency::flow::{estimate_flow, FlowField, FlowParams};
use bmc_saliency::synth::Texture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dx: f32 = args.first().map_or(Ok(2.5), |s| s.parse())?;
    let dy: f32 = args.get(1).map_or(Ok(-1.0), |s| s.parse())?;
    let (w, h) = (320, 240);

    let tex = Texture::strong(3);
    let a = tex.render(w, h, 1, 0.0, 0.0).to_float();
    let b = tex.render(w, h, 1, -dx, -dy).to_float();

    let params = FlowParams::default();
    let start = Instant::now();
    let flow = estimate_flow(&a, &b, &params)?;
    let elapsed = start.elapsed();

    let truth = FlowField::uniform(w, h, dx, dy);
    let border = 10;
    let epe: Vec<f32> = flow
        .endpoint_errors(&truth)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| {
            let (x, y) = (i % w, i / w);
            (border..w - border).contains(&x) && (border..h - border).contains(&y)
        })
        .map(|(_, e)| e)
        .collect();
    let mean = epe.iter().sum::<f32>() / epe.len() as f32;
    let max = epe.iter().copied().fold(0.0, f32::max);
    println!("shift ({dx}, {dy}) at {w}x{h}, {} levels, {elapsed:.2?}", params.levels);
    println!("interior EPE mean {mean:.4} px, max {max:.4} px");
    println!("flow at centre {:?}", flow.at(w / 2, h / 2));

    if let Some(path) = args.get(2) {
        flow.write_flo(path.as_ref())?;
        println!("written to {path}");
    }
    Ok(())
}
