//! Score a few hand-made videos and print the report in its three forms.
//!
//! cargo run --example evaluation_report -- [report_stem]

use bmc_saliency::evaluation::{ConfusionCounts, GroundTruthFrame, LabelScheme, Report, VideoResult};
use bmc_saliency::imaging::MaskFrame;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // One frame scored pixel by pixel, with a band of ignored labels.
    let (w, h) = (16, 12);
    let gray: Vec<u8> = (0..w * h)
        .map(|i| match i % w {
            0..=3 => 255,
            4 => 170,
            _ => 0,
        })
        .collect();
    let gt = GroundTruthFrame::from_gray(w, h, &gray, &LabelScheme::default())?;
    let pred = MaskFrame::from_fn(w, h, |x, _| x < 6);
    let mut counts = ConfusionCounts::default();
    counts.accumulate(&pred, &gt)?;
    println!("frame counts: {counts:?}");

    let report = Report::build(vec![
        VideoResult::new("toy", "synthetic", 1, counts),
        VideoResult::new("cats01", "animals", 20, ConfusionCounts::new(900, 100, 300, 8700)),
        // No detections at all: precision and F are undefined, not zero.
        VideoResult::new("cats02", "animals", 20, ConfusionCounts::new(0, 0, 50, 9950)),
    ])?;
    print!("{}", report.to_table());
    println!("{}", report.to_csv_string()?);

    if let Some(stem) = std::env::args().nth(1) {
        report.write(stem.as_ref())?;
        println!("written to {stem}.csv and {stem}.json");
    }
    Ok(())
}
