use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionCounts, GroundTruthFrame, LabelScheme};
use crate::error::{Error, Result};
use crate::imaging::io::{list_indices, load_labels, load_mask, FrameTemplate, DEFAULT_GT_TEMPLATE, DEFAULT_MASK_TEMPLATE};
use crate::imaging::{resize_mask_nearest, MaskFrame};
use crate::pipeline::RunManifest;

/// One line of an evaluation-range file: the annotated frames of a video,
/// inclusive on both ends.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeEntry {
    pub category: String,
    pub video: String,
    pub first: u32,
    pub last: u32,
}

/// Read a CSV range file with header `category,video,first,last`.
pub fn read_ranges(path: &Path) -> Result<Vec<RangeEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_ranges(file)
}

pub fn parse_ranges(reader: impl std::io::Read) -> Result<Vec<RangeEntry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rdr.deserialize() {
        let e: RangeEntry = row?;
        if e.first > e.last {
            return Err(Error::Config(format!("range for {} has first {} > last {}", e.video, e.first, e.last)));
        }
        if !seen.insert(e.video.clone()) {
            return Err(Error::Config(format!("video {} listed twice", e.video)));
        }
        out.push(e);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub pred_template: FrameTemplate,
    pub gt_template: FrameTemplate,
    pub labels: LabelScheme,
    /// Inclusive index range; frames outside are skipped.
    pub range: Option<(u32, u32)>,
    /// Count frames the run manifest marks as warm-up.
    pub include_warm_up: bool,
    /// Resample both masks to this size before comparing.
    pub resize: Option<(usize, usize)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            pred_template: FrameTemplate::parse(DEFAULT_MASK_TEMPLATE).expect("valid template"),
            gt_template: FrameTemplate::parse(DEFAULT_GT_TEMPLATE).expect("valid template"),
            labels: LabelScheme::default(),
            range: None,
            include_warm_up: false,
            resize: None,
        }
    }
}

/// Pooled counts over a video and the number of frames that contributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VideoCounts {
    pub counts: ConfusionCounts,
    pub frames: usize,
}

/// Warm-up indices recorded by a run, if the directory has a manifest.
pub fn warm_up_indices(pred_dir: &Path) -> Result<BTreeSet<u32>> {
    let path = pred_dir.join("manifest.json");
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let manifest: RunManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
    Ok(manifest.frames.iter().filter(|f| f.warm_up).map(|f| f.index).collect())
}

/// Compare every ground-truth frame (within the range) against the
/// prediction with the same index.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, opts: &EvalOptions) -> Result<VideoCounts> {
    let skip = if opts.include_warm_up {
        BTreeSet::new()
    } else {
        warm_up_indices(pred_dir)?
    };
    let indices: Vec<u32> = list_indices(gt_dir, &opts.gt_template)?
        .into_iter()
        .filter(|i| opts.range.map_or(true, |(a, b)| (a..=b).contains(i)))
        .filter(|i| !skip.contains(i))
        .collect();
    let mut counts = ConfusionCounts::default();
    for &i in &indices {
        let pred_path = pred_dir.join(opts.pred_template.format(i));
        if !pred_path.exists() {
            return Err(Error::MissingFrame {
                dir: pred_dir.to_path_buf(),
                index: i,
            });
        }
        let pred = load_mask(&pred_path)?;
        let (w, h, gray) = load_labels(&gt_dir.join(opts.gt_template.format(i)))?;
        let gt = GroundTruthFrame::from_gray(w, h, &gray, &opts.labels)?;
        let (pred, gt) = match opts.resize {
            Some((rw, rh)) => (resize_mask_nearest(&pred, rw, rh), gt.resized(rw, rh)),
            None => (pred, gt),
        };
        counts.accumulate(&pred, &gt)?;
    }
    Ok(VideoCounts {
        counts,
        frames: indices.len(),
    })
}

/// In-memory counterpart of [`evaluate_dirs`]: `warm_up[i]` frames are
/// skipped unless `include_warm_up`.
pub fn evaluate_masks(
    preds: &[MaskFrame],
    truth: &[GroundTruthFrame],
    warm_up: &[bool],
    include_warm_up: bool,
) -> Result<VideoCounts> {
    if preds.len() != truth.len() || preds.len() != warm_up.len() {
        return Err(Error::dims(
            format!("{} frames", truth.len()),
            format!("{} predictions, {} flags", preds.len(), warm_up.len()),
        ));
    }
    let mut counts = ConfusionCounts::default();
    let mut frames = 0;
    for ((p, g), &w) in preds.iter().zip(truth).zip(warm_up) {
        if w && !include_warm_up {
            continue;
        }
        counts.accumulate(p, g)?;
        frames += 1;
    }
    Ok(VideoCounts { counts, frames })
}

/// Locate the per-video directories for a range entry: `<root>/<video>`
/// when it exists, otherwise the root itself.
pub fn video_dir(root: &Path, video: &str) -> PathBuf {
    let sub = root.join(video);
    if sub.is_dir() {
        sub
    } else {
        root.to_path_buf()
    }
}
