use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectionRecord, PipelineConfig, RefreshReason};
use crate::completion::CompletionIssue;
use crate::error::Result;
use crate::imaging::io::{ensure_dir, save_mask, save_probability_png, FrameTemplate};
use crate::imaging::{resize_mask_nearest, FrameSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u32,
    pub fg_ratio: f64,
    pub bg_refreshed: bool,
    pub warm_up: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refresh_reason: Option<RefreshReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refresh_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub completion_issues: Vec<CompletionIssue>,
}

/// Config snapshot plus the per-frame audit trail of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub source_id: String,
    pub frame_count: usize,
    pub input_width: usize,
    pub input_height: usize,
    pub config: PipelineConfig,
    pub frames: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(seq: &FrameSequence, config: &PipelineConfig, records: &[DetectionRecord]) -> Self {
        let (w, h) = seq
            .frames()
            .first()
            .map_or((0, 0), |f| (f.width(), f.height()));
        Self {
            source_id: seq.source_id.clone(),
            frame_count: records.len(),
            input_width: w,
            input_height: h,
            config: config.clone(),
            frames: records
                .iter()
                .map(|r| ManifestEntry {
                    index: r.source_index,
                    fg_ratio: r.fg_ratio,
                    bg_refreshed: r.bg_refreshed,
                    warm_up: r.warm_up,
                    refresh_reason: r.refresh_reason,
                    refresh_error: r.refresh_error.clone(),
                    completion_issues: r.refresh_issues.clone(),
                })
                .collect(),
        }
    }

    /// Source indices of frames after which the background changed.
    pub fn refresh_indices(&self) -> Vec<u32> {
        self.frames.iter().filter(|f| f.bg_refreshed).map(|f| f.index).collect()
    }
}

/// Write one mask PNG per record (at the input size, named by `template`
/// with the source index), optional 16-bit probability maps, and
/// `manifest.json`.
pub fn write_run(
    dir: &Path,
    records: &[DetectionRecord],
    manifest: &RunManifest,
    template: &FrameTemplate,
    write_probabilities: bool,
) -> Result<()> {
    ensure_dir(dir)?;
    let (w, h) = (manifest.input_width, manifest.input_height);
    for r in records {
        let name = template.format(r.source_index);
        save_mask(&resize_mask_nearest(&r.mask, w, h), &dir.join(&name))?;
        if let (true, Some(p)) = (write_probabilities, &r.probability) {
            let stem = name.rsplit_once('.').map_or(name.as_str(), |(s, _)| s);
            save_probability_png(p.width, p.height, &p.data, &dir.join(format!("{stem}.prob.png")))?;
        }
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(manifest)?)?;
    Ok(())
}
