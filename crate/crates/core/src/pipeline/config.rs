use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::completion::CompletionConfig;
use crate::error::{Error, Result};
use crate::imaging::{CANONICAL_HEIGHT, CANONICAL_WIDTH};
use crate::segmenter::{DifferencingParams, FpmSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmenterChoice {
    Network,
    Differencing,
}

impl std::str::FromStr for SegmenterChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "network" => Ok(Self::Network),
            "differencing" => Ok(Self::Differencing),
            other => Err(format!("unknown segmenter {other:?} (expected network or differencing)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Frames used to build the first background.
    pub init_window: usize,
    /// Frames between scheduled refreshes; 0 disables them.
    pub section_length: usize,
    pub canonical_width: usize,
    pub canonical_height: usize,
    /// Refresh early when the trailing mean foreground ratio exceeds this.
    /// 1.0 disables the trigger.
    pub deterioration_fg_ratio: f64,
    /// Frames averaged by the deterioration trigger.
    pub deterioration_window: usize,
    pub segmenter: SegmenterChoice,
    /// Weights file for the network segmenter.
    pub weights: Option<PathBuf>,
    /// Probability above which a pixel is foreground.
    pub threshold: f32,
    pub differencing: DifferencingParams,
    pub fpm: FpmSource,
    /// Frames in the recent-background median.
    pub recent_window: usize,
    /// Radius by which segmenter masks grow before completion.
    pub mask_dilation: usize,
    /// Drop initialization blobs whose outline is sharper in the bootstrap
    /// background than in the frame (revealed background, not an object).
    pub ghost_suppression: bool,
    pub completion: CompletionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            init_window: 100,
            section_length: 100,
            canonical_width: CANONICAL_WIDTH,
            canonical_height: CANONICAL_HEIGHT,
            deterioration_fg_ratio: 0.5,
            deterioration_window: 10,
            segmenter: SegmenterChoice::Differencing,
            weights: None,
            threshold: 0.5,
            differencing: DifferencingParams::default(),
            fpm: FpmSource::default(),
            recent_window: 30,
            mask_dilation: 2,
            ghost_suppression: true,
            completion: CompletionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.init_window < 2 {
            return bad(format!("init_window must be >= 2, got {}", self.init_window));
        }
        if !(self.deterioration_fg_ratio > 0.0 && self.deterioration_fg_ratio <= 1.0) {
            return bad(format!(
                "deterioration_fg_ratio must lie in (0, 1], got {}",
                self.deterioration_fg_ratio
            ));
        }
        if self.deterioration_window == 0 {
            return bad("deterioration_window must be >= 1".into());
        }
        if self.canonical_width == 0 || self.canonical_height == 0 {
            return bad("canonical size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.segmenter == SegmenterChoice::Network {
            if self.weights.is_none() {
                return bad("the network segmenter needs a weights file".into());
            }
            if self.canonical_width % 16 != 0 || self.canonical_height % 16 != 0 {
                return bad(format!(
                    "network input {}x{} must be a multiple of 16",
                    self.canonical_width, self.canonical_height
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Frames kept for refresh windows.
    pub fn history_len(&self) -> usize {
        if self.section_length == 0 {
            self.init_window
        } else {
            self.section_length.max(self.init_window)
        }
    }
}
