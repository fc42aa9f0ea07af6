//! Background initialization, per-frame detection and the refresh feedback
//! loop that regenerates the background from the segmenter's own masks.

mod config;
mod ghost;
mod output;

pub use config::{PipelineConfig, SegmenterChoice};
pub use ghost::suppress_ghosts;
pub use output::{write_run, ManifestEntry, RunManifest};

use std::collections::VecDeque;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::completion::{complete_background, CompletionIssue, CompletionStats, FillTag};
use crate::error::{Error, Result};
use crate::imaging::{dilate_mask, median_of, resize_bilinear, Frame, FrameSequence, MaskFrame};
use crate::segmenter::{
    assemble_input, differencing_segment, segment_with_network, NetworkSpec, ProbabilityMap, WeightStore,
};

/// Current background state. Replaced only by initialization and refreshes.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    pub empty_background: Frame,
    /// Last `recent_window` canonical frames, oldest first.
    pub recent_frames: VecDeque<Frame>,
    /// Frame whose completion produced `empty_background`.
    pub last_refresh: usize,
    /// How each background pixel was filled, row-major.
    pub filled: Vec<FillTag>,
    /// Issues reported by the completion that produced the background.
    pub issues: Vec<CompletionIssue>,
    pub completion_stats: CompletionStats,
}

impl BackgroundModel {
    /// RGB image with one color per [`FillTag`].
    pub fn provenance_image(&self) -> Frame {
        let w = self.empty_background.width();
        Frame::from_fn(w, self.empty_background.height(), 3, |x, y, c| self.filled[y * w + x].color()[c])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshReason {
    Initialization,
    Section,
    Deterioration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    /// Position in the processed sequence.
    pub frame_index: usize,
    /// Number from the input file name.
    pub source_index: u32,
    pub mask: MaskFrame,
    pub probability: Option<ProbabilityMap>,
    pub fg_ratio: f64,
    /// The background changed after this frame.
    pub bg_refreshed: bool,
    /// Detected against the bootstrap median during initialization.
    pub warm_up: bool,
    pub refresh_reason: Option<RefreshReason>,
    pub refresh_error: Option<String>,
    /// Issues from the completion behind a refresh at this frame.
    pub refresh_issues: Vec<CompletionIssue>,
}

impl DetectionRecord {
    fn new(frame_index: usize, mask: MaskFrame, probability: Option<ProbabilityMap>) -> Self {
        Self {
            frame_index,
            source_index: frame_index as u32,
            fg_ratio: mask.fg_ratio(),
            mask,
            probability,
            bg_refreshed: false,
            warm_up: false,
            refresh_reason: None,
            refresh_error: None,
            refresh_issues: Vec::new(),
        }
    }
}

/// Which refresh, if any, is due after frame `index` was detected.
///
/// `ratios` are foreground ratios of the frames detected since the last
/// refresh, oldest first. The deterioration trigger needs a full window of
/// them so a refresh is never re-triggered by the frames that caused it.
pub fn refresh_trigger(index: usize, last_refresh: usize, ratios: &[f64], cfg: &PipelineConfig) -> Option<RefreshReason> {
    if cfg.section_length > 0 && index.saturating_sub(last_refresh) >= cfg.section_length {
        return Some(RefreshReason::Section);
    }
    let n = cfg.deterioration_window;
    if ratios.len() >= n {
        let mean = ratios[ratios.len() - n..].iter().sum::<f64>() / n as f64;
        if mean > cfg.deterioration_fg_ratio {
            return Some(RefreshReason::Deterioration);
        }
    }
    None
}

/// Detection state machine over one video.
pub struct Pipeline {
    config: PipelineConfig,
    network: Option<(NetworkSpec, WeightStore)>,
    model: Option<BackgroundModel>,
    /// Canonical frames and raw masks available to refreshes, oldest first.
    history: VecDeque<(Frame, MaskFrame)>,
    ratios_since_refresh: Vec<f64>,
    previous_mask: Option<MaskFrame>,
    next_index: usize,
}

impl Pipeline {
    /// Validate the config and load weights when the network is selected.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let network = match (config.segmenter, &config.weights) {
            (SegmenterChoice::Network, Some(path)) => {
                let net = NetworkSpec::standard();
                let weights = WeightStore::load(path, &net)?;
                Some((net, weights))
            }
            _ => None,
        };
        Ok(Self::assemble(config, network))
    }

    /// Use an in-memory network instead of a weights file.
    pub fn with_network(mut config: PipelineConfig, net: NetworkSpec, weights: WeightStore) -> Result<Self> {
        config.segmenter = SegmenterChoice::Network;
        net.validate()?;
        net.shape_trace(config.canonical_height, config.canonical_width)?;
        weights.check_against(&net)?;
        let mut probe = config.clone();
        probe.weights = Some("<memory>".into());
        probe.validate()?;
        Ok(Self::assemble(config, Some((net, weights))))
    }

    fn assemble(config: PipelineConfig, network: Option<(NetworkSpec, WeightStore)>) -> Self {
        Self {
            config,
            network,
            model: None,
            history: VecDeque::new(),
            ratios_since_refresh: Vec::new(),
            previous_mask: None,
            next_index: 0,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&BackgroundModel> {
        self.model.as_ref()
    }

    fn canonical(&self, frame: &Frame) -> Result<Frame> {
        if frame.channels() != 3 {
            return Err(Error::WrongChannelCount {
                expected: 3,
                found: frame.channels(),
            });
        }
        resize_bilinear(frame, self.config.canonical_width, self.config.canonical_height)
    }

    fn segment(
        &self,
        frame: &Frame,
        background: &Frame,
        recent: &[Frame],
        previous: Option<&MaskFrame>,
    ) -> Result<(Option<ProbabilityMap>, MaskFrame)> {
        match &self.network {
            Some((net, weights)) => {
                let input = assemble_input(background, recent, frame, &self.config.fpm, previous)?;
                let (p, m) = segment_with_network(net, weights, &input, self.config.threshold)?;
                Ok((Some(p), m))
            }
            None => Ok((None, differencing_segment(frame, background, &self.config.differencing)?)),
        }
    }

    fn complete(&self, frames: Vec<Frame>, masks: &[MaskFrame]) -> Result<crate::completion::CompletedFrame> {
        let dilated: Vec<MaskFrame> = masks.iter().map(|m| dilate_mask(m, self.config.mask_dilation)).collect();
        complete_background(&FrameSequence::new(frames, "window")?, &dilated, &self.config.completion)
    }

    /// Build the first background from `frames` (exactly `init_window` of
    /// them) and return warm-up detections made against the bootstrap median.
    pub fn initialize(&mut self, frames: &[Frame]) -> Result<Vec<DetectionRecord>> {
        let n = self.config.init_window;
        if frames.len() != n {
            return Err(Error::Precondition(format!(
                "initialization takes {n} frames, got {}",
                frames.len()
            )));
        }
        let window: Vec<Frame> = frames.iter().map(|f| self.canonical(f)).collect::<Result<_>>()?;
        let bootstrap = median_of(&window)?;

        let m = self.config.recent_window;
        let mut records = Vec::with_capacity(n);
        let mut previous: Option<MaskFrame> = None;
        for (i, frame) in window.iter().enumerate() {
            let recent = &window[i.saturating_sub(m)..i];
            let (prob, mut mask) = self.segment(frame, &bootstrap, recent, previous.as_ref())?;
            if self.config.ghost_suppression {
                mask = suppress_ghosts(&mask, frame, &bootstrap);
            }
            previous = Some(mask.clone());
            let mut rec = DetectionRecord::new(i, mask, prob);
            rec.warm_up = true;
            records.push(rec);
        }

        let masks: Vec<MaskFrame> = records.iter().map(|r| r.mask.clone()).collect();
        let completed = self.complete(window.clone(), &masks)?;
        info!(
            "initialized on {n} frames: {} masked pixels, {} flows, {} issues",
            completed.stats.masked_pixels,
            completed.stats.flows_computed,
            completed.issues.len()
        );
        let last = records.last_mut().expect("init_window >= 2");
        last.bg_refreshed = true;
        last.refresh_reason = Some(RefreshReason::Initialization);
        last.refresh_issues = completed.issues.clone();

        let keep = self.config.history_len();
        self.history = window
            .iter()
            .cloned()
            .zip(masks)
            .skip(n.saturating_sub(keep))
            .collect();
        self.model = Some(BackgroundModel {
            empty_background: completed.frame,
            recent_frames: window[n.saturating_sub(m)..].iter().cloned().collect(),
            last_refresh: n - 1,
            filled: completed.filled,
            issues: completed.issues,
            completion_stats: completed.stats,
        });
        self.previous_mask = previous;
        self.ratios_since_refresh.clear();
        self.next_index = n;
        Ok(records)
    }

    /// Segment the next frame against the current background. Does not refresh.
    pub fn detect_frame(&mut self, frame: &Frame) -> Result<DetectionRecord> {
        let model = self.model.as_ref().ok_or(Error::NotInitialized)?;
        let canon = self.canonical(frame)?;
        let recent: Vec<Frame> = model.recent_frames.iter().cloned().collect();
        let (prob, mask) = self.segment(&canon, &model.empty_background, &recent, self.previous_mask.as_ref())?;
        let record = DetectionRecord::new(self.next_index, mask.clone(), prob);
        debug!("frame {}: fg ratio {:.4}", record.frame_index, record.fg_ratio);

        let model = self.model.as_mut().expect("checked above");
        model.recent_frames.push_back(canon.clone());
        while model.recent_frames.len() > self.config.recent_window {
            model.recent_frames.pop_front();
        }
        self.history.push_back((canon, mask.clone()));
        while self.history.len() > self.config.history_len() {
            self.history.pop_front();
        }
        self.ratios_since_refresh.push(record.fg_ratio);
        self.previous_mask = Some(mask);
        self.next_index += 1;
        Ok(record)
    }

    /// Refresh the background if a trigger fires after the most recently
    /// detected frame. Failures keep the old background and are reported.
    pub fn maybe_refresh(&mut self) -> Result<Option<(RefreshReason, Result<()>)>> {
        let model = self.model.as_ref().ok_or(Error::NotInitialized)?;
        let Some(index) = self.next_index.checked_sub(1) else {
            return Ok(None);
        };
        let Some(reason) = refresh_trigger(index, model.last_refresh, &self.ratios_since_refresh, &self.config) else {
            return Ok(None);
        };
        let span = if self.config.section_length > 0 {
            self.config.section_length
        } else {
            self.config.init_window
        };
        let take = span.min(self.history.len());
        let outcome = if take < 2 {
            Err(Error::Precondition(format!("refresh window of {take} frame(s) is too short")))
        } else {
            let tail = self.history.range(self.history.len() - take..);
            let (frames, masks): (Vec<Frame>, Vec<MaskFrame>) = tail.cloned().unzip();
            self.complete(frames, &masks)
        };

        let model = self.model.as_mut().expect("checked above");
        model.last_refresh = index;
        self.ratios_since_refresh.clear();
        match outcome {
            Ok(done) => {
                info!("frame {index}: {reason:?} refresh over {take} frames");
                model.empty_background = done.frame;
                model.filled = done.filled;
                model.issues = done.issues;
                model.completion_stats = done.stats;
                Ok(Some((reason, Ok(()))))
            }
            Err(e) => {
                warn!("frame {index}: {reason:?} refresh failed, keeping background: {e}");
                Ok(Some((reason, Err(e))))
            }
        }
    }

    /// Detect the next frame, then refresh if due, flagging the record.
    pub fn process(&mut self, frame: &Frame) -> Result<DetectionRecord> {
        let mut record = self.detect_frame(frame)?;
        if let Some((reason, outcome)) = self.maybe_refresh()? {
            record.refresh_reason = Some(reason);
            match outcome {
                Ok(()) => {
                    record.bg_refreshed = true;
                    record.refresh_issues = self.model.as_ref().expect("initialized").issues.clone();
                }
                Err(e) => record.refresh_error = Some(e.to_string()),
            }
        }
        Ok(record)
    }
}

/// Records and manifest of one run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<DetectionRecord>,
    pub manifest: RunManifest,
}

/// Initialize on the first `init_window` frames, then detect and refresh
/// frame by frame. One record per input frame, in order.
pub fn run_video(seq: &FrameSequence, config: &PipelineConfig) -> Result<RunOutput> {
    run_with(Pipeline::new(config.clone())?, seq)
}

/// [`run_video`] with a prepared pipeline (for in-memory weights).
pub fn run_with(mut pipeline: Pipeline, seq: &FrameSequence) -> Result<RunOutput> {
    let n = pipeline.config.init_window;
    if seq.len() <= n {
        return Err(Error::Precondition(format!(
            "video has {} frames, needs more than init_window = {n}",
            seq.len()
        )));
    }
    let frames = seq.frames();
    let mut records = pipeline.initialize(&frames[..n])?;
    for frame in &frames[n..] {
        records.push(pipeline.process(frame)?);
    }
    for (r, &idx) in records.iter_mut().zip(seq.indices()) {
        r.source_index = idx;
    }
    let manifest = RunManifest::new(seq, &pipeline.config, &records);
    Ok(RunOutput { records, manifest })
}

#[cfg(test)]
mod tests;
