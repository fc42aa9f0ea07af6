//! Flow-guided completion of the last frame of a window: chain candidate
//! pixels through completed flow, fuse them, reconstruct in the gradient
//! domain and diffuse whatever is left.

mod chain;
mod inpaint;
mod poisson;

pub use chain::{
    chain_candidates, fuse_candidates, Candidate, CandidateSet, ChainParams, Direction, FlowMap, Fused,
    GRADIENT_OFFSETS,
};
pub use inpaint::diffusion_inpaint;
pub use poisson::{poisson_reconstruct, Guidance, PoissonResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{estimate_flow_masked, FlowParams};
use crate::flow_completion::{complete_with_params, CompletedFlow, CompletionParams, CompletionWarning};
use crate::imaging::{dilate_mask, FloatFrame, Frame, FrameSequence, MaskFrame};
use crate::{Error, Result};

use chain::Chainer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    /// Frames per completion window.
    pub window: usize,
    pub chain: ChainParams,
    pub flow: FlowParams,
    pub flow_completion: CompletionParams,
    /// Masks are grown by this many pixels before flow inside them is
    /// discarded, so object boundaries do not leak into the background flow.
    pub flow_mask_dilation: usize,
    pub poisson: bool,
    pub poisson_tol: f64,
    pub poisson_max_iters: usize,
    /// Inpainting round budget; `None` means the larger frame side.
    pub inpaint_max_rounds: Option<usize>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            window: 100,
            chain: ChainParams::default(),
            flow: FlowParams::default(),
            flow_completion: CompletionParams::default(),
            flow_mask_dilation: 2,
            poisson: true,
            poisson_tol: 1e-7,
            poisson_max_iters: 5000,
            inpaint_max_rounds: None,
        }
    }
}

/// How each pixel of a completed frame was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillTag {
    Observed,
    FlowFilled,
    Poisson,
    DiffusionInpainted,
}

impl FillTag {
    /// Display color for provenance maps.
    pub fn color(self) -> [u8; 3] {
        match self {
            FillTag::Observed => [0, 0, 0],
            FillTag::FlowFilled => [0, 160, 255],
            FillTag::Poisson => [0, 220, 80],
            FillTag::DiffusionInpainted => [255, 60, 60],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompletionIssue {
    FlowNonConvergence {
        source: usize,
        target: usize,
        iterations: usize,
        residual: f32,
    },
    FlowAllMasked {
        source: usize,
        target: usize,
    },
    PoissonNonConvergence {
        iterations: usize,
        residual: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionStats {
    pub masked_pixels: usize,
    pub flows_computed: usize,
    pub candidates: usize,
    pub poisson_pixels: usize,
    pub inpainted_pixels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedFrame {
    pub frame: Frame,
    pub filled: Vec<FillTag>,
    pub issues: Vec<CompletionIssue>,
    pub stats: CompletionStats,
}

impl CompletedFrame {
    pub fn count(&self, tag: FillTag) -> usize {
        self.filled.iter().filter(|&&t| t == tag).count()
    }

    /// RGB image with one color per [`FillTag`].
    pub fn provenance_image(&self) -> Frame {
        let (w, h) = (self.frame.width(), self.frame.height());
        Frame::from_fn(w, h, 3, |x, y, c| self.filled[y * w + x].color()[c])
    }
}

/// Complete the last frame of `window`, treating foreground in `masks` as
/// missing. The whole sequence is the window.
pub fn complete_background(window: &FrameSequence, masks: &[MaskFrame], cfg: &CompletionConfig) -> Result<CompletedFrame> {
    let frames = window.frames();
    let n = frames.len();
    if n < 2 {
        return Err(Error::Precondition(format!("completion window needs >= 2 frames, got {n}")));
    }
    if masks.len() != n {
        return Err(Error::Precondition(format!("{} masks for {n} frames", masks.len())));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some(m) = masks.iter().find(|m| !m.same_size(w, h)) {
        return Err(Error::dims(format!("{w}x{h}"), format!("{}x{}", m.width(), m.height())));
    }
    let target = n - 1;
    let last = &frames[target];
    let mask = &masks[target];
    let mut filled = vec![FillTag::Observed; w * h];
    let mut stats = CompletionStats {
        masked_pixels: mask.count_fg(),
        ..CompletionStats::default()
    };
    if mask.is_empty() {
        return Ok(CompletedFrame {
            frame: last.clone(),
            filled,
            issues: Vec::new(),
            stats,
        });
    }

    let colors: Vec<FloatFrame> = frames.iter().map(Frame::to_float).collect();
    let grays: Vec<FloatFrame> = colors.iter().map(FloatFrame::luminance).collect();
    let flow_masks: Vec<MaskFrame> = masks.iter().map(|m| dilate_mask(m, cfg.flow_mask_dilation)).collect();
    let mut issues = Vec::new();

    let mut chainer = Chainer::new(&colors, masks, target, cfg.chain);
    let mut flows = FlowMap::new();
    while !chainer.is_done() {
        let needed: Vec<(usize, usize)> = chainer
            .needed_pairs()
            .into_iter()
            .filter(|p| !flows.contains_key(p))
            .collect();
        let computed: Vec<Result<((usize, usize), CompletedFlow)>> = needed
            .par_iter()
            .map(|&(i, j)| {
                let raw = estimate_flow_masked(&grays[i], &grays[j], Some(&flow_masks[i]), Some(&flow_masks[j]), &cfg.flow)?;
                let invalid = flow_masks[i].union(&flow_masks[j]);
                Ok(((i, j), complete_with_params(&raw, &invalid, &cfg.flow_completion)?))
            })
            .collect();
        for item in computed {
            let ((i, j), cf) = item?;
            match cf.warning {
                Some(CompletionWarning::NonConvergence { iterations, residual }) => {
                    issues.push(CompletionIssue::FlowNonConvergence {
                        source: i,
                        target: j,
                        iterations,
                        residual,
                    })
                }
                Some(CompletionWarning::AllMasked) => {
                    issues.push(CompletionIssue::FlowAllMasked { source: i, target: j })
                }
                None => {}
            }
            stats.flows_computed += 1;
            flows.insert((i, j), cf);
        }
        chainer.step(&flows);
        // Chains only move away from the target, so a flow is needed again
        // only while some chain still sits on its source frame.
        let live: Vec<usize> = chainer.needed_pairs().iter().map(|p| p.0).collect();
        flows.retain(|k, _| live.contains(&k.0));
    }
    let candidates = chainer.finish();
    stats.candidates = candidates.candidate_count();

    // Partial frame: observed colors, fused colors in the region, NaN where
    // nothing was found.
    let ch = last.channels();
    let mut partial = colors[target].clone();
    let mut region = MaskFrame::empty(w, h);
    let mut missing = vec![false; w * h];
    let mut fused_at: Vec<Option<Fused>> = vec![None; w * h];
    for (i, f) in candidates.fused() {
        match f {
            Some(f) => {
                partial.data[i * ch..(i + 1) * ch].copy_from_slice(&f.0);
                region.set(i % w, i / w, true);
                filled[i] = FillTag::FlowFilled;
                fused_at[i] = Some(f);
            }
            None => {
                partial.data[i * ch..(i + 1) * ch].fill(f32::NAN);
                missing[i] = true;
                filled[i] = FillTag::DiffusionInpainted;
            }
        }
    }

    let mut result = partial.clone();
    if cfg.poisson && !region.is_empty() {
        let guidance = guidance_field(&partial, &region, &missing, &fused_at);
        let solved = poisson_reconstruct(&partial, &region, &guidance, cfg.poisson_tol, cfg.poisson_max_iters)?;
        if !solved.converged {
            issues.push(CompletionIssue::PoissonNonConvergence {
                iterations: solved.iterations,
                residual: solved.residual,
            });
        }
        for (i, tag) in filled.iter_mut().enumerate() {
            if solved.solved[i] {
                *tag = FillTag::Poisson;
                stats.poisson_pixels += 1;
            }
        }
        result = solved.frame;
    }

    stats.inpainted_pixels = missing.iter().filter(|&&m| m).count();
    let rounds = cfg.inpaint_max_rounds.unwrap_or(w.max(h));
    inpaint::inpaint_in_place(&mut result, &mut missing, rounds)?;

    let mut out = result.to_frame();
    for i in (0..w * h).filter(|&i| filled[i] == FillTag::Observed) {
        out.data_mut()[i * ch..(i + 1) * ch].copy_from_slice(&last.data()[i * ch..(i + 1) * ch]);
    }
    Ok(CompletedFrame {
        frame: out,
        filled,
        issues,
        stats,
    })
}

/// Guidance for the region: differences of fused colors between two region
/// pixels, and the fused source gradients across the region boundary.
fn guidance_field(partial: &FloatFrame, region: &MaskFrame, missing: &[bool], fused: &[Option<Fused>]) -> Guidance {
    let (w, h, ch) = (partial.width, partial.height, partial.channels);
    let mut g = Guidance::zeros(w, h, ch);
    let in_region = |x: usize, y: usize| region.is_fg(x, y);
    let observed = |x: usize, y: usize| !region.is_fg(x, y) && !missing[y * w + x];
    for y in 0..h {
        for x in 0..w {
            // Horizontal edge between (x, y) and (x + 1, y).
            if x + 1 < w {
                let (p, q) = ((x, y), (x + 1, y));
                for c in 0..ch {
                    let v = edge_guidance(partial, &in_region, &observed, fused, w, p, q, 0, c);
                    g.gx.set(x, y, c, v);
                }
            }
            if y + 1 < h {
                let (p, q) = ((x, y), (x, y + 1));
                for c in 0..ch {
                    let v = edge_guidance(partial, &in_region, &observed, fused, w, p, q, 2, c);
                    g.gy.set(x, y, c, v);
                }
            }
        }
    }
    g
}

/// Desired `f(q) - f(p)` where `q` is `p` plus the positive unit offset
/// `GRADIENT_OFFSETS[axis]`; `axis + 1` is the matching negative offset.
#[allow(clippy::too_many_arguments)]
fn edge_guidance(
    partial: &FloatFrame,
    in_region: &impl Fn(usize, usize) -> bool,
    observed: &impl Fn(usize, usize) -> bool,
    fused: &[Option<Fused>],
    w: usize,
    p: (usize, usize),
    q: (usize, usize),
    axis: usize,
    c: usize,
) -> f32 {
    let (pr, qr) = (in_region(p.0, p.1), in_region(q.0, q.1));
    let grad = |pt: (usize, usize), k: usize| {
        fused[pt.1 * w + pt.0]
            .as_ref()
            .map(|f| f.1[k][c])
            .unwrap_or(0.0)
    };
    if pr && qr {
        partial.get(q.0, q.1, c) - partial.get(p.0, p.1, c)
    } else if pr && observed(q.0, q.1) {
        grad(p, axis)
    } else if qr && observed(p.0, p.1) {
        -grad(q, axis + 1)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SceneKind, SceneSpec};

    fn seq(frames: Vec<Frame>) -> FrameSequence {
        FrameSequence::new(frames, "test").unwrap()
    }

    #[test]
    fn empty_masks_return_last_frame() {
        let frames: Vec<Frame> = (0..3).map(|t| Frame::filled(16, 12, 3, 10 * t)).collect();
        let masks = vec![MaskFrame::empty(16, 12); 3];
        let c = complete_background(&seq(frames.clone()), &masks, &CompletionConfig::default()).unwrap();
        assert_eq!(c.frame, frames[2]);
        assert_eq!(c.count(FillTag::Observed), 16 * 12);
        assert_eq!(c.stats.flows_computed, 0);
    }

    #[test]
    fn rejects_bad_windows() {
        let f = Frame::filled(16, 12, 3, 1);
        let cfg = CompletionConfig::default();
        assert!(complete_background(&seq(vec![f.clone()]), &[MaskFrame::empty(16, 12)], &cfg).is_err());
        assert!(complete_background(&seq(vec![f.clone(), f.clone()]), &[MaskFrame::empty(16, 12)], &cfg).is_err());
    }

    #[test]
    fn static_box_small_scene() {
        let spec = SceneSpec {
            width: 96,
            height: 80,
            length: 20,
            object_size: 12,
            ..SceneSpec::new(SceneKind::Static)
        };
        let scene = generate(&spec);
        let cfg = CompletionConfig {
            flow: FlowParams {
                levels: 3,
                ..FlowParams::default()
            },
            ..CompletionConfig::default()
        };
        let masks: Vec<MaskFrame> = scene.ground_truth.iter().map(|m| dilate_mask(m, 1)).collect();
        let c = complete_background(&seq(scene.frames.clone()), &masks, &cfg).unwrap();
        let plate = &scene.plates[spec.length - 1];
        let mut worst = 0u8;
        for (a, b) in c.frame.data().iter().zip(plate.data()) {
            worst = worst.max(a.abs_diff(*b));
        }
        assert!(worst <= 3, "max error {worst}");
        assert_eq!(c.count(FillTag::DiffusionInpainted), 0);
        let last = &scene.frames[spec.length - 1];
        for i in 0..96 * 80 {
            if !masks[spec.length - 1].is_fg_index(i) {
                assert_eq!(c.filled[i], FillTag::Observed);
                assert_eq!(&c.frame.data()[i * 3..i * 3 + 3], &last.data()[i * 3..i * 3 + 3]);
            }
        }
    }

    #[test]
    fn never_occluded_region_falls_back_to_diffusion() {
        let frames = vec![Frame::filled(64, 64, 1, 90); 3];
        let m = MaskFrame::from_fn(64, 64, |x, y| (20..30).contains(&x) && (20..30).contains(&y));
        let cfg = CompletionConfig {
            flow: FlowParams {
                levels: 2,
                ..FlowParams::default()
            },
            ..CompletionConfig::default()
        };
        let c = complete_background(&seq(frames.clone()), &vec![m; 3], &cfg).unwrap();
        assert_eq!(c.count(FillTag::DiffusionInpainted), 100);
        assert_eq!(c.frame, frames[2]);
    }
}
