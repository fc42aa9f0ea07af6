//! Following completed flow through the window to unmasked source pixels,
//! and fusing what was found.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::flow_completion::CompletedFlow;
use crate::imaging::{FloatFrame, Frame, MaskFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Offsets at which a candidate records source gradients, in the order
/// +x, -x, +y, -y.
pub const GRADIENT_OFFSETS: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub frame: usize,
    /// Normalized color at the landing point.
    pub color: Vec<f32>,
    pub chain_length: usize,
    pub direction: Direction,
    /// Per [`GRADIENT_OFFSETS`] entry: source(landing + offset) - source(landing).
    pub gradients: [Vec<f32>; 4],
}

impl Candidate {
    pub fn weight(&self) -> f32 {
        1.0 / (1.0 + self.chain_length as f32)
    }
}

/// Candidates for every masked pixel of the target frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// (pixel index, candidates), in raster order.
    pub entries: Vec<(usize, Vec<Candidate>)>,
}

/// Weighted fusion of one pixel's candidates: (color, gradients).
pub type Fused = (Vec<f32>, [Vec<f32>; 4]);

impl CandidateSet {
    pub fn candidate_count(&self) -> usize {
        self.entries.iter().map(|e| e.1.len()).sum()
    }

    /// Fuse each entry with weights `1 / (1 + chain_length)`. `None` where a
    /// pixel has no candidate.
    pub fn fused(&self) -> Vec<(usize, Option<Fused>)> {
        self.entries
            .iter()
            .map(|(i, cands)| (*i, fuse_one(cands, self.channels)))
            .collect()
    }
}

fn fuse_one(cands: &[Candidate], channels: usize) -> Option<Fused> {
    if cands.is_empty() {
        return None;
    }
    // Sum in a canonical order so list order cannot change the rounding.
    let mut order: Vec<&Candidate> = cands.iter().collect();
    order.sort_by(|a, b| {
        (a.chain_length, a.frame, a.direction as u8)
            .cmp(&(b.chain_length, b.frame, b.direction as u8))
            .then_with(|| a.color.partial_cmp(&b.color).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| {
                a.gradients
                    .partial_cmp(&b.gradients)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let mut color = vec![0.0f64; channels];
    let mut grads: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0f64; channels]);
    let mut total = 0.0f64;
    for c in order {
        let wt = f64::from(c.weight());
        total += wt;
        for ch in 0..channels {
            color[ch] += wt * f64::from(c.color[ch]);
            for (g, cg) in grads.iter_mut().zip(&c.gradients) {
                g[ch] += wt * f64::from(cg[ch]);
            }
        }
    }
    let norm = |v: Vec<f64>| v.into_iter().map(|x| (x / total) as f32).collect::<Vec<f32>>();
    Some((norm(color), grads.map(norm)))
}

/// Fill every masked pixel that has candidates with their weighted mean.
/// Pixels without candidates keep the base color and are flagged in the
/// residual mask.
pub fn fuse_candidates(candidates: &CandidateSet, base: &Frame) -> (Frame, MaskFrame) {
    let mut out = base.to_float();
    let mut residual = MaskFrame::empty(base.width(), base.height());
    for (i, fused) in candidates.fused() {
        let (x, y) = (i % base.width(), i / base.width());
        match fused {
            Some((color, _)) => {
                for (c, v) in color.into_iter().enumerate() {
                    out.set(x, y, c, v);
                }
            }
            None => residual.set(x, y, true),
        }
    }
    (out.to_frame(), residual)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainParams {
    /// Non-adjacent jump length in frames.
    pub stride: usize,
    /// Hop budget; `None` means the window length.
    pub max_hops: Option<usize>,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            stride: 5,
            max_hops: None,
        }
    }
}

/// Completed flows keyed by (source, target) frame index.
pub type FlowMap = BTreeMap<(usize, usize), CompletedFlow>;

#[derive(Clone, Debug)]
struct Chain {
    pixel: usize,
    direction: Direction,
    frame: usize,
    x: f32,
    y: f32,
    hops: usize,
}

/// Chain state for every masked pixel of `target`, advanced one hop at a
/// time so the flows a hop needs can be produced in between.
pub(crate) struct Chainer<'a> {
    frames: &'a [FloatFrame],
    masks: &'a [MaskFrame],
    params: ChainParams,
    target: usize,
    active: Vec<Chain>,
    found: BTreeMap<usize, Vec<Candidate>>,
}

impl<'a> Chainer<'a> {
    pub(crate) fn new(
        frames: &'a [FloatFrame],
        masks: &'a [MaskFrame],
        target: usize,
        params: ChainParams,
    ) -> Self {
        let mask = &masks[target];
        let w = mask.width();
        let mut active = Vec::new();
        let mut found = BTreeMap::new();
        for i in (0..w * mask.height()).filter(|&i| mask.is_fg_index(i)) {
            found.insert(i, Vec::new());
            for direction in [Direction::Forward, Direction::Backward] {
                active.push(Chain {
                    pixel: i,
                    direction,
                    frame: target,
                    x: (i % w) as f32,
                    y: (i / w) as f32,
                    hops: 0,
                });
            }
        }
        Self {
            frames,
            masks,
            params,
            target,
            active,
            found,
        }
    }

    fn max_hops(&self) -> usize {
        self.params.max_hops.unwrap_or(self.frames.len())
    }

    fn step_frames(&self, frame: usize, dir: Direction) -> (Option<usize>, Option<usize>) {
        let n = self.frames.len();
        let s = self.params.stride;
        match dir {
            Direction::Forward => ((frame + 1 < n).then_some(frame + 1), (s >= 2 && frame + s < n).then_some(frame + s)),
            Direction::Backward => (frame.checked_sub(1), if s >= 2 { frame.checked_sub(s) } else { None }),
        }
    }

    pub(crate) fn is_done(&self) -> bool {
        self.active.is_empty()
    }

    /// Flow pairs the next hop will read.
    pub(crate) fn needed_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .active
            .iter()
            .flat_map(|c| {
                let (a, s) = self.step_frames(c.frame, c.direction);
                [a, s].into_iter().flatten().map(move |j| (c.frame, j))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    fn landing(&self, flows: &FlowMap, from: usize, to: usize, x: f32, y: f32) -> Option<(f32, f32)> {
        let f = flows.get(&(from, to))?;
        let (u, v) = f.flow.sample(x, y);
        let (qx, qy) = (x + u, y + v);
        let (w, h) = (f.flow.width as f32, f.flow.height as f32);
        (qx >= 0.0 && qy >= 0.0 && qx <= w - 1.0 && qy <= h - 1.0).then_some((qx, qy))
    }

    fn is_masked(&self, frame: usize, (x, y): (f32, f32)) -> bool {
        let m = &self.masks[frame];
        let xi = ((x + 0.5).floor() as usize).min(m.width() - 1);
        let yi = ((y + 0.5).floor() as usize).min(m.height() - 1);
        m.is_fg(xi, yi)
    }

    fn candidate(&self, frame: usize, (x, y): (f32, f32), chain_length: usize, direction: Direction) -> Candidate {
        let img = &self.frames[frame];
        let mask = &self.masks[frame];
        let color = unmasked_bilinear(img, mask, x, y);
        let gradients = GRADIENT_OFFSETS.map(|(dx, dy)| {
            (0..img.channels)
                .map(|c| img.sample_clamped(x + dx as f32, y + dy as f32, c) - img.sample_clamped(x, y, c))
                .collect()
        });
        Candidate {
            frame,
            color,
            chain_length,
            direction,
            gradients,
        }
    }

    /// Advance every active chain by one hop.
    pub(crate) fn step(&mut self, flows: &FlowMap) {
        let max_hops = self.max_hops();
        let chains = std::mem::take(&mut self.active);
        for mut c in chains {
            let (adj, far) = self.step_frames(c.frame, c.direction);
            let hops = c.hops + 1;
            let land_adj = adj.and_then(|j| self.landing(flows, c.frame, j, c.x, c.y).map(|q| (j, q)));
            let land_far = far.and_then(|j| self.landing(flows, c.frame, j, c.x, c.y).map(|q| (j, q)));
            let hit = [land_adj, land_far]
                .into_iter()
                .flatten()
                .find(|&(j, q)| !self.is_masked(j, q));
            if let Some((j, q)) = hit {
                let cand = self.candidate(j, q, hops, c.direction);
                self.found.get_mut(&c.pixel).expect("chain pixel registered").push(cand);
                continue;
            }
            if hops >= max_hops {
                continue;
            }
            if let Some((j, (qx, qy))) = land_far.or(land_adj) {
                c.frame = j;
                c.x = qx;
                c.y = qy;
                c.hops = hops;
                self.active.push(c);
            }
        }
    }

    pub(crate) fn finish(self) -> CandidateSet {
        let m = &self.masks[self.target];
        CandidateSet {
            width: m.width(),
            height: m.height(),
            channels: self.frames[self.target].channels,
            entries: self.found.into_iter().collect(),
        }
    }
}

/// Bilinear color at (x, y) using only unmasked taps, renormalized. The
/// caller guarantees the nearest tap is unmasked.
fn unmasked_bilinear(img: &FloatFrame, mask: &MaskFrame, x: f32, y: f32) -> Vec<f32> {
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f32;
    let fy = y - y0 as f32;
    let taps = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    let mut out = vec![0.0f32; img.channels];
    let mut total = 0.0;
    for &(tx, ty, wt) in &taps {
        if wt > 0.0 && !mask.is_fg(tx, ty) {
            total += wt;
            for (c, o) in out.iter_mut().enumerate() {
                *o += wt * img.get(tx, ty, c);
            }
        }
    }
    if total > 0.0 {
        out.iter_mut().for_each(|o| *o /= total);
    } else {
        let xi = ((x + 0.5).floor() as usize).min(img.width - 1);
        let yi = ((y + 0.5).floor() as usize).min(img.height - 1);
        for (c, o) in out.iter_mut().enumerate() {
            *o = img.get(xi, yi, c);
        }
    }
    out
}

/// Chain every masked pixel of `target` forward and backward through
/// `flows`. Pairs missing from the map end the chains that need them.
pub fn chain_candidates(
    frames: &[Frame],
    masks: &[MaskFrame],
    flows: &FlowMap,
    target: usize,
    params: ChainParams,
) -> CandidateSet {
    let floats: Vec<FloatFrame> = frames.iter().map(Frame::to_float).collect();
    let mut chainer = Chainer::new(&floats, masks, target, params);
    while !chainer.is_done() {
        chainer.step(flows);
    }
    chainer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowField;
    use crate::flow_completion::FlowProvenance;
    use proptest::prelude::*;

    fn completed(f: FlowField) -> CompletedFlow {
        let n = f.len();
        CompletedFlow {
            flow: f,
            provenance: vec![FlowProvenance::Observed; n],
            warning: None,
            iterations: 0,
            residuals: Vec::new(),
        }
    }

    fn uniform_flows(n: usize, w: usize, h: usize, per_frame: f32, stride: usize) -> FlowMap {
        let mut map = FlowMap::new();
        for i in 0..n {
            for j in [i + 1, i + stride] {
                if j < n {
                    let d = (j - i) as f32 * per_frame;
                    map.insert((i, j), completed(FlowField::uniform(w, h, d, 0.0)));
                    map.insert((j, i), completed(FlowField::uniform(w, h, -d, 0.0)));
                }
            }
        }
        map
    }

    fn mask_at(w: usize, h: usize, px: &[(usize, usize)]) -> MaskFrame {
        MaskFrame::from_fn(w, h, |x, y| px.contains(&(x, y)))
    }

    #[test]
    fn identity_transport_one_forward_hop() {
        let (w, h) = (6, 5);
        let frames: Vec<Frame> = (0..3).map(|t| Frame::filled(w, h, 1, 40 * t as u8 + 10)).collect();
        let masks = vec![mask_at(w, h, &[]), mask_at(w, h, &[(2, 2)]), mask_at(w, h, &[])];
        let flows = uniform_flows(3, w, h, 0.0, 5);
        let set = chain_candidates(&frames, &masks, &flows, 1, ChainParams::default());
        assert_eq!(set.entries.len(), 1);
        let cands = &set.entries[0].1;
        let fwd: Vec<_> = cands.iter().filter(|c| c.direction == Direction::Forward).collect();
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd[0].frame, 2);
        assert_eq!(fwd[0].chain_length, 1);
        assert!((fwd[0].color[0] * 255.0 - 90.0).abs() < 1e-3);
    }

    #[test]
    fn fully_occluded_pixel_has_no_candidates() {
        let (w, h) = (6, 5);
        let frames = vec![Frame::filled(w, h, 1, 50); 4];
        let masks = vec![mask_at(w, h, &[(3, 1)]); 4];
        let flows = uniform_flows(4, w, h, 0.0, 2);
        let set = chain_candidates(&frames, &masks, &flows, 3, ChainParams { stride: 2, max_hops: None });
        assert_eq!(set.entries, vec![(w + 3, vec![])]);
        let (out, residual) = fuse_candidates(&set, &frames[3]);
        assert!(residual.is_fg(3, 1));
        assert_eq!(out, frames[3]);
    }

    #[test]
    fn translation_transport_on_ramp() {
        // Background content moves right 1 px per frame, so the flow from
        // frame t to t+1 is +1 in x.
        let (w, h) = (40, 6);
        let ramp = |t: usize| Frame::from_fn(w, h, 1, move |x, _, _| (3 * (x + 20 - t)) as u8);
        let frames: Vec<Frame> = (0..5).map(ramp).collect();
        let masks = vec![
            mask_at(w, h, &[]),
            mask_at(w, h, &[(10, 3)]),
            mask_at(w, h, &[(11, 3)]),
            mask_at(w, h, &[]),
            mask_at(w, h, &[]),
        ];
        let flows = uniform_flows(5, w, h, 1.0, 5);
        let set = chain_candidates(&frames, &masks, &flows, 1, ChainParams::default());
        let fwd = set.entries[0].1.iter().find(|c| c.direction == Direction::Forward).unwrap();
        assert_eq!((fwd.frame, fwd.chain_length), (3, 2));
        let want = f32::from(frames[3].get(12, 3, 0));
        assert!((fwd.color[0] * 255.0 - want).abs() <= 1.0);
        let bwd = set.entries[0].1.iter().find(|c| c.direction == Direction::Backward).unwrap();
        assert_eq!((bwd.frame, bwd.chain_length), (0, 1));
    }

    #[test]
    fn stride_jump_counts_one_hop() {
        let (w, h) = (8, 4);
        let frames = vec![Frame::filled(w, h, 1, 90); 8];
        let mut masks = vec![mask_at(w, h, &[(4, 2)]); 8];
        masks[0] = mask_at(w, h, &[]);
        let flows = uniform_flows(8, w, h, 0.0, 3);
        let set = chain_candidates(&frames, &masks, &flows, 7, ChainParams { stride: 3, max_hops: None });
        let c = &set.entries[0].1;
        assert_eq!(c.len(), 1);
        // 7 -> 4 -> 1 -> 0, the last hop adjacent.
        assert_eq!((c[0].frame, c[0].chain_length), (0, 3));
        let capped = chain_candidates(&frames, &masks, &flows, 7, ChainParams { stride: 3, max_hops: Some(2) });
        assert!(capped.entries[0].1.is_empty());
    }

    #[test]
    fn candidates_never_come_from_masked_sources() {
        let (w, h) = (10, 10);
        let frames: Vec<Frame> = (0..6).map(|t| Frame::filled(w, h, 1, 20 + t as u8)).collect();
        let masks: Vec<MaskFrame> = (0..6)
            .map(|t| MaskFrame::from_fn(w, h, |x, y| x >= t && x < t + 3 && y < 5))
            .collect();
        let flows = uniform_flows(6, w, h, 0.0, 2);
        let set = chain_candidates(&frames, &masks, &flows, 3, ChainParams { stride: 2, max_hops: None });
        for (i, cands) in &set.entries {
            for c in cands {
                assert!(!masks[c.frame].is_fg_index(*i));
                assert!(c.chain_length >= 1);
            }
        }
    }

    fn cand(v: f32, len: usize) -> Candidate {
        Candidate {
            frame: len,
            color: vec![v / 255.0],
            chain_length: len,
            direction: Direction::Backward,
            gradients: std::array::from_fn(|_| vec![0.0]),
        }
    }

    #[test]
    fn fusion_weights() {
        let base = Frame::filled(2, 1, 1, 0);
        let set = |c: Vec<Candidate>| CandidateSet {
            width: 2,
            height: 1,
            channels: 1,
            entries: vec![(0, c)],
        };
        assert_eq!(fuse_candidates(&set(vec![cand(120.0, 2)]), &base).0.get(0, 0, 0), 120);
        let two = set(vec![cand(100.0, 1), cand(200.0, 3)]);
        assert_eq!(fuse_candidates(&two, &base).0.get(0, 0, 0), 133);
    }

    proptest! {
        #[test]
        fn fusion_is_permutation_invariant(
            vals in proptest::collection::vec((0u8..=255, 1usize..20), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let cands: Vec<Candidate> = vals.iter().map(|&(v, l)| cand(f32::from(v), l)).collect();
            let mut shuffled = cands.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(fuse_one(&cands, 1), fuse_one(&shuffled, 1));
        }
    }
}
