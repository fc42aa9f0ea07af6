use crate::error::{Error, Result};

/// Which (source, target) flows to estimate within a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPairPlan {
    pub window: usize,
    pub stride: usize,
    pub pairs: Vec<(usize, usize)>,
}

impl FlowPairPlan {
    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.pairs.contains(&(source, target))
    }
}

/// All adjacent forward/backward pairs, then `(t, t + stride)` and
/// `(t + stride, t)` for every `t` that keeps both ends in the window.
pub fn plan_flow_pairs(window: usize, stride: usize) -> Result<FlowPairPlan> {
    if window < 2 {
        return Err(Error::Precondition(format!(
            "flow window needs >= 2 frames, got {window}"
        )));
    }
    if stride < 2 {
        return Err(Error::Precondition(format!(
            "non-adjacent stride must be >= 2, got {stride}"
        )));
    }
    let mut pairs = Vec::new();
    for t in 0..window - 1 {
        pairs.push((t, t + 1));
        pairs.push((t + 1, t));
    }
    for t in 0..window.saturating_sub(stride) {
        pairs.push((t, t + stride));
        pairs.push((t + stride, t));
    }
    Ok(FlowPairPlan {
        window,
        stride,
        pairs,
    })
}
