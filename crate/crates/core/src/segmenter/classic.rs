use serde::{Deserialize, Serialize};

use super::network::ProbabilityMap;
use crate::error::{Error, Result};
use crate::imaging::{remove_small_components, Frame, MaskFrame};

/// Foreground iff `p > threshold`.
pub fn binarize(prob: &ProbabilityMap, threshold: f32) -> MaskFrame {
    let fg: Vec<bool> = prob.data.iter().map(|&p| p > threshold).collect();
    MaskFrame::from_bools(prob.width, prob.height, &fg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DifferencingParams {
    /// Gray levels; a pixel is foreground when its largest per-channel
    /// difference exceeds this.
    pub threshold: u8,
    /// Smallest 8-connected blob kept, in pixels.
    pub min_blob: usize,
}

impl Default for DifferencingParams {
    fn default() -> Self {
        Self {
            threshold: 30,
            min_blob: 50,
        }
    }
}

/// Background subtraction against a single reference frame.
pub fn differencing_segment(current: &Frame, background: &Frame, p: &DifferencingParams) -> Result<MaskFrame> {
    if !current.same_shape(background) {
        return Err(Error::dims(background.shape_string(), current.shape_string()));
    }
    let ch = current.channels();
    let fg: Vec<bool> = current
        .data()
        .chunks_exact(ch)
        .zip(background.data().chunks_exact(ch))
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(&x, &y)| x.abs_diff(y))
                .max()
                .unwrap_or(0)
                > p.threshold
        })
        .collect();
    let raw = MaskFrame::from_bools(current.width(), current.height(), &fg);
    Ok(remove_small_components(&raw, p.min_blob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(data: Vec<f32>) -> ProbabilityMap {
        ProbabilityMap {
            width: data.len(),
            height: 1,
            data,
        }
    }

    #[test]
    fn binarize_rules() {
        assert_eq!(binarize(&map(vec![0.9; 4]), 0.5).count_fg(), 4);
        assert_eq!(binarize(&map(vec![0.5; 4]), 0.5).count_fg(), 0);
        assert_eq!(binarize(&map(vec![0.999_999_9, 0.2]), 1.0).count_fg(), 0);
    }

    #[test]
    fn differencing_examples() {
        let bg = Frame::filled(64, 48, 3, 100);
        let p = DifferencingParams {
            threshold: 30,
            min_blob: 50,
        };
        assert!(differencing_segment(&bg, &bg, &p).unwrap().is_empty());

        let boxed = Frame::from_fn(64, 48, 3, |x, y, _| {
            if (10..30).contains(&x) && (5..25).contains(&y) {
                180
            } else {
                100
            }
        });
        let m = differencing_segment(&boxed, &bg, &p).unwrap();
        let want = MaskFrame::from_fn(64, 48, |x, y| (10..30).contains(&x) && (5..25).contains(&y));
        assert_eq!(m, want);

        // Isolated pixels on a lattice: every component has size 1.
        let noisy = Frame::from_fn(64, 48, 3, |x, y, _| if x % 4 == 0 && y % 3 == 0 { 180 } else { 100 });
        let raw = differencing_segment(&noisy, &bg, &DifferencingParams { min_blob: 1, ..p }).unwrap();
        assert_eq!(raw.count_fg(), 16 * 16);
        assert!(differencing_segment(&noisy, &bg, &p).unwrap().is_empty());

        assert!(differencing_segment(&Frame::filled(8, 8, 3, 0), &bg, &p).is_err());
    }

    #[test]
    fn one_channel_difference_is_enough() {
        let bg = Frame::filled(10, 10, 3, 50);
        let cur = Frame::from_fn(10, 10, 3, |_, _, c| if c == 2 { 81 } else { 50 });
        let p = DifferencingParams {
            threshold: 30,
            min_blob: 1,
        };
        assert_eq!(differencing_segment(&cur, &bg, &p).unwrap().count_fg(), 100);
        let cur = Frame::from_fn(10, 10, 3, |_, _, c| if c == 2 { 80 } else { 50 });
        assert!(differencing_segment(&cur, &bg, &p).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_foreground(
            probs in proptest::collection::vec(0.0f32..=1.0, 1..64),
            t1 in 0.0f32..=1.0,
            t2 in 0.0f32..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let m = map(probs);
            let (a, b) = (binarize(&m, lo), binarize(&m, hi));
            for i in 0..m.data.len() {
                prop_assert!(!b.is_fg_index(i) || a.is_fg_index(i));
            }
        }
    }
}
