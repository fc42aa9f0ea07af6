use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::MaskFrame;

/// Pixel-level confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// Add one frame's comparison; ignored ground-truth pixels are skipped.
    pub fn accumulate(&mut self, pred: &MaskFrame, gt: &GroundTruthFrame) -> Result<()> {
        if !pred.same_size(gt.width, gt.height) {
            return Err(Error::dims(
                format!("{}x{}", gt.width, gt.height),
                format!("{}x{}", pred.width(), pred.height()),
            ));
        }
        for (i, label) in gt.labels.iter().enumerate() {
            let p = pred.is_fg_index(i);
            match (label, p) {
                (GtLabel::Ignored, _) => {}
                (GtLabel::Foreground, true) => self.tp += 1,
                (GtLabel::Foreground, false) => self.fn_ += 1,
                (GtLabel::Background, true) => self.fp += 1,
                (GtLabel::Background, false) => self.tn += 1,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GtLabel {
    Background,
    Foreground,
    Ignored,
}

/// Gray values of the ground-truth classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelScheme {
    pub background: u8,
    pub foreground: u8,
    pub ignored: Vec<u8>,
}

impl Default for LabelScheme {
    /// Change-detection convention: 0 static, 255 moving, 50 shadow,
    /// 85 outside the region of interest, 170 unknown motion.
    fn default() -> Self {
        Self {
            background: 0,
            foreground: 255,
            ignored: vec![50, 85, 170],
        }
    }
}

impl LabelScheme {
    /// Plain 0/255 masks with nothing ignored.
    pub fn binary() -> Self {
        Self {
            ignored: Vec::new(),
            ..Self::default()
        }
    }

    fn classify(&self, v: u8) -> Option<GtLabel> {
        if v == self.foreground {
            Some(GtLabel::Foreground)
        } else if v == self.background {
            Some(GtLabel::Background)
        } else if self.ignored.contains(&v) {
            Some(GtLabel::Ignored)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthFrame {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<GtLabel>,
}

impl GroundTruthFrame {
    /// Classify raw gray values; any value outside the scheme is an error.
    pub fn from_gray(width: usize, height: usize, gray: &[u8], scheme: &LabelScheme) -> Result<Self> {
        if gray.len() != width * height {
            return Err(Error::dims(format!("{} samples", width * height), format!("{} samples", gray.len())));
        }
        let labels = gray
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                scheme.classify(v).ok_or(Error::UnrecognizedLabel {
                    x: i % width,
                    y: i / width,
                    value: v,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { width, height, labels })
    }

    pub fn from_mask(mask: &MaskFrame) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            labels: (0..mask.width() * mask.height())
                .map(|i| {
                    if mask.is_fg_index(i) {
                        GtLabel::Foreground
                    } else {
                        GtLabel::Background
                    }
                })
                .collect(),
        }
    }

    /// Nearest-neighbour resampling with pixel-center alignment.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let pick = |dst: usize, from: usize, to: usize| ((2 * dst + 1) * from / (2 * to)).min(from - 1);
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = pick(y, self.height, height);
            for x in 0..width {
                labels.push(self.labels[sy * self.width + pick(x, self.width, width)]);
            }
        }
        Self { width, height, labels }
    }
}

/// The seven scores. `None` marks an undefined value (zero denominator),
/// rendered as a blank cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    /// Percentage, in [0, 100].
    pub pwc: Option<f64>,
    pub f_measure: Option<f64>,
    pub precision: Option<f64>,
}

pub const METRIC_NAMES: [&str; 7] = ["recall", "specificity", "fpr", "fnr", "pwc", "f_measure", "precision"];

impl MetricSet {
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.recall,
            self.specificity,
            self.fpr,
            self.fnr,
            self.pwc,
            self.f_measure,
            self.precision,
        ]
    }

    pub fn from_values(v: [Option<f64>; 7]) -> Self {
        Self {
            recall: v[0],
            specificity: v[1],
            fpr: v[2],
            fnr: v[3],
            pwc: v[4],
            f_measure: v[5],
            precision: v[6],
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> MetricSet {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f_measure = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricSet {
        recall,
        specificity: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.tp + c.fn_),
        pwc: ratio(100 * (c.fn_ + c.fp), c.total()),
        f_measure,
        precision,
    }
}

/// Round half away from zero to 4 decimals, tolerating binary
/// representation error at the tie (0.00125 -> 0.0013).
pub fn round4(v: f64) -> f64 {
    let scaled = v.abs() * 1e4;
    let r = (scaled + 0.5 + 1e-7).floor() / 1e4;
    r.copysign(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gt(w: usize, h: usize, f: impl Fn(usize) -> u8) -> GroundTruthFrame {
        let gray: Vec<u8> = (0..w * h).map(f).collect();
        GroundTruthFrame::from_gray(w, h, &gray, &LabelScheme::default()).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        let truth = gt(20, 15, |i| if i < 100 { 255 } else { 0 });
        let pred = MaskFrame::from_fn(20, 15, |x, y| y * 20 + x < 100);
        let mut c = ConfusionCounts::default();
        c.accumulate(&pred, &truth).unwrap();
        assert_eq!(c, ConfusionCounts::new(100, 0, 0, 200));

        let truth = gt(10, 10, |i| if i < 30 { 255 } else { 0 });
        let mut c = ConfusionCounts::default();
        c.accumulate(&MaskFrame::empty(10, 10), &truth).unwrap();
        assert_eq!(c, ConfusionCounts::new(0, 0, 30, 70));

        let truth = gt(10, 10, |i| if i < 10 { [50, 85, 170][i % 3] } else { 0 });
        let mut c = ConfusionCounts::default();
        c.accumulate(&MaskFrame::empty(10, 10), &truth).unwrap();
        assert_eq!(c.total(), 90);

        assert!(c.accumulate(&MaskFrame::empty(9, 10), &truth).is_err());
    }

    #[test]
    fn unknown_labels_are_rejected() {
        let err = GroundTruthFrame::from_gray(3, 1, &[0, 255, 128], &LabelScheme::default()).unwrap_err();
        assert!(matches!(err, Error::UnrecognizedLabel { x: 2, y: 0, value: 128 }));
        assert!(GroundTruthFrame::from_gray(2, 1, &[0, 50], &LabelScheme::binary()).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&ConfusionCounts::new(50, 0, 50, 0));
        assert_eq!((m.recall, m.fnr), (Some(0.5), Some(0.5)));
        let m = metrics(&ConfusionCounts::new(40, 5, 5, 50));
        assert_eq!(m.pwc, Some(10.0));
        let m = metrics(&ConfusionCounts::new(50, 50, 50, 0));
        assert_eq!((m.precision, m.recall, m.f_measure), (Some(0.5), Some(0.5), Some(0.5)));
    }

    #[test]
    fn undefined_values_are_absent() {
        let m = metrics(&ConfusionCounts::new(0, 0, 100, 0));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.f_measure, None);

        let m = metrics(&ConfusionCounts::new(0, 0, 0, 100));
        assert_eq!(m.recall, None);
        assert_eq!(m.f_measure, None);
        assert_eq!(m.specificity, Some(1.0));

        // Both defined but zero: harmonic mean undefined.
        let m = metrics(&ConfusionCounts::new(0, 10, 10, 80));
        assert_eq!((m.precision, m.recall, m.f_measure), (Some(0.0), Some(0.0), None));

        assert_eq!(metrics(&ConfusionCounts::default()).pwc, None);
        assert!(metrics(&ConfusionCounts::new(1, 1000, 1000, 0)).f_measure.is_some());
    }

    #[test]
    fn rounding_is_half_up_at_four_places() {
        assert_eq!(round4(0.81466), 0.8147);
        assert_eq!(round4(0.00125), 0.0013);
        assert_eq!(round4(0.81464), 0.8146);
        assert_eq!(round4(1.0), 1.0);
        assert_eq!(round4(-0.00125), -0.0013);
    }

    #[test]
    fn resize_keeps_labels() {
        let g = gt(4, 2, |i| [0, 255, 85, 0][i % 4]);
        let up = g.resized(8, 4);
        assert_eq!(up.labels[2], GtLabel::Foreground);
        assert_eq!(up.labels[4], GtLabel::Ignored);
        assert_eq!(up.resized(4, 2), g);
    }

    proptest! {
        #[test]
        fn identities_hold_for_random_counts(
            tp in 0u64..1_000_000, fp in 0u64..1_000_000, fn_ in 0u64..1_000_000, tn in 0u64..1_000_000,
        ) {
            let c = ConfusionCounts::new(tp, fp, fn_, tn);
            let m = metrics(&c);
            if tp + fn_ > 0 {
                prop_assert!((m.recall.unwrap() + m.fnr.unwrap() - 1.0).abs() < 1e-12);
            }
            if tn + fp > 0 {
                prop_assert!((m.specificity.unwrap() + m.fpr.unwrap() - 1.0).abs() < 1e-12);
            }
            if let Some(f) = m.f_measure {
                let closed = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
                prop_assert!((f - closed).abs() < 1e-12);
            } else {
                prop_assert_eq!(tp, 0);
            }
            if let Some(p) = m.pwc {
                prop_assert!((0.0..=100.0).contains(&p));
                prop_assert_eq!(p == 0.0, fp == 0 && fn_ == 0);
            }
        }

        #[test]
        fn accumulation_is_chunking_invariant(seed in 0u64..500, split in 0usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<(MaskFrame, GroundTruthFrame)> = (0..6)
                .map(|_| {
                    let pred = MaskFrame::from_fn(8, 8, |_, _| rng.gen_bool(0.3));
                    let gray: Vec<u8> = (0..64).map(|_| [0, 255, 85][rng.gen_range(0..3)]).collect();
                    (pred, GroundTruthFrame::from_gray(8, 8, &gray, &LabelScheme::default()).unwrap())
                })
                .collect();
            let mut whole = ConfusionCounts::default();
            for (p, g) in &frames {
                whole.accumulate(p, g).unwrap();
            }
            let (mut a, mut b) = (ConfusionCounts::default(), ConfusionCounts::default());
            for (p, g) in &frames[..split] {
                a.accumulate(p, g).unwrap();
            }
            for (p, g) in &frames[split..] {
                b.accumulate(p, g).unwrap();
            }
            a.add(&b);
            prop_assert_eq!(a, whole);
        }
    }
}
