use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionCounts, MetricSet};
use crate::error::{Error, Result};

/// Pooled counts and scores of one video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoResult {
    pub video: String,
    pub category: String,
    pub frames: usize,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
}

impl VideoResult {
    pub fn new(video: impl Into<String>, category: impl Into<String>, frames: usize, counts: ConfusionCounts) -> Self {
        Self {
            video: video.into(),
            category: category.into(),
            frames,
            counts,
            metrics: metrics(&counts),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub videos: usize,
    pub metrics: MetricSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub categories: Vec<CategoryRow>,
    /// Mean of the category rows.
    pub category_mean: MetricSet,
    /// Mean over every video, ignoring categories.
    pub video_mean: MetricSet,
}

/// Unweighted mean per metric; absent entries are skipped and a metric
/// absent everywhere stays absent.
pub fn mean_metrics<'a>(sets: impl IntoIterator<Item = &'a MetricSet>) -> MetricSet {
    let mut sum = [0.0f64; 7];
    let mut n = [0usize; 7];
    for s in sets {
        for (k, v) in s.values().iter().enumerate() {
            if let Some(v) = v {
                sum[k] += v;
                n[k] += 1;
            }
        }
    }
    let mut out = [None; 7];
    for k in 0..7 {
        if n[k] > 0 {
            out[k] = Some(sum[k] / n[k] as f64);
        }
    }
    MetricSet::from_values(out)
}

/// Average per-video scores within each category, then across categories
/// and across videos. Category F is the mean of video F values, not the
/// F of averaged precision and recall.
pub fn aggregate(per_video: &[(String, MetricSet)], grouping: &BTreeMap<String, String>) -> Result<Summary> {
    let mut groups: BTreeMap<&str, Vec<&MetricSet>> = grouping.values().map(|c| (c.as_str(), Vec::new())).collect();
    for (video, m) in per_video {
        let cat = grouping
            .get(video)
            .ok_or_else(|| Error::Precondition(format!("video {video:?} has no category")))?;
        groups.get_mut(cat.as_str()).expect("category from grouping").push(m);
    }
    if groups.is_empty() {
        return Err(Error::EmptyCategory(String::new()));
    }
    let mut categories = Vec::with_capacity(groups.len());
    for (cat, sets) in &groups {
        if sets.is_empty() {
            return Err(Error::EmptyCategory(cat.to_string()));
        }
        categories.push(CategoryRow {
            category: cat.to_string(),
            videos: sets.len(),
            metrics: mean_metrics(sets.iter().copied()),
        });
    }
    Ok(Summary {
        category_mean: mean_metrics(categories.iter().map(|c| &c.metrics)),
        video_mean: mean_metrics(per_video.iter().map(|(_, m)| m)),
        categories,
    })
}

/// Aggregate results that carry their own category.
pub fn summarize(results: &[VideoResult]) -> Result<Summary> {
    let grouping = results.iter().map(|r| (r.video.clone(), r.category.clone())).collect();
    let per_video: Vec<_> = results.iter().map(|r| (r.video.clone(), r.metrics)).collect();
    aggregate(&per_video, &grouping)
}
