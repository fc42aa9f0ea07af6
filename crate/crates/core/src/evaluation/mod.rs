//! Ground-truth comparison, the seven change-detection scores and
//! table-shaped reports.

mod aggregate;
mod metrics;
mod report;
mod video;

pub use aggregate::{aggregate, mean_metrics, summarize, CategoryRow, Summary, VideoResult};
pub use metrics::{metrics, round4, ConfusionCounts, GroundTruthFrame, GtLabel, LabelScheme, MetricSet, METRIC_NAMES};
pub use report::{
    parse_report_csv, parse_report_json, read_report, Report, ReportRow, SCOPE_CATEGORY, SCOPE_CATEGORY_MEAN,
    SCOPE_VIDEO, SCOPE_VIDEO_MEAN,
};
pub use video::{
    evaluate_dirs, evaluate_masks, parse_ranges, read_ranges, video_dir, warm_up_indices, EvalOptions, RangeEntry,
    VideoCounts,
};
