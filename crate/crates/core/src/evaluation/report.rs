use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{summarize, Summary, VideoResult};
use super::metrics::{round4, ConfusionCounts, MetricSet, METRIC_NAMES};
use crate::error::{Error, Result};

pub const SCOPE_VIDEO: &str = "video";
pub const SCOPE_CATEGORY: &str = "category";
pub const SCOPE_CATEGORY_MEAN: &str = "average-of-categories";
pub const SCOPE_VIDEO_MEAN: &str = "average-of-videos";

/// One flat report line. Counts are present only on video rows; metrics
/// are rounded to 4 decimals and absent values are blank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scope: String,
    pub category: String,
    pub video: String,
    pub frames: Option<usize>,
    pub tp: Option<u64>,
    pub fp: Option<u64>,
    #[serde(rename = "fn")]
    pub fn_: Option<u64>,
    pub tn: Option<u64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub pwc: Option<f64>,
    pub f_measure: Option<f64>,
    pub precision: Option<f64>,
}

impl ReportRow {
    fn new(scope: &str, category: &str, video: &str, m: &MetricSet) -> Self {
        let v = m.values().map(|x| x.map(round4));
        Self {
            scope: scope.into(),
            category: category.into(),
            video: video.into(),
            frames: None,
            tp: None,
            fp: None,
            fn_: None,
            tn: None,
            recall: v[0],
            specificity: v[1],
            fpr: v[2],
            fnr: v[3],
            pwc: v[4],
            f_measure: v[5],
            precision: v[6],
        }
    }

    pub fn metrics(&self) -> MetricSet {
        MetricSet {
            recall: self.recall,
            specificity: self.specificity,
            fpr: self.fpr,
            fnr: self.fnr,
            pwc: self.pwc,
            f_measure: self.f_measure,
            precision: self.precision,
        }
    }

    pub fn counts(&self) -> Option<ConfusionCounts> {
        Some(ConfusionCounts::new(self.tp?, self.fp?, self.fn_?, self.tn?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub videos: Vec<VideoResult>,
    pub summary: Summary,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    videos: Vec<ReportRow>,
    categories: Vec<ReportRow>,
    overall: Vec<ReportRow>,
}

impl Report {
    pub fn build(mut videos: Vec<VideoResult>) -> Result<Self> {
        videos.sort_by(|a, b| (&a.category, &a.video).cmp(&(&b.category, &b.video)));
        if let Some(w) = videos.windows(2).find(|w| w[0].video == w[1].video) {
            return Err(Error::Precondition(format!("video {} reported twice", w[0].video)));
        }
        let summary = summarize(&videos)?;
        Ok(Self { videos, summary })
    }

    /// Video rows grouped by category, then category rows, then the two
    /// overall averages.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .videos
            .iter()
            .map(|v| ReportRow {
                frames: Some(v.frames),
                tp: Some(v.counts.tp),
                fp: Some(v.counts.fp),
                fn_: Some(v.counts.fn_),
                tn: Some(v.counts.tn),
                ..ReportRow::new(SCOPE_VIDEO, &v.category, &v.video, &v.metrics)
            })
            .collect();
        rows.extend(
            self.summary
                .categories
                .iter()
                .map(|c| ReportRow::new(SCOPE_CATEGORY, &c.category, "", &c.metrics)),
        );
        rows.push(ReportRow::new(SCOPE_CATEGORY_MEAN, "", "", &self.summary.category_mean));
        rows.push(ReportRow::new(SCOPE_VIDEO_MEAN, "", "", &self.summary.video_mean));
        rows
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut videos = Vec::new();
        let mut categories = Vec::new();
        let mut overall = Vec::new();
        for row in self.rows() {
            match row.scope.as_str() {
                SCOPE_VIDEO => videos.push(row),
                SCOPE_CATEGORY => categories.push(row),
                _ => overall.push(row),
            }
        }
        Ok(serde_json::to_string_pretty(&JsonReport {
            videos,
            categories,
            overall,
        })?)
    }

    /// Writes `<stem>.csv` and `<stem>.json`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(stem.with_extension("csv"), self.to_csv_string()?)?;
        std::fs::write(stem.with_extension("json"), self.to_json_string()?)?;
        Ok(())
    }

    /// Rebuild from the video rows of a written report. Scores are
    /// recomputed from the stored counts.
    pub fn from_rows(rows: &[ReportRow]) -> Result<Self> {
        let videos = rows
            .iter()
            .filter(|r| r.scope == SCOPE_VIDEO)
            .map(|r| {
                let counts = r
                    .counts()
                    .ok_or_else(|| Error::Precondition(format!("video row {} lacks counts", r.video)))?;
                Ok(VideoResult::new(&r.video, &r.category, r.frames.unwrap_or(0), counts))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::build(videos)
    }

    /// Fixed-width text table in the layout of the published result tables.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<24} {:<16}", "video", "category");
        for name in METRIC_NAMES {
            let _ = write!(out, " {name:>11}");
        }
        out.push('\n');
        for row in self.rows() {
            let label = match row.scope.as_str() {
                SCOPE_VIDEO => row.video.clone(),
                SCOPE_CATEGORY => "(average)".to_string(),
                s => format!("({s})"),
            };
            let _ = write!(out, "{label:<24} {:<16}", row.category);
            for v in row.metrics().values() {
                match v {
                    Some(v) => {
                        let _ = write!(out, " {v:>11.4}");
                    }
                    None => {
                        let _ = write!(out, " {:>11}", "");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_report_csv(reader: impl std::io::Read) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn parse_report_json(text: &str) -> Result<Vec<ReportRow>> {
    let r: JsonReport = serde_json::from_str(text)?;
    Ok(r.videos.into_iter().chain(r.categories).chain(r.overall).collect())
}

/// Load a report written by [`Report::write`], by extension.
pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rows = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_report_json(&text)?,
        _ => parse_report_csv(text.as_bytes())?,
    };
    Report::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report::build(vec![
            VideoResult::new("cats01", "animals", 20, ConfusionCounts::new(900, 100, 300, 8700)),
            VideoResult::new("empty", "animals", 20, ConfusionCounts::new(0, 0, 50, 9950)),
            VideoResult::new("cars", "things", 10, ConfusionCounts::new(500, 50, 50, 9400)),
        ])
        .unwrap()
    }

    #[test]
    fn single_video_has_data_and_average_rows() {
        let r = Report::build(vec![VideoResult::new("v", "c", 1, ConfusionCounts::new(1, 1, 1, 1))]).unwrap();
        let rows = r.rows();
        assert_eq!(rows.iter().filter(|r| r.scope == SCOPE_VIDEO).count(), 1);
        assert!(rows.iter().any(|r| r.scope == SCOPE_CATEGORY_MEAN));
        assert_eq!(rows[0].f_measure, Some(0.5));
    }

    #[test]
    fn blank_f_survives_csv_round_trip() {
        let r = sample();
        let text = r.to_csv_string().unwrap();
        assert!(text.lines().next().unwrap().starts_with("scope,category,video,frames,tp,fp,fn,tn,recall"));
        let empty_line = text.lines().find(|l| l.contains(",empty,")).unwrap();
        assert!(empty_line.ends_with(",0.5,,"), "{empty_line}");
        let rows = parse_report_csv(text.as_bytes()).unwrap();
        assert_eq!(rows, r.rows());
        let empty = rows.iter().find(|r| r.video == "empty").unwrap();
        assert_eq!((empty.f_measure, empty.precision), (None, None));
        assert_eq!(Report::from_rows(&rows).unwrap(), r);
    }

    #[test]
    fn json_uses_null_and_round_trips() {
        let r = sample();
        let text = r.to_json_string().unwrap();
        assert!(text.contains("\"f_measure\": null"));
        let rows = parse_report_json(&text).unwrap();
        assert_eq!(rows, r.rows());
        assert_eq!(Report::from_rows(&rows).unwrap(), r);
    }

    #[test]
    fn values_are_rounded_on_output() {
        let rows = sample().rows();
        let cats = rows.iter().find(|r| r.video == "cats01").unwrap();
        assert_eq!(cats.recall, Some(0.75));
        assert_eq!(cats.f_measure, Some(0.8182));
        let animals = rows.iter().find(|r| r.scope == SCOPE_CATEGORY && r.category == "animals").unwrap();
        // Absent F of the empty video does not drag the mean down.
        assert_eq!(animals.f_measure, Some(0.8182));
        assert_eq!(animals.recall, Some(0.375));
    }

    #[test]
    fn files_are_written_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("out/report");
        sample().write(&stem).unwrap();
        assert_eq!(read_report(&stem.with_extension("csv")).unwrap(), sample());
        assert_eq!(read_report(&stem.with_extension("json")).unwrap(), sample());
        assert!(sample().to_table().contains("(average-of-videos)"));
        assert!(Report::build(vec![
            VideoResult::new("v", "a", 1, ConfusionCounts::default()),
            VideoResult::new("v", "a", 1, ConfusionCounts::default()),
        ])
        .is_err());
    }
}
