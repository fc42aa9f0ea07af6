//! Numbered-frame directories and PNG output.

use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use super::frame::{Frame, FrameSequence, MaskFrame};
use crate::error::{Error, Result};

pub const DEFAULT_INPUT_TEMPLATE: &str = "in%06d.jpg";
pub const DEFAULT_GT_TEMPLATE: &str = "gt%06d.png";
pub const DEFAULT_MASK_TEMPLATE: &str = "bin%06d.png";

/// A printf-style filename template with a single `%0Nd` (or `%d`) slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameTemplate {
    prefix: String,
    suffix: String,
    width: usize,
}

impl FrameTemplate {
    pub fn parse(template: &str) -> Result<Self> {
        let start = template
            .find('%')
            .ok_or_else(|| Error::Config(format!("template {template:?} has no % slot")))?;
        let rest = &template[start + 1..];
        let d = rest
            .find('d')
            .ok_or_else(|| Error::Config(format!("template {template:?} has no %d slot")))?;
        let spec = &rest[..d];
        let width = if spec.is_empty() {
            0
        } else {
            spec.trim_start_matches('0')
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad width in template {template:?}")))?
        };
        let suffix = &rest[d + 1..];
        if suffix.contains('%') {
            return Err(Error::Config(format!(
                "template {template:?} has more than one slot"
            )));
        }
        Ok(Self {
            prefix: template[..start].to_string(),
            suffix: suffix.to_string(),
            width,
        })
    }

    pub fn format(&self, index: u32) -> String {
        format!(
            "{}{:0width$}{}",
            self.prefix,
            index,
            self.suffix,
            width = self.width
        )
    }

    /// Index encoded in `name`, if it matches this template.
    pub fn match_name(&self, name: &str) -> Option<u32> {
        let digits = name
            .strip_prefix(&self.prefix)?
            .strip_suffix(&self.suffix)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if self.width > 0 && digits.len() < self.width {
            return None;
        }
        digits.parse().ok()
    }
}

/// All indices in `dir` whose file names match `template`, ascending.
pub fn list_indices(dir: &Path, template: &FrameTemplate) -> Result<Vec<u32>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::UnreadableFile {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry?;
        if let Some(name) = entry.file_name().to_str() {
            if let Some(i) = template.match_name(name) {
                indices.push(i);
            }
        }
    }
    indices.sort_unstable();
    indices.dedup();
    Ok(indices)
}

/// Load numbered frames from `dir`. With `range` (inclusive), every index in
/// it must exist; without, all matching files are loaded and must be
/// contiguous.
pub fn load_sequence(
    dir: &Path,
    template: &str,
    range: Option<(u32, u32)>,
) -> Result<FrameSequence> {
    let template = FrameTemplate::parse(template)?;
    let available = list_indices(dir, &template)?;
    if available.is_empty() {
        return Err(Error::UnreadableFile {
            path: dir.to_path_buf(),
            reason: "no files match the frame template".to_string(),
        });
    }
    let wanted: Vec<u32> = match range {
        Some((first, last)) => {
            if first > last {
                return Err(Error::Precondition(format!(
                    "empty frame range ({first}, {last})"
                )));
            }
            (first..=last).collect()
        }
        None => (available[0]..=*available.last().unwrap()).collect(),
    };
    let mut frames = Vec::with_capacity(wanted.len());
    for &i in &wanted {
        if available.binary_search(&i).is_err() {
            return Err(Error::MissingFrame {
                dir: dir.to_path_buf(),
                index: i,
            });
        }
        frames.push(load_frame(&dir.join(template.format(i)))?);
    }
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    FrameSequence::with_indices(frames, wanted, id)
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Grayscale files load as 1 channel, everything else as RGB.
pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = open(path)?;
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Frame::new(w as usize, h as usize, 1, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Frame::new(w as usize, h as usize, 3, rgb.into_raw())
        }
    }
}

/// Load a binary mask; any value other than 0 or 255 is an error.
pub fn load_mask(path: &Path) -> Result<MaskFrame> {
    let g = open(path)?.to_luma8();
    let (w, h) = g.dimensions();
    MaskFrame::new(w as usize, h as usize, g.into_raw())
}

/// Raw single-channel 8-bit labels (ground truth may carry extra labels).
pub fn load_labels(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let g = open(path)?.to_luma8();
    let (w, h) = g.dimensions();
    Ok((w as usize, h as usize, g.into_raw()))
}

fn io_err(path: &Path, e: image::ImageError) -> Error {
    Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let res = if frame.channels() == 1 {
        GrayImage::from_raw(w, h, frame.data().to_vec())
            .expect("buffer length matches")
            .save(path)
    } else {
        RgbImage::from_raw(w, h, frame.data().to_vec())
            .expect("buffer length matches")
            .save(path)
    };
    res.map_err(|e| io_err(path, e))
}

pub fn save_mask(mask: &MaskFrame, path: &Path) -> Result<()> {
    GrayImage::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.data().to_vec(),
    )
    .expect("buffer length matches")
    .save(path)
    .map_err(|e| io_err(path, e))
}

/// 16-bit PNG of a probability plane, value = round(p * 65535).
pub fn save_probability_png(width: usize, height: usize, probs: &[f32], path: &Path) -> Result<()> {
    assert_eq!(probs.len(), width * height);
    let raw: Vec<u16> = probs
        .iter()
        .map(|&p| (f64::from(p.clamp(0.0, 1.0)) * 65535.0).round() as u16)
        .collect();
    ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(width as u32, height as u32, raw)
        .expect("buffer length matches")
        .save(path)
        .map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_roundtrip() {
        let t = FrameTemplate::parse("in%06d.jpg").unwrap();
        assert_eq!(t.format(42), "in000042.jpg");
        assert_eq!(t.match_name("in000042.jpg"), Some(42));
        assert_eq!(t.match_name("in42.jpg"), None);
        assert_eq!(t.match_name("gt000042.png"), None);
        let t = FrameTemplate::parse("f%d.png").unwrap();
        assert_eq!(t.match_name("f7.png"), Some(7));
        assert!(FrameTemplate::parse("plain.png").is_err());
    }

    fn write_gray(dir: &Path, name: &str, w: usize, h: usize, v: u8) {
        save_frame(&Frame::filled(w, h, 1, v), &dir.join(name)).unwrap();
    }

    #[test]
    fn loads_three_frames_in_order() {
        let dir = tempfile::tempdir().unwrap();
        for i in 1..=3u32 {
            write_gray(dir.path(), &format!("in{i:06}.png"), 4, 4, i as u8 * 10);
        }
        let seq = load_sequence(dir.path(), "in%06d.png", None).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.indices(), &[1, 2, 3]);
        assert_eq!(seq.frames()[2].get(0, 0, 0), 30);
        assert_eq!(seq.frames()[0].channels(), 1);
    }

    #[test]
    fn offset_range_selects_window() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..300u32 {
            write_gray(dir.path(), &format!("in{i:06}.png"), 2, 2, (i % 256) as u8);
        }
        let seq = load_sequence(dir.path(), "in%06d.png", Some((100, 199))).unwrap();
        assert_eq!(seq.len(), 100);
        assert_eq!(seq.indices()[0], 100);
        assert_eq!(seq.frames()[0].get(0, 0, 0), 100);
    }

    #[test]
    fn gap_and_empty_and_mismatch_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sequence(dir.path(), "in%06d.png", None),
            Err(Error::UnreadableFile { .. })
        ));
        write_gray(dir.path(), "in000001.png", 4, 4, 0);
        write_gray(dir.path(), "in000003.png", 4, 4, 0);
        assert!(matches!(
            load_sequence(dir.path(), "in%06d.png", None),
            Err(Error::MissingFrame { index: 2, .. })
        ));
        write_gray(dir.path(), "in000002.png", 5, 4, 0);
        assert!(matches!(
            load_sequence(dir.path(), "in%06d.png", None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mask_load_rejects_extended_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_frame(&Frame::new(2, 1, 1, vec![0, 170]).unwrap(), &p).unwrap();
        assert!(matches!(
            load_mask(&p),
            Err(Error::InvalidMaskValue { value: 170, .. })
        ));
        let m = MaskFrame::from_fn(3, 2, |x, _| x == 1);
        save_mask(&m, &p).unwrap();
        assert_eq!(load_mask(&p).unwrap(), m);
    }
}
