use serde::{Deserialize, Serialize};

use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::imaging::{box_blur, median_of, FloatFrame, Frame, MaskFrame};

/// Where the foreground-probability planes come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FpmSource {
    Constant { value: f32 },
    /// Previous output mask, box-blurred over a (2r+1)^2 window. Cold start
    /// falls back to 0.5.
    PreviousMaskBlurred { radius: usize },
}

impl Default for FpmSource {
    fn default() -> Self {
        FpmSource::Constant { value: 0.5 }
    }
}

impl FpmSource {
    pub fn plane(&self, width: usize, height: usize, previous: Option<&MaskFrame>) -> Result<Vec<f32>> {
        match (*self, previous) {
            (FpmSource::Constant { value }, _) => Ok(vec![value; width * height]),
            (FpmSource::PreviousMaskBlurred { .. }, None) => Ok(vec![0.5; width * height]),
            (FpmSource::PreviousMaskBlurred { radius }, Some(m)) => {
                if !m.same_size(width, height) {
                    return Err(Error::dims(
                        format!("{width}x{height}"),
                        format!("{}x{}", m.width(), m.height()),
                    ));
                }
                let fg: Vec<f32> = (0..width * height)
                    .map(|i| if m.is_fg_index(i) { 1.0 } else { 0.0 })
                    .collect();
                Ok(box_blur(&fg, width, height, radius))
            }
        }
    }
}

/// The twelve input planes, kept as named parts. Colors are normalized to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct SegmenterInput {
    pub empty_background: FloatFrame,
    pub empty_fpm: Vec<f32>,
    pub recent_background: FloatFrame,
    pub recent_fpm: Vec<f32>,
    pub current: FloatFrame,
    pub current_fpm: Vec<f32>,
}

impl SegmenterInput {
    pub fn width(&self) -> usize {
        self.current.width
    }

    pub fn height(&self) -> usize {
        self.current.height
    }

    /// Channel-major stack: empty bg RGB, its FPM, recent bg RGB, its FPM,
    /// current RGB, its FPM.
    pub fn to_tensor(&self) -> Result<Tensor3> {
        let (w, h) = (self.width(), self.height());
        let n = w * h;
        let mut data = Vec::with_capacity(12 * n);
        for (rgb, fpm) in [
            (&self.empty_background, &self.empty_fpm),
            (&self.recent_background, &self.recent_fpm),
            (&self.current, &self.current_fpm),
        ] {
            if (rgb.width, rgb.height, rgb.channels) != (w, h, 3) || fpm.len() != n {
                return Err(Error::dims(
                    format!("3x{w}x{h} color and {n}-sample FPM"),
                    format!("{}x{}x{} and {}", rgb.channels, rgb.width, rgb.height, fpm.len()),
                ));
            }
            for c in 0..3 {
                data.extend(rgb.data.iter().skip(c).step_by(3));
            }
            data.extend_from_slice(fpm);
        }
        Tensor3::new(12, h, w, data)
    }
}

fn check_color(frame: &Frame, w: usize, h: usize) -> Result<()> {
    if frame.channels() != 3 {
        return Err(Error::WrongChannelCount {
            expected: 3,
            found: frame.channels(),
        });
    }
    if (frame.width(), frame.height()) != (w, h) {
        return Err(Error::dims(format!("{w}x{h}"), frame.shape_string()));
    }
    Ok(())
}

/// Build the network input. `recent_frames` are the trailing frames before
/// `current`; their temporal median is the recent background, or the empty
/// background when there are none yet.
pub fn assemble_input(
    empty_background: &Frame,
    recent_frames: &[Frame],
    current: &Frame,
    fpm: &FpmSource,
    previous_mask: Option<&MaskFrame>,
) -> Result<SegmenterInput> {
    let (w, h) = (current.width(), current.height());
    check_color(current, w, h)?;
    check_color(empty_background, w, h)?;
    for f in recent_frames {
        check_color(f, w, h)?;
    }
    let recent = if recent_frames.is_empty() {
        empty_background.clone()
    } else {
        median_of(recent_frames)?
    };
    let plane = fpm.plane(w, h, previous_mask)?;
    Ok(SegmenterInput {
        empty_background: empty_background.to_float(),
        empty_fpm: plane.clone(),
        recent_background: recent.to_float(),
        recent_fpm: plane.clone(),
        current: current.to_float(),
        current_fpm: plane,
    })
}
