use crate::error::{Error, Result};

/// 8-bit raster, row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Precondition(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::WrongChannelCount {
                expected: 3,
                found: channels,
            });
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{} samples", width * height * channels),
                format!("{} samples", data.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
        .expect("filled frame with valid dimensions")
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data).expect("from_fn with valid dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Normalized working copy, values in [0, 1].
    pub fn to_float(&self) -> FloatFrame {
        FloatFrame {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f32::from(v) / 255.0).collect(),
        }
    }
}

/// Normalized float working copy of a [`Frame`]. Values nominally in [0, 1]
/// but solvers may transiently leave that range.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatFrame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FloatFrame {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.idx(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.idx(x, y, c);
        self.data[i] = v;
    }

    /// Bilinear sample with replicate border. `None` if outside the frame.
    pub fn sample(&self, x: f32, y: f32, c: usize) -> Option<f32> {
        let (w, h) = (self.width as f32, self.height as f32);
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        Some(self.sample_clamped(x, y, c))
    }

    pub fn sample_clamped(&self, x: f32, y: f32, c: usize) -> f32 {
        let xm = (self.width - 1) as f32;
        let ym = (self.height - 1) as f32;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let a = self.get(x0, y0, c);
        let b = self.get(x1, y0, c);
        let d = self.get(x0, y1, c);
        let e = self.get(x1, y1, c);
        let top = a + (b - a) * fx;
        let bottom = d + (e - d) * fx;
        top + (bottom - top) * fy
    }

    /// BT.601 luminance plane.
    pub fn luminance(&self) -> FloatFrame {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| LUMA_R * p[0] + LUMA_G * p[1] + LUMA_B * p[2])
            .collect();
        FloatFrame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Back to 8-bit with round-half-up and clamping.
    pub fn to_frame(&self) -> Frame {
        let data = self.data.iter().map(|&v| quantize(v)).collect();
        Frame::new(self.width, self.height, self.channels, data)
            .expect("float frame has consistent dimensions")
    }
}

pub const LUMA_R: f32 = 0.299;
pub const LUMA_G: f32 = 0.587;
pub const LUMA_B: f32 = 0.114;

/// Normalized value to 8-bit, round-half-up, clamped.
#[inline]
pub fn quantize(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary mask: 0 background, 255 foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

pub const FOREGROUND: u8 = 255;
pub const BACKGROUND: u8 = 0;

impl MaskFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Precondition(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::dims(
                format!("{} samples", width * height),
                format!("{} samples", data.len()),
            ));
        }
        if let Some(i) = data
            .iter()
            .position(|&v| v != FOREGROUND && v != BACKGROUND)
        {
            return Err(Error::InvalidMaskValue {
                x: i % width,
                y: i / width,
                value: data[i],
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![BACKGROUND; width * height],
        }
    }

    pub fn from_bools(width: usize, height: usize, fg: &[bool]) -> Self {
        assert_eq!(fg.len(), width * height);
        Self {
            width,
            height,
            data: fg
                .iter()
                .map(|&b| if b { FOREGROUND } else { BACKGROUND })
                .collect(),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(if f(x, y) { FOREGROUND } else { BACKGROUND });
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_fg(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == FOREGROUND
    }

    #[inline]
    pub fn is_fg_index(&self, i: usize) -> bool {
        self.data[i] == FOREGROUND
    }

    pub fn set(&mut self, x: usize, y: usize, fg: bool) {
        self.data[y * self.width + x] = if fg { FOREGROUND } else { BACKGROUND };
    }

    pub fn count_fg(&self) -> usize {
        self.data.iter().filter(|&&v| v == FOREGROUND).count()
    }

    pub fn fg_ratio(&self) -> f64 {
        self.count_fg() as f64 / self.data.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == BACKGROUND)
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn union(&self, other: &MaskFrame) -> MaskFrame {
        assert!(other.same_size(self.width, self.height));
        MaskFrame {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a.max(b))
                .collect(),
        }
    }
}

/// Ordered frames sharing one shape.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    /// File index of each frame, parallel to `frames`.
    indices: Vec<u32>,
    pub frame_rate: Option<f64>,
    pub source_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, source_id: impl Into<String>) -> Result<Self> {
        let indices = (0..frames.len() as u32).collect();
        Self::with_indices(frames, indices, source_id)
    }

    pub fn with_indices(
        frames: Vec<Frame>,
        indices: Vec<u32>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if frames.len() != indices.len() {
            return Err(Error::Precondition(
                "one index per frame required".to_string(),
            ));
        }
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                if !f.same_shape(first) {
                    return Err(Error::dims(first.shape_string(), f.shape_string()));
                }
            }
        }
        Ok(Self {
            frames,
            indices,
            frame_rate: None,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sub-sequence `[start, end)` by position.
    pub fn slice(&self, start: usize, end: usize) -> FrameSequence {
        FrameSequence {
            frames: self.frames[start..end].to_vec(),
            indices: self.indices[start..end].to_vec(),
            frame_rate: self.frame_rate,
            source_id: self.source_id.clone(),
        }
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}
