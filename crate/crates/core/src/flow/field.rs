use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense per-pixel displacement with a validity mask.
///
/// Convention: for a field estimated from `a` to `b`, `a(x) ≈ b(x + flow(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            valid: vec![true; n],
        }
    }

    pub fn uniform(width: usize, height: usize, u: f32, v: f32) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            u: vec![u; n],
            v: vec![v; n],
            valid: vec![true; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Bilinear sample of (u, v) at a sub-pixel location, clamped to the
    /// frame. Validity is not consulted.
    pub fn sample(&self, x: f32, y: f32) -> (f32, f32) {
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
        let lerp = |c: &[f32]| {
            let a = c[y0 * self.width + x0];
            let b = c[y0 * self.width + x1];
            let d = c[y1 * self.width + x0];
            let e = c[y1 * self.width + x1];
            let top = a + (b - a) * fx;
            let bot = d + (e - d) * fx;
            top + (bot - top) * fy
        };
        (lerp(&self.u), lerp(&self.v))
    }

    /// Mark the pixels flagged in `mask` as invalid.
    pub fn invalidate(&mut self, mask: &crate::imaging::MaskFrame) {
        for (i, valid) in self.valid.iter_mut().enumerate() {
            if mask.is_fg_index(i) {
                *valid = false;
            }
        }
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// Endpoint error against another field, per pixel.
    pub fn endpoint_errors(&self, other: &FlowField) -> Vec<f32> {
        self.u
            .iter()
            .zip(&self.v)
            .zip(other.u.iter().zip(&other.v))
            .map(|((a, b), (c, d))| ((a - c).powi(2) + (b - d).powi(2)).sqrt())
            .collect()
    }

    pub fn write_flo(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_flo_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Middlebury `.flo`: magic 202021.25, width, height, then interleaved
    /// little-endian f32 (u, v). Invalid pixels are written as the format's
    /// unknown-flow value.
    pub fn write_flo_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&FLO_MAGIC.to_le_bytes())?;
        w.write_all(&(self.width as i32).to_le_bytes())?;
        w.write_all(&(self.height as i32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.len() * 8);
        for i in 0..self.len() {
            let (u, v) = if self.valid[i] {
                (self.u[i], self.v[i])
            } else {
                (FLO_UNKNOWN, FLO_UNKNOWN)
            };
            buf.extend_from_slice(&u.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_flo(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_flo_from(&mut f).map_err(|e| match e {
            Error::Precondition(reason) => Error::UnreadableFile {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn read_flo_from(r: &mut impl Read) -> Result<Self> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if f32::from_le_bytes(word) != FLO_MAGIC {
            return Err(Error::Precondition("bad .flo magic".into()));
        }
        r.read_exact(&mut word)?;
        let width = i32::from_le_bytes(word);
        r.read_exact(&mut word)?;
        let height = i32::from_le_bytes(word);
        if width <= 0 || height <= 0 {
            return Err(Error::Precondition("bad .flo dimensions".into()));
        }
        let (width, height) = (width as usize, height as usize);
        let mut raw = vec![0u8; width * height * 8];
        r.read_exact(&mut raw)?;
        let mut field = FlowField::zeros(width, height);
        for (i, px) in raw.chunks_exact(8).enumerate() {
            let u = f32::from_le_bytes(px[0..4].try_into().unwrap());
            let v = f32::from_le_bytes(px[4..8].try_into().unwrap());
            let valid = u.is_finite() && v.is_finite() && u.abs() < 1e9 && v.abs() < 1e9;
            field.u[i] = if valid { u } else { 0.0 };
            field.v[i] = if valid { v } else { 0.0 };
            field.valid[i] = valid;
        }
        Ok(field)
    }
}

pub const FLO_MAGIC: f32 = 202021.25;
const FLO_UNKNOWN: f32 = 1e10;
