use super::frame::{quantize, Frame, FrameSequence, MaskFrame, LUMA_B, LUMA_G, LUMA_R};
use crate::error::{Error, Result};

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear(frame: &Frame, width: usize, height: usize) -> Result<Frame> {
    if width == 0 || height == 0 {
        return Err(Error::Precondition(format!(
            "resize target must be positive, got {width}x{height}"
        )));
    }
    if width == frame.width() && height == frame.height() {
        return Ok(frame.clone());
    }
    let ch = frame.channels();
    let sx = frame.width() as f32 / width as f32;
    let sy = frame.height() as f32 / height as f32;
    let xmax = frame.width() - 1;
    let ymax = frame.height() - 1;

    let taps = |dst: usize, scale: f32, max: usize| -> (usize, usize, f32) {
        let s = ((dst as f32 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (s.floor() as usize).min(max);
        let i1 = (i0 + 1).min(max);
        (i0, i1, s - i0 as f32)
    };
    let xs: Vec<_> = (0..width).map(|x| taps(x, sx, xmax)).collect();

    let mut out = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, sy, ymax);
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let a = f32::from(frame.get(x0, y0, c));
                let b = f32::from(frame.get(x1, y0, c));
                let d = f32::from(frame.get(x0, y1, c));
                let e = f32::from(frame.get(x1, y1, c));
                let top = a + (b - a) * fx;
                let bot = d + (e - d) * fx;
                out.push(quantize((top + (bot - top) * fy) / 255.0));
            }
        }
    }
    Frame::new(width, height, ch, out)
}

/// Nearest-neighbour mask resampling with pixel-center alignment.
pub fn resize_mask_nearest(mask: &MaskFrame, width: usize, height: usize) -> MaskFrame {
    if mask.same_size(width, height) {
        return mask.clone();
    }
    let pick = |dst: usize, from: usize, to: usize| ((2 * dst + 1) * from / (2 * to)).min(from - 1);
    let xs: Vec<usize> = (0..width).map(|x| pick(x, mask.width(), width)).collect();
    MaskFrame::from_fn(width, height, |x, y| mask.is_fg(xs[x], pick(y, mask.height(), height)))
}

/// Per-pixel, per-channel median over the last `window` frames. Even windows
/// take the lower of the two central values.
pub fn temporal_median(seq: &FrameSequence, window: usize) -> Result<Frame> {
    if window == 0 {
        return Err(Error::Precondition("median window must be >= 1".into()));
    }
    if window > seq.len() {
        return Err(Error::WindowTooLarge {
            window,
            len: seq.len(),
        });
    }
    let frames = &seq.frames()[seq.len() - window..];
    median_of(frames)
}

/// Lower median across a non-empty slice of same-shape frames.
pub fn median_of(frames: &[Frame]) -> Result<Frame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Precondition("median of zero frames".into()))?;
    let n = first.data().len();
    let k = (frames.len() - 1) / 2;
    let mut out = vec![0u8; n];
    let mut hist = [0u32; 256];
    for (i, o) in out.iter_mut().enumerate() {
        hist.fill(0);
        for f in frames {
            hist[f.data()[i] as usize] += 1;
        }
        let mut acc = 0u32;
        for (v, &count) in hist.iter().enumerate() {
            acc += count;
            if acc as usize > k {
                *o = v as u8;
                break;
            }
        }
    }
    Frame::new(first.width(), first.height(), first.channels(), out)
}

/// BT.601 luminance, rounded half-up.
pub fn to_gray(frame: &Frame) -> Result<Frame> {
    if frame.channels() != 3 {
        return Err(Error::WrongChannelCount {
            expected: 3,
            found: frame.channels(),
        });
    }
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|p| {
            let l = LUMA_R * f32::from(p[0]) + LUMA_G * f32::from(p[1]) + LUMA_B * f32::from(p[2]);
            (l + 0.5).floor().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame::new(frame.width(), frame.height(), 1, data)
}

/// Offsets of the Euclidean disk of the given radius, as (dy, dx_half_span).
fn disk_spans(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    (-r..=r)
        .map(|dy| {
            let mut span = 0;
            while (span + 1) * (span + 1) + dy * dy <= r * r {
                span += 1;
            }
            (dy, span)
        })
        .collect()
}

/// Grow the foreground by a Euclidean disk of `radius` pixels.
pub fn dilate_mask(mask: &MaskFrame, radius: usize) -> MaskFrame {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let spans = disk_spans(radius);
    let mut out = vec![false; mask.data().len()];
    for y in 0..h {
        for x in 0..w {
            if !mask.is_fg(x as usize, y as usize) {
                continue;
            }
            for &(dy, span) in &spans {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                let x0 = (x - span).max(0);
                let x1 = (x + span).min(w - 1);
                let row = (yy * w) as usize;
                for xx in x0..=x1 {
                    out[row + xx as usize] = true;
                }
            }
        }
    }
    MaskFrame::from_bools(mask.width(), mask.height(), &out)
}

/// 8-connected component labels of the foreground. Background is 0, labels
/// start at 1 in raster order of first pixel. Returns (labels, sizes) where
/// `sizes[l - 1]` is the pixel count of label `l`.
pub fn connected_components(mask: &MaskFrame) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.is_fg_index(start) || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.is_fg_index(j) && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Drop 8-connected foreground components smaller than `min_size` pixels.
pub fn remove_small_components(mask: &MaskFrame, min_size: usize) -> MaskFrame {
    if min_size <= 1 {
        return mask.clone();
    }
    let (labels, sizes) = connected_components(mask);
    let keep: Vec<bool> = labels
        .iter()
        .map(|&l| l != 0 && sizes[l as usize - 1] >= min_size)
        .collect();
    MaskFrame::from_bools(mask.width(), mask.height(), &keep)
}

/// Mean filter over a (2r+1)^2 window with replicate border, on a plane.
pub fn box_blur(plane: &[f32], width: usize, height: usize, radius: usize) -> Vec<f32> {
    assert_eq!(plane.len(), width * height);
    if radius == 0 {
        return plane.to_vec();
    }
    let r = radius as isize;
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let norm = 1.0 / (2 * radius + 1) as f32;

    let mut tmp = vec![0.0f32; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        let out = &mut tmp[y * width..(y + 1) * width];
        let mut s: f32 = (-r..=r).map(|d| row[clampi(d, width)]).sum();
        for (x, o) in out.iter_mut().enumerate() {
            *o = s * norm;
            let xi = x as isize;
            s += row[clampi(xi + r + 1, width)] - row[clampi(xi - r, width)];
        }
    }

    let mut out = vec![0.0f32; plane.len()];
    let mut acc = vec![0.0f32; width];
    for d in -r..=r {
        let src = clampi(d, height) * width;
        for (a, &t) in acc.iter_mut().zip(&tmp[src..src + width]) {
            *a += t;
        }
    }
    for y in 0..height {
        for (o, &a) in out[y * width..(y + 1) * width].iter_mut().zip(&acc) {
            *o = a * norm;
        }
        let add = clampi(y as isize + r + 1, height) * width;
        let sub = clampi(y as isize - r, height) * width;
        for x in 0..width {
            acc[x] += tmp[add + x] - tmp[sub + x];
        }
    }
    out
}
