//! Onion-peel diffusion for pixels no candidate reached.

use crate::imaging::{FloatFrame, Frame, MaskFrame};
use crate::{Error, Result};

/// Fill `missing` pixels in place, layer by layer: each round, every missing
/// pixel with at least one known 8-neighbour takes the mean of those
/// neighbours. Returns the number of rounds used.
pub(crate) fn inpaint_in_place(img: &mut FloatFrame, missing: &mut [bool], max_rounds: usize) -> Result<usize> {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let mut remaining: Vec<usize> = (0..w * h).filter(|&i| missing[i]).collect();
    if remaining.is_empty() {
        return Ok(0);
    }
    if remaining.len() == w * h {
        return Err(Error::AllPixelsMissing);
    }
    let mut rounds = 0;
    while !remaining.is_empty() {
        if rounds == max_rounds {
            return Err(Error::Precondition(format!(
                "inpainting left {} pixels after {max_rounds} rounds",
                remaining.len()
            )));
        }
        rounds += 1;
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &remaining {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let mut sum = vec![0.0f32; ch];
            let mut k = 0.0f32;
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !missing[j] {
                        k += 1.0;
                        for (c, s) in sum.iter_mut().enumerate() {
                            *s += img.data[j * ch + c];
                        }
                    }
                }
            }
            if k > 0.0 {
                layer.push((i, sum.into_iter().map(|s| s / k).collect::<Vec<f32>>()));
            } else {
                rest.push(i);
            }
        }
        for (i, color) in layer {
            img.data[i * ch..(i + 1) * ch].copy_from_slice(&color);
            missing[i] = false;
        }
        remaining = rest;
    }
    Ok(rounds)
}

/// Onion-peel fill of the `residual` pixels of `frame`.
pub fn diffusion_inpaint(frame: &Frame, residual: &MaskFrame, max_rounds: usize) -> Result<Frame> {
    if !residual.same_size(frame.width(), frame.height()) {
        return Err(Error::dims(
            frame.shape_string(),
            format!("{}x{}", residual.width(), residual.height()),
        ));
    }
    let mut img = frame.to_float();
    let mut missing: Vec<bool> = (0..frame.pixel_count()).map(|i| residual.is_fg_index(i)).collect();
    inpaint_in_place(&mut img, &mut missing, max_rounds)?;
    let mut out = img.to_frame();
    // Known pixels go back byte-for-byte.
    let ch = frame.channels();
    for i in (0..frame.pixel_count()).filter(|&i| !residual.is_fg_index(i)) {
        out.data_mut()[i * ch..(i + 1) * ch].copy_from_slice(&frame.data()[i * ch..(i + 1) * ch]);
    }
    Ok(out)
}
