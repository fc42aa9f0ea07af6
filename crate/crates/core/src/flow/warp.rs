use super::FlowField;
use crate::error::{Error, Result};
use crate::imaging::{quantize, Frame, MaskFrame};

/// Backward warp: `out(x) = frame(x + flow(x))`, bilinear. The mask flags
/// (foreground = 255) every pixel whose sample point left the frame or whose
/// flow is invalid; those pixels are zero in the output.
pub fn warp_frame(frame: &Frame, flow: &FlowField) -> Result<(Frame, MaskFrame)> {
    if frame.width() != flow.width || frame.height() != flow.height {
        return Err(Error::dims(
            format!("{}x{}", flow.width, flow.height),
            format!("{}x{}", frame.width(), frame.height()),
        ));
    }
    let src = frame.to_float();
    let (w, h, ch) = (frame.width(), frame.height(), frame.channels());
    let mut out = vec![0u8; w * h * ch];
    let mut bad = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !flow.valid[i] {
                bad[i] = true;
                continue;
            }
            let sx = x as f32 + flow.u[i];
            let sy = y as f32 + flow.v[i];
            for c in 0..ch {
                match src.sample(sx, sy, c) {
                    Some(v) => out[i * ch + c] = quantize(v),
                    None => {
                        bad[i] = true;
                        break;
                    }
                }
            }
            if bad[i] {
                out[i * ch..(i + 1) * ch].fill(0);
            }
        }
    }
    Ok((
        Frame::new(w, h, ch, out)?,
        MaskFrame::from_bools(w, h, &bad),
    ))
}
