use crate::imaging::{connected_components, Frame, MaskFrame};

/// Largest per-channel central-difference gradient (|dx| + |dy|), clamped
/// at the border.
fn edge_strength(f: &Frame, x: usize, y: usize) -> u32 {
    let (w, h) = (f.width(), f.height());
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
    (0..f.channels())
        .map(|c| {
            u32::from(f.get(xr, y, c).abs_diff(f.get(xl, y, c)))
                + u32::from(f.get(x, yd, c).abs_diff(f.get(x, yu, c)))
        })
        .max()
        .unwrap_or(0)
}

/// Remove blobs that are revealed background rather than objects.
///
/// A real object brings its outline with it, so the frame is sharper than
/// the reference along the blob contour. Where an object was absorbed into
/// the reference and has since left, the outline lives in the reference.
pub fn suppress_ghosts(mask: &MaskFrame, frame: &Frame, reference: &Frame) -> MaskFrame {
    let (w, h) = (mask.width(), mask.height());
    let (labels, sizes) = connected_components(mask);
    if sizes.is_empty() {
        return mask.clone();
    }
    let mut frame_edge = vec![0u64; sizes.len()];
    let mut ref_edge = vec![0u64; sizes.len()];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let on_contour = (x > 0 && labels[y * w + x - 1] == 0)
                || (x + 1 < w && labels[y * w + x + 1] == 0)
                || (y > 0 && labels[(y - 1) * w + x] == 0)
                || (y + 1 < h && labels[(y + 1) * w + x] == 0);
            if on_contour {
                let k = l as usize - 1;
                frame_edge[k] += u64::from(edge_strength(frame, x, y));
                ref_edge[k] += u64::from(edge_strength(reference, x, y));
            }
        }
    }
    let keep: Vec<bool> = labels
        .iter()
        .map(|&l| l != 0 && frame_edge[l as usize - 1] >= ref_edge[l as usize - 1])
        .collect();
    MaskFrame::from_bools(w, h, &keep)
}
