//! Brute-force reference implementations, written from the definitions
//! and sharing no code with the library.

use bmc_saliency::completion::Guidance;
use bmc_saliency::flow::FlowField;
use bmc_saliency::flow_completion::EdgeMap;
use bmc_saliency::imaging::{FloatFrame, MaskFrame};
use bmc_saliency::segmenter::{BatchNorm, Kernel, Tensor3};
use nalgebra::{DMatrix, DVector};

/// Max abs difference over the max abs reference value.
pub fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    got.iter()
        .zip(want)
        .map(|(g, w)| (f64::from(*g) - w).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Zero-padded 3x3 cross-correlation, kernel [out, in, 3, 3].
pub fn conv(x: &Tensor3, k: &Kernel, bias: &[f32]) -> Vec<f64> {
    let [oc, ic, _, _] = k.shape();
    let (h, w) = (x.height() as isize, x.width() as isize);
    let mut out = Vec::with_capacity(oc * (h * w) as usize);
    for o in 0..oc {
        for y in 0..h {
            for xx in 0..w {
                let mut s = f64::from(bias[o]);
                for i in 0..ic {
                    for ky in 0..3isize {
                        for kx in 0..3isize {
                            let (sy, sx) = (y + ky - 1, xx + kx - 1);
                            if sy >= 0 && sx >= 0 && sy < h && sx < w {
                                let kv = k.data()[((o * ic + i) * 3 + ky as usize) * 3 + kx as usize];
                                s += f64::from(kv) * f64::from(x.get(i, sy as usize, sx as usize));
                            }
                        }
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

/// Stride-2 transposed convolution by scattering each input pixel,
/// kernel [in, out, 3, 3], padding 1, output padding 1.
pub fn upconv(x: &Tensor3, k: &Kernel, bias: &[f32]) -> Vec<f64> {
    let [ic, oc, _, _] = k.shape();
    let (h, w) = (x.height(), x.width());
    let (oh, ow) = (2 * h as isize, 2 * w as isize);
    let plane = (oh * ow) as usize;
    let mut out: Vec<f64> = (0..oc * plane).map(|j| f64::from(bias[j / plane])).collect();
    for i in 0..ic {
        for y in 0..h {
            for xx in 0..w {
                for o in 0..oc {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let oy = 2 * y as isize + ky as isize - 1;
                            let ox = 2 * xx as isize + kx as isize - 1;
                            if oy >= 0 && ox >= 0 && oy < oh && ox < ow {
                                let kv = k.data()[((i * oc + o) * 3 + ky) * 3 + kx];
                                out[o * plane + (oy * ow + ox) as usize] += f64::from(kv) * f64::from(x.get(i, y, xx));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn maxpool(x: &Tensor3) -> Vec<f64> {
    let (c, h, w) = x.shape();
    let mut out = Vec::new();
    for ch in 0..c {
        for y in 0..h / 2 {
            for xx in 0..w / 2 {
                let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                    .iter()
                    .map(|(dy, dx)| x.get(ch, 2 * y + dy, 2 * xx + dx))
                    .fold(f32::NEG_INFINITY, f32::max);
                out.push(f64::from(m));
            }
        }
    }
    out
}

pub fn batchnorm(x: &Tensor3, bn: &BatchNorm) -> Vec<f64> {
    let (c, _, _) = x.shape();
    (0..c)
        .flat_map(|ch| {
            x.plane(ch).iter().map(move |&v| {
                (f64::from(v) - f64::from(bn.running_mean[ch])) / (f64::from(bn.running_var[ch]) + f64::from(bn.eps)).sqrt()
                    * f64::from(bn.scale[ch])
                    + f64::from(bn.shift[ch])
            })
        })
        .collect()
}

/// Dense LU solve of the discrete Poisson equation on `region`: for each
/// region pixel, the sum over in-frame neighbours of (f_p - f_q) equals the
/// sum of guided differences. Neighbours outside the region are fixed at
/// their known value; unknown (non-finite) ones drop out.
pub fn poisson(partial: &FloatFrame, region: &MaskFrame, g: &Guidance, c: usize) -> Vec<f64> {
    let (w, h) = (partial.width, partial.height);
    let cells: Vec<usize> = (0..w * h).filter(|&i| region.is_fg_index(i)).collect();
    let mut pos = vec![usize::MAX; w * h];
    for (k, &i) in cells.iter().enumerate() {
        pos[i] = k;
    }
    let m = cells.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (r, &i) in cells.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            let want = f64::from(match (dx, dy) {
                (1, 0) => g.gx.get(x, y, c),
                (-1, 0) => -g.gx.get(nx, ny, c),
                (0, 1) => g.gy.get(x, y, c),
                _ => -g.gy.get(nx, ny, c),
            });
            let j = ny * w + nx;
            if pos[j] != usize::MAX {
                a[(r, r)] += 1.0;
                a[(r, pos[j])] -= 1.0;
                b[r] -= want;
            } else if partial.get(nx, ny, c).is_finite() {
                a[(r, r)] += 1.0;
                b[r] += f64::from(partial.get(nx, ny, c)) - want;
            }
        }
    }
    a.lu().solve(&b).expect("nonsingular system").iter().copied().collect()
}

/// Dense solve of the edge-masked Laplace system: each masked pixel equals
/// the mean of its non-edge neighbours (all neighbours if every one is an
/// edge). Returns full-frame (u, v).
pub fn harmonic_flow(flow: &FlowField, mask: &MaskFrame, edges: &EdgeMap) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (flow.width, flow.height);
    let unknown: Vec<usize> = (0..w * h).filter(|&i| mask.is_fg_index(i)).collect();
    let mut pos = vec![usize::MAX; w * h];
    for (k, &i) in unknown.iter().enumerate() {
        pos[i] = k;
    }
    let m = unknown.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut bu = DVector::<f64>::zeros(m);
    let mut bv = DVector::<f64>::zeros(m);
    for (r, &i) in unknown.iter().enumerate() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let nb: Vec<usize> = [(-1, 0), (1, 0), (0, -1), (0, 1)]
            .iter()
            .map(|(dx, dy)| (x + dx, y + dy))
            .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize)
            .map(|(nx, ny)| ny as usize * w + nx as usize)
            .collect();
        let open: Vec<usize> = nb.iter().copied().filter(|&j| !edges.is_edge(j % w, j / w)).collect();
        let used = if open.is_empty() { nb } else { open };
        a[(r, r)] = used.len() as f64;
        for j in used {
            if pos[j] != usize::MAX {
                a[(r, pos[j])] -= 1.0;
            } else {
                bu[r] += f64::from(flow.u[j]);
                bv[r] += f64::from(flow.v[j]);
            }
        }
    }
    let lu = a.lu();
    let su = lu.solve(&bu).expect("nonsingular system");
    let sv = lu.solve(&bv).expect("nonsingular system");
    let mut ou: Vec<f64> = flow.u.iter().map(|&x| f64::from(x)).collect();
    let mut ov: Vec<f64> = flow.v.iter().map(|&x| f64::from(x)).collect();
    for (r, &i) in unknown.iter().enumerate() {
        ou[i] = su[r];
        ov[i] = sv[r];
    }
    (ou, ov)
}

/// Integer displacement minimizing the 7x7 sum of absolute differences,
/// searched exhaustively in [-range, range]^2.
pub fn block_match(a: &FloatFrame, b: &FloatFrame, x: usize, y: usize, range: isize) -> (isize, isize) {
    let mut best = (f32::INFINITY, 0, 0);
    for dy in -range..=range {
        for dx in -range..=range {
            let mut sad = 0.0;
            for oy in -3..=3isize {
                for ox in -3..=3isize {
                    let (ax, ay) = (x as isize + ox, y as isize + oy);
                    sad += (a.get(ax as usize, ay as usize, 0) - b.get((ax + dx) as usize, (ay + dy) as usize, 0)).abs();
                }
            }
            if sad < best.0 {
                best = (sad, dx, dy);
            }
        }
    }
    (best.1, best.2)
}
