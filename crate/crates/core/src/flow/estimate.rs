//! Coarse-to-fine dense flow: windowed gradient-constancy data term with a
//! quadratic neighbour-smoothness term, re-linearized by warping at every
//! outer iteration and solved with red-black Gauss-Seidel sweeps.

use serde::{Deserialize, Serialize};

use super::FlowField;
use crate::error::{Error, Result};
use crate::imaging::{box_blur, FloatFrame, MaskFrame};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub levels: usize,
    /// Warp iterations per pyramid level.
    pub iterations: usize,
    /// Smoothness weight. Larger values trade boundary sharpness for
    /// robustness in weakly textured areas.
    pub regularization: f32,
    /// Radius of the box window aggregating the data term.
    pub window_radius: usize,
    /// Gauss-Seidel sweeps per warp iteration.
    pub sweeps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 4,
            iterations: 4,
            regularization: 15.0,
            window_radius: 2,
            sweeps: 2,
        }
    }
}

impl FlowParams {
    /// Coefficient of the neighbour-smoothness term against the
    /// contrast-normalized data term.
    fn lambda(&self) -> f32 {
        self.regularization * SMOOTHNESS_SCALE
    }

    pub fn min_dimension(&self) -> usize {
        (1usize << self.levels.saturating_sub(1)) * 8
    }
}

/// The data term is divided by local gradient energy, so it is dimensionless
/// and at most 1 per pixel; a weight of 15 maps to a coefficient of 0.3.
const SMOOTHNESS_SCALE: f32 = 1.0 / 50.0;

/// Squared gradient below which the data term fades out (about one gray
/// level per pixel).
const CONTRAST_FLOOR: f32 = 1.0 / (255.0 * 255.0);

/// Dense flow from `a` to `b` (`a(x) ≈ b(x + flow(x))`). Both inputs must be
/// single-channel normalized frames of the same size.
pub fn estimate_flow(a: &FloatFrame, b: &FloatFrame, params: &FlowParams) -> Result<FlowField> {
    estimate_flow_masked(a, b, None, None, params)
}

/// [`estimate_flow`] ignoring foreground. A pixel of `a` contributes to the
/// data term only if it is outside `ignore_a` and its current match in `b`
/// is outside `ignore_b`; elsewhere the field comes from smoothness alone.
pub fn estimate_flow_masked(
    a: &FloatFrame,
    b: &FloatFrame,
    ignore_a: Option<&MaskFrame>,
    ignore_b: Option<&MaskFrame>,
    params: &FlowParams,
) -> Result<FlowField> {
    if a.channels != 1 || b.channels != 1 {
        return Err(Error::WrongChannelCount {
            expected: 1,
            found: a.channels.max(b.channels),
        });
    }
    if a.width != b.width || a.height != b.height {
        return Err(Error::dims(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", b.width, b.height),
        ));
    }
    if params.levels == 0 || a.width.min(a.height) < params.min_dimension() {
        return Err(Error::TooSmallForPyramid {
            width: a.width,
            height: a.height,
            levels: params.levels,
        });
    }

    for m in [ignore_a, ignore_b].into_iter().flatten() {
        if !m.same_size(a.width, a.height) {
            return Err(Error::dims(
                format!("{}x{}", a.width, a.height),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
    }
    let pyr_a = pyramid(a, params.levels);
    let pyr_b = pyramid(b, params.levels);
    let weight_levels = |m: Option<&MaskFrame>| {
        m.map(|m| {
            let plane = FloatFrame {
                width: a.width,
                height: a.height,
                channels: 1,
                data: m.data().iter().map(|&v| if v == 0 { 1.0 } else { 0.0 }).collect(),
            };
            weight_pyramid(&plane, params.levels)
        })
    };
    let (pyr_wa, pyr_wb) = (weight_levels(ignore_a), weight_levels(ignore_b));
    let lambda = params.lambda();

    let coarsest = &pyr_a[params.levels - 1];
    let mut u = vec![0.0f32; coarsest.width * coarsest.height];
    let mut v = vec![0.0f32; u.len()];
    let (mut cw, mut ch) = (coarsest.width, coarsest.height);

    for level in (0..params.levels).rev() {
        let la = &pyr_a[level];
        let lb = &pyr_b[level];
        if la.width != cw || la.height != ch {
            u = upsample_flow(&u, cw, ch, la.width, la.height, la.width as f32 / cw as f32);
            v = upsample_flow(
                &v,
                cw,
                ch,
                la.width,
                la.height,
                la.height as f32 / ch as f32,
            );
            cw = la.width;
            ch = la.height;
        }
        let (u0, v0) = (u.clone(), v.clone());
        let grad_a = gradients(&la.data, la.width, la.height);
        let lw = LevelWeights {
            a: pyr_wa.as_ref().map(|p| &p[level]),
            b: pyr_wb.as_ref().map(|p| &p[level]),
        };
        if let Some(wt) = lw.at(&u, &v) {
            fill_unweighted(&mut u, &mut v, la.width, la.height, &wt);
        }
        for _ in 0..params.iterations {
            let wt = lw.at(&u, &v);
            refine(la, &grad_a, lb, wt.as_deref(), &mut u, &mut v, lambda, sweeps_at(params.sweeps, level), params.window_radius);
        }
        let wt = match (lw.at(&u0, &v0), lw.at(&u, &v)) {
            (Some(p), Some(q)) => Some(p.iter().zip(&q).map(|(p, q)| p * q).collect::<Vec<f32>>()),
            _ => None,
        };
        keep_improvements(la, lb, wt.as_deref(), &u0, &v0, &mut u, &mut v, params.window_radius);
        if let Some(wt) = lw.at(&u, &v) {
            fill_unweighted(&mut u, &mut v, la.width, la.height, &wt);
        }
    }

    Ok(FlowField {
        width: a.width,
        height: a.height,
        u,
        v,
        valid: vec![true; a.width * a.height],
    })
}

/// Sweeps per warp iteration at a pyramid level. Level `k` has `4^-k` as
/// many pixels, so giving it `4^k` times the sweeps costs the same as the
/// finest level and lets smoothness carry values across regions without
/// data, such as ignored foreground.
fn sweeps_at(base: usize, level: usize) -> usize {
    base << (2 * level.min(4))
}

/// Below this weight a pixel's flow is treated as unsupported by data.
const SUPPORTED: f32 = 0.5;

/// Onion-peel fill of unsupported pixels from supported ones: each layer
/// takes the mean of its already-known 4-neighbours. Gives smoothness a
/// sensible starting point inside wide data-free regions, which plain
/// sweeps would take hundreds of iterations to reach.
fn fill_unweighted(u: &mut [f32], v: &mut [f32], w: usize, h: usize, wt: &[f32]) {
    let mut known: Vec<bool> = wt.iter().map(|&x| x >= SUPPORTED).collect();
    if !known.iter().any(|&k| k) {
        return;
    }
    let mut frontier: Vec<usize> = (0..w * h).filter(|&i| !known[i]).collect();
    while !frontier.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &frontier {
            let (x, y) = (i % w, i / w);
            let (mut su, mut sv, mut k) = (0.0, 0.0, 0.0);
            let nbrs = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for j in nbrs.into_iter().flatten().filter(|&j| known[j]) {
                su += u[j];
                sv += v[j];
                k += 1.0;
            }
            if k > 0.0 {
                layer.push((i, su / k, sv / k));
            } else {
                rest.push(i);
            }
        }
        for (i, a, b) in layer {
            u[i] = a;
            v[i] = b;
            known[i] = true;
        }
        frontier = rest;
    }
}

/// Data-term weights of one pyramid level.
struct LevelWeights<'a> {
    a: Option<&'a FloatFrame>,
    b: Option<&'a FloatFrame>,
}

impl LevelWeights<'_> {
    /// Per-pixel weight of `a` under the current field: its own weight times
    /// the weight of its match in `b`.
    fn at(&self, u: &[f32], v: &[f32]) -> Option<Vec<f32>> {
        let warped_b = self.b.map(|b| warp_plane(b, u, v));
        match (self.a, warped_b) {
            (None, None) => None,
            (Some(a), None) => Some(a.data.clone()),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.data.iter().zip(&b).map(|(p, q)| p * q).collect()),
        }
    }
}

/// One warp iteration at a single level.
fn refine(
    a: &FloatFrame,
    (ax, ay): &(Vec<f32>, Vec<f32>),
    b: &FloatFrame,
    weights: Option<&[f32]>,
    u: &mut [f32],
    v: &mut [f32],
    lambda: f32,
    sweeps: usize,
    radius: usize,
) {
    let (w, h) = (a.width, a.height);
    let n = w * h;
    let warped = warp_plane(b, u, v);
    let (bx, by) = gradients(&warped, w, h);

    let mut jxx = vec![0.0f32; n];
    let mut jxy = vec![0.0f32; n];
    let mut jyy = vec![0.0f32; n];
    let mut jxt = vec![0.0f32; n];
    let mut jyt = vec![0.0f32; n];
    for i in 0..n {
        let ix = 0.5 * (ax[i] + bx[i]);
        let iy = 0.5 * (ay[i] + by[i]);
        let it = warped[i] - a.data[i];
        let wt = weights.map_or(1.0, |wt| wt[i]);
        let (ix, iy) = (ix * wt.sqrt(), iy * wt.sqrt());
        let it = it * wt.sqrt();
        jxx[i] = ix * ix;
        jxy[i] = ix * iy;
        jyy[i] = iy * iy;
        jxt[i] = ix * it;
        jyt[i] = iy * it;
    }
    let r = radius;
    let mut jxx = box_blur(&jxx, w, h, r);
    let mut jxy = box_blur(&jxy, w, h, r);
    let mut jyy = box_blur(&jyy, w, h, r);
    let mut jxt = box_blur(&jxt, w, h, r);
    let mut jyt = box_blur(&jyt, w, h, r);
    for i in 0..n {
        let s = 1.0 / (jxx[i] + jyy[i] + CONTRAST_FLOOR);
        jxx[i] *= s;
        jxy[i] *= s;
        jyy[i] *= s;
        jxt[i] *= s;
        jyt[i] *= s;
    }

    let mut du = vec![0.0f32; n];
    let mut dv = vec![0.0f32; n];
    let solve = |i: usize, su: f32, sv: f32, count: f32, du: &mut [f32], dv: &mut [f32]| {
        let ru = -jxt[i] + lambda * (su - count * u[i]);
        let rv = -jyt[i] + lambda * (sv - count * v[i]);
        let a11 = jxx[i] + count * lambda;
        let a22 = jyy[i] + count * lambda;
        let a12 = jxy[i];
        let det = a11 * a22 - a12 * a12;
        if det > f32::MIN_POSITIVE {
            du[i] = (a22 * ru - a12 * rv) / det;
            dv[i] = (a11 * rv - a12 * ru) / det;
        }
    };
    for _ in 0..sweeps {
        for parity in 0..2 {
            for y in 0..h {
                let start = (y + parity) % 2;
                let interior_row = y > 0 && y + 1 < h;
                for x in (start..w).step_by(2) {
                    let i = y * w + x;
                    if interior_row && x > 0 && x + 1 < w {
                        let su = u[i - 1]
                            + du[i - 1]
                            + u[i + 1]
                            + du[i + 1]
                            + u[i - w]
                            + du[i - w]
                            + u[i + w]
                            + du[i + w];
                        let sv = v[i - 1]
                            + dv[i - 1]
                            + v[i + 1]
                            + dv[i + 1]
                            + v[i - w]
                            + dv[i - w]
                            + v[i + w]
                            + dv[i + w];
                        solve(i, su, sv, 4.0, &mut du, &mut dv);
                        continue;
                    }
                    let (mut su, mut sv, mut count) = (0.0, 0.0, 0.0);
                    let mut neighbours = [None; 4];
                    if x > 0 {
                        neighbours[0] = Some(i - 1);
                    }
                    if x + 1 < w {
                        neighbours[1] = Some(i + 1);
                    }
                    if y > 0 {
                        neighbours[2] = Some(i - w);
                    }
                    if y + 1 < h {
                        neighbours[3] = Some(i + w);
                    }
                    for j in neighbours.into_iter().flatten() {
                        su += u[j] + du[j];
                        sv += v[j] + dv[j];
                        count += 1.0;
                    }
                    solve(i, su, sv, count, &mut du, &mut dv);
                }
            }
        }
    }
    for i in 0..n {
        let m = (du[i] * du[i] + dv[i] * dv[i]).sqrt();
        let k = if m > MAX_STEP { MAX_STEP / m } else { 1.0 };
        u[i] += du[i] * k;
        v[i] += dv[i] * k;
    }
}

/// Largest per-warp update, in pixels of the current level. The linearized
/// data term is not trustworthy beyond about a pixel.
const MAX_STEP: f32 = 1.0;

/// Windowed squared warp residual of `b` against `a` under (u, v).
fn warp_residual(
    a: &FloatFrame,
    b: &FloatFrame,
    weights: Option<&[f32]>,
    u: &[f32],
    v: &[f32],
    radius: usize,
) -> Vec<f32> {
    let r: Vec<f32> = warp_plane(b, u, v)
        .iter()
        .zip(&a.data)
        .enumerate()
        .map(|(i, (&s, &t))| weights.map_or(1.0, |wt| wt[i]) * (s - t) * (s - t))
        .collect();
    box_blur(&r, a.width, a.height, radius)
}

/// `b(x + flow(x))` with bilinear sampling and replicate border.
fn warp_plane(b: &FloatFrame, u: &[f32], v: &[f32]) -> Vec<f32> {
    let (w, h) = (b.width, b.height);
    let (xm, ym) = ((w - 1) as f32, (h - 1) as f32);
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = (x as f32 + u[i]).clamp(0.0, xm);
            let sy = (y as f32 + v[i]).clamp(0.0, ym);
            let x0 = sx as usize;
            let y0 = sy as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = sx - x0 as f32;
            let fy = sy - y0 as f32;
            let top = b.data[y0 * w + x0] + (b.data[y0 * w + x1] - b.data[y0 * w + x0]) * fx;
            let bot = b.data[y1 * w + x0] + (b.data[y1 * w + x1] - b.data[y1 * w + x0]) * fx;
            out[i] = top + (bot - top) * fy;
        }
    }
    out
}

/// Revert pixels whose refinement at this level increased the residual.
/// Coarse levels of high-frequency texture alias, and the estimates they
/// produce there must not override the coarser initialization.
fn keep_improvements(
    a: &FloatFrame,
    b: &FloatFrame,
    weights: Option<&[f32]>,
    u0: &[f32],
    v0: &[f32],
    u: &mut [f32],
    v: &mut [f32],
    radius: usize,
) {
    let before = warp_residual(a, b, weights, u0, v0, radius);
    let after = warp_residual(a, b, weights, u, v, radius);
    for i in 0..u.len() {
        if after[i] > before[i] {
            u[i] = u0[i];
            v[i] = v0[i];
        }
    }
}

/// Central differences with replicate padding.
fn gradients(img: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            gx[y * w + x] = 0.5 * (img[y * w + xp] - img[y * w + xm]);
            gy[y * w + x] = 0.5 * (img[yp * w + x] - img[ym * w + x]);
        }
    }
    (gx, gy)
}

fn pyramid(img: &FloatFrame, levels: usize) -> Vec<FloatFrame> {
    let mut out = vec![binomial(img)];
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(decimate(&binomial(prev)));
    }
    out
}

/// Weights follow the image pyramid but with a min over the smoothing
/// footprint, so no down-weighted pixel leaks into a full-weight one.
fn weight_pyramid(wt: &FloatFrame, levels: usize) -> Vec<FloatFrame> {
    let mut out = vec![erode(wt, 2)];
    for _ in 1..levels {
        let prev = out.last().unwrap();
        out.push(decimate(&erode(prev, 2)));
    }
    out
}

/// Separable min filter over a (2r+1)^2 square, replicate border.
fn erode(img: &FloatFrame, r: usize) -> FloatFrame {
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            tmp[y * w + x] = img.data[y * w + lo..=y * w + hi].iter().copied().fold(f32::INFINITY, f32::min);
        }
    }
    let mut out = FloatFrame::zeros(w, h, 1);
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out.data[y * w + x] = (lo..=hi).map(|yy| tmp[yy * w + x]).fold(f32::INFINITY, f32::min);
        }
    }
    out
}

/// Separable [1 4 6 4 1]/16 smoothing with replicate border.
fn binomial(img: &FloatFrame) -> FloatFrame {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = (img.width, img.height);
    let at = |i: usize, d: isize, n: usize| (i as isize + d).clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut s = 0.0;
            for (k, &c) in K.iter().enumerate() {
                s += c * row[at(x, k as isize - 2, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = FloatFrame::zeros(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, &c) in K.iter().enumerate() {
                s += c * tmp[at(y, k as isize - 2, h) * w + x];
            }
            out.data[y * w + x] = s;
        }
    }
    out
}

/// Keep every other pixel.
fn decimate(img: &FloatFrame) -> FloatFrame {
    let (nw, nh) = (img.width.div_ceil(2), img.height.div_ceil(2));
    let mut out = FloatFrame::zeros(nw, nh, 1);
    for y in 0..nh {
        for x in 0..nw {
            out.data[y * nw + x] = img.data[2 * y * img.width + 2 * x];
        }
    }
    out
}

/// Bilinear upsampling of one flow component, scaled by `factor`.
fn upsample_flow(c: &[f32], w: usize, h: usize, nw: usize, nh: usize, factor: f32) -> Vec<f32> {
    let sx = w as f32 / nw as f32;
    let sy = h as f32 / nh as f32;
    let mut out = vec![0.0f32; nw * nh];
    for y in 0..nh {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f32;
        for x in 0..nw {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f32;
            let top = c[y0 * w + x0] + (c[y0 * w + x1] - c[y0 * w + x0]) * tx;
            let bot = c[y1 * w + x0] + (c[y1 * w + x1] - c[y1 * w + x0]) * tx;
            out[y * nw + x] = (top + (bot - top) * ty) * factor;
        }
    }
    out
}
