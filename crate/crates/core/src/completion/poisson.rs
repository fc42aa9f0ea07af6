//! Gradient-domain reconstruction: solve `Δf = div g` inside a region with
//! observed colors as Dirichlet boundary.

use crate::imaging::{FloatFrame, MaskFrame};
use crate::{Error, Result};

/// Target forward differences per channel: `gx(x, y) ≈ f(x+1, y) - f(x, y)`
/// and `gy(x, y) ≈ f(x, y+1) - f(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Guidance {
    pub gx: FloatFrame,
    pub gy: FloatFrame,
}

impl Guidance {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            gx: FloatFrame::zeros(width, height, channels),
            gy: FloatFrame::zeros(width, height, channels),
        }
    }

    /// Forward differences of an image.
    pub fn of(img: &FloatFrame) -> Self {
        let (w, h, ch) = (img.width, img.height, img.channels);
        let mut g = Self::zeros(w, h, ch);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    if x + 1 < w {
                        g.gx.set(x, y, c, img.get(x + 1, y, c) - img.get(x, y, c));
                    }
                    if y + 1 < h {
                        g.gy.set(x, y, c, img.get(x, y + 1, c) - img.get(x, y, c));
                    }
                }
            }
        }
        g
    }

    /// Desired `f(q) - f(p)` for 4-neighbour `q` of `p`.
    fn delta(&self, p: (usize, usize), q: (usize, usize), c: usize) -> f64 {
        let v = if q.0 > p.0 {
            self.gx.get(p.0, p.1, c)
        } else if q.0 < p.0 {
            -self.gx.get(q.0, q.1, c)
        } else if q.1 > p.1 {
            self.gy.get(p.0, p.1, c)
        } else {
            -self.gy.get(q.0, q.1, c)
        };
        f64::from(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonResult {
    pub frame: FloatFrame,
    /// Region pixels that were solved for. Region components that touch no
    /// known pixel keep their input value and are not marked.
    pub solved: Vec<bool>,
    /// Largest final residual `|A f - b|` over all channels.
    pub residual: f64,
    /// Iterations of the slowest channel.
    pub iterations: usize,
    pub converged: bool,
}

fn neighbours(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    [
        (x > 0).then(|| (x - 1, y)),
        (x + 1 < w).then(|| (x + 1, y)),
        (y > 0).then(|| (x, y - 1)),
        (y + 1 < h).then(|| (x, y + 1)),
    ]
    .into_iter()
    .flatten()
}

/// Solve for the pixels of `region`. Pixels outside it are known where
/// finite and act as Dirichlet values; NaN pixels outside it are missing and
/// contribute no flux. Region values are the initial guess.
pub fn poisson_reconstruct(
    partial: &FloatFrame,
    region: &MaskFrame,
    guidance: &Guidance,
    tol: f64,
    max_iters: usize,
) -> Result<PoissonResult> {
    let (w, h, ch) = (partial.width, partial.height, partial.channels);
    if !region.same_size(w, h) {
        return Err(Error::dims(
            format!("{w}x{h}"),
            format!("{}x{}", region.width(), region.height()),
        ));
    }
    if guidance.gx.width != w || guidance.gx.height != h || guidance.gx.channels != ch {
        return Err(Error::dims(
            format!("{w}x{h}x{ch}"),
            format!("{}x{}x{}", guidance.gx.width, guidance.gx.height, guidance.gx.channels),
        ));
    }
    let n = w * h;
    let in_region = |i: usize| region.is_fg_index(i);
    let is_known =
        |x: usize, y: usize| !in_region(y * w + x) && (0..ch).all(|c| partial.get(x, y, c).is_finite());

    // Region components (4-connected) that touch a known pixel are solvable.
    let mut comp = vec![usize::MAX; n];
    let mut anchored = Vec::new();
    for start in (0..n).filter(|&i| in_region(i)) {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = anchored.len();
        let mut touches = false;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            for (nx, ny) in neighbours(x, y, w, h) {
                let j = ny * w + nx;
                if in_region(j) {
                    if comp[j] == usize::MAX {
                        comp[j] = id;
                        stack.push(j);
                    }
                } else if is_known(nx, ny) {
                    touches = true;
                }
            }
        }
        anchored.push(touches);
    }
    let unknowns: Vec<usize> = (0..n).filter(|&i| in_region(i) && anchored[comp[i]]).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in unknowns.iter().enumerate() {
        slot[i] = k;
    }
    let mut solved = vec![false; n];
    for &i in &unknowns {
        solved[i] = true;
    }

    let mut out = partial.clone();
    let mut worst = 0.0f64;
    let mut iterations = 0;
    let mut converged = true;
    if unknowns.is_empty() {
        return Ok(PoissonResult {
            frame: out,
            solved,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    // Row structure shared by every channel.
    let m = unknowns.len();
    let mut diag = vec![0.0f64; m];
    let mut off: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (k, &i) in unknowns.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        for (nx, ny) in neighbours(x, y, w, h) {
            let j = ny * w + nx;
            if in_region(j) {
                diag[k] += 1.0;
                off[k].push(slot[j]);
            } else if is_known(nx, ny) {
                diag[k] += 1.0;
            }
        }
    }
    let apply = |xv: &[f64], yv: &mut [f64]| {
        for k in 0..m {
            let mut s = diag[k] * xv[k];
            for &j in &off[k] {
                s -= xv[j];
            }
            yv[k] = s;
        }
    };

    for c in 0..ch {
        let mut b = vec![0.0f64; m];
        for (k, &i) in unknowns.iter().enumerate() {
            let p = (i % w, i / w);
            for q in neighbours(p.0, p.1, w, h) {
                let j = q.1 * w + q.0;
                if in_region(j) {
                    b[k] -= guidance.delta(p, q, c);
                } else if is_known(q.0, q.1) {
                    b[k] += f64::from(partial.get(q.0, q.1, c)) - guidance.delta(p, q, c);
                }
            }
        }
        let mut xv: Vec<f64> = unknowns
            .iter()
            .map(|&i| {
                let v = f64::from(partial.get(i % w, i / w, c));
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        let (res, iters, ok) = pcg(&apply, &diag, &b, &mut xv, tol, max_iters);
        worst = worst.max(res);
        iterations = iterations.max(iters);
        converged &= ok;
        for (k, &i) in unknowns.iter().enumerate() {
            out.set(i % w, i / w, c, xv[k] as f32);
        }
    }
    if !converged {
        log::warn!("poisson reconstruction stopped at residual {worst:e} after {iterations} iterations");
    }
    Ok(PoissonResult {
        frame: out,
        solved,
        residual: worst,
        iterations,
        converged,
    })
}

/// Jacobi-preconditioned conjugate gradients. Stops when the max-norm of the
/// residual is at most `tol`. Returns (residual, iterations, converged).
fn pcg(
    apply: &impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> (f64, usize, bool) {
    let m = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let inf = |a: &[f64]| a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut ax = vec![0.0; m];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; m];
    for it in 0..max_iters {
        let res = inf(&r);
        if res <= tol {
            return (res, it, true);
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..m {
            z[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    // Report the true residual rather than the recurrence.
    apply(x, &mut ax);
    let res = inf(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    (res, max_iters, res <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn region(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> MaskFrame {
        MaskFrame::from_fn(w, h, f)
    }

    /// Dense solve of the same discrete equation, assembled independently:
    /// for region p, sum over usable neighbours q of (f_p - f_q) equals the
    /// sum of the desired differences (f_p - f_q).
    fn dense(partial: &FloatFrame, reg: &MaskFrame, g: &Guidance, c: usize) -> Vec<f64> {
        let (w, h) = (partial.width, partial.height);
        let cells: Vec<(usize, usize)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| reg.is_fg(x, y))
            .collect();
        let pos = |x: usize, y: usize| cells.iter().position(|&p| p == (x, y));
        let m = cells.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (r, &(x, y)) in cells.iter().enumerate() {
            for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let want = match (dx, dy) {
                    (1, 0) => g.gx.get(x, y, c),
                    (-1, 0) => -g.gx.get(nx, ny, c),
                    (0, 1) => g.gy.get(x, y, c),
                    _ => -g.gy.get(nx, ny, c),
                } as f64;
                if let Some(col) = pos(nx, ny) {
                    a[(r, r)] += 1.0;
                    a[(r, col)] -= 1.0;
                    b[r] -= want;
                } else if partial.get(nx, ny, c).is_finite() {
                    a[(r, r)] += 1.0;
                    b[r] += partial.get(nx, ny, c) as f64 - want;
                }
            }
        }
        a.lu().solve(&b).expect("nonsingular").iter().copied().collect()
    }

    fn ramp(w: usize, h: usize) -> FloatFrame {
        let mut f = FloatFrame::zeros(w, h, 1);
        for y in 0..h {
            for x in 0..w {
                f.set(x, y, 0, x as f32 * 0.02);
            }
        }
        f
    }

    #[test]
    fn empty_region_is_identity() {
        let f = ramp(8, 6);
        let r = poisson_reconstruct(&f, &MaskFrame::empty(8, 6), &Guidance::zeros(8, 6, 1), 1e-9, 10).unwrap();
        assert_eq!(r.frame, f);
    }

    #[test]
    fn ramp_recovered_from_guidance() {
        let (w, h) = (32, 32);
        let truth = ramp(w, h);
        let reg = region(w, h, |x, y| (4..28).contains(&x) && (6..26).contains(&y));
        let mut partial = truth.clone();
        for y in 0..h {
            for x in 0..w {
                if reg.is_fg(x, y) {
                    partial.set(x, y, 0, 0.5);
                }
            }
        }
        let mut g = Guidance::zeros(w, h, 1);
        g.gx.data.fill(0.02);
        let r = poisson_reconstruct(&partial, &reg, &g, 1e-9, 5000).unwrap();
        assert!(r.converged);
        let oracle = dense(&partial, &reg, &g, 0);
        let mut k = 0;
        for y in 0..h {
            for x in 0..w {
                if reg.is_fg(x, y) {
                    assert!((r.frame.get(x, y, 0) - truth.get(x, y, 0)).abs() <= 1e-3);
                    assert!((r.frame.get(x, y, 0) as f64 - oracle[k]).abs() <= 1e-3);
                    k += 1;
                } else {
                    assert_eq!(r.frame.get(x, y, 0), partial.get(x, y, 0));
                }
            }
        }
    }

    #[test]
    fn constant_boundary_zero_guidance() {
        let (w, h) = (12, 10);
        let mut f = FloatFrame::zeros(w, h, 3);
        f.data.fill(0.4);
        let reg = region(w, h, |x, y| (2..9).contains(&x) && (3..8).contains(&y));
        for i in 0..w * h {
            if reg.is_fg_index(i) {
                f.data[i * 3] = 0.9;
            }
        }
        let tol = 1e-8;
        let r = poisson_reconstruct(&f, &reg, &Guidance::zeros(w, h, 3), tol, 1000).unwrap();
        assert!(r.frame.data.iter().all(|&v| (v - 0.4).abs() <= 1e-6));
    }

    #[test]
    fn missing_neighbours_are_zero_flux_and_isolated_parts_kept() {
        let (w, h) = (10, 6);
        let mut f = FloatFrame::zeros(w, h, 1);
        f.data.fill(0.2);
        for x in 0..w {
            f.set(x, 0, 0, f32::NAN);
        }
        // A region component enclosed by missing pixels and the border.
        let reg = region(w, h, |x, y| (y == 1 && x < 3) || ((5..8).contains(&x) && (2..4).contains(&y)));
        f.set(3, 1, 0, f32::NAN);
        f.set(0, 2, 0, f32::NAN);
        f.set(1, 2, 0, f32::NAN);
        f.set(2, 2, 0, f32::NAN);
        f.set(0, 1, 0, 0.7);
        let r = poisson_reconstruct(&f, &reg, &Guidance::zeros(w, h, 1), 1e-10, 500).unwrap();
        assert!(!r.solved[w]);
        assert_eq!(r.frame.get(0, 1, 0), 0.7);
        assert!(r.solved[2 * w + 6]);
        assert!((r.frame.get(6, 2, 0) - 0.2).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn matches_dense_oracle_on_random_systems(seed in any::<u64>(), w in 4usize..20, h in 4usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = FloatFrame::zeros(w, h, 2);
            for v in f.data.iter_mut() {
                *v = rng.gen::<f32>();
            }
            let reg = region(w, h, |x, y| x > 0 && y > 0 && x + 1 < w && y + 1 < h && (x * 7 + y * 3 + seed as usize) % 5 != 0);
            let mut g = Guidance::zeros(w, h, 2);
            for v in g.gx.data.iter_mut().chain(g.gy.data.iter_mut()) {
                *v = rng.gen::<f32>() * 0.2 - 0.1;
            }
            let r = poisson_reconstruct(&f, &reg, &g, 1e-10, 10_000).unwrap();
            prop_assert!(r.converged);
            prop_assert!(r.residual <= 1e-6);
            for c in 0..2 {
                let oracle = dense(&f, &reg, &g, c);
                let mut k = 0;
                for y in 0..h {
                    for x in 0..w {
                        if reg.is_fg(x, y) {
                            prop_assert!((r.frame.get(x, y, c) as f64 - oracle[k]).abs() <= 1e-4);
                            k += 1;
                        } else {
                            prop_assert_eq!(r.frame.get(x, y, c), f.get(x, y, c));
                        }
                    }
                }
            }
        }
    }
}
