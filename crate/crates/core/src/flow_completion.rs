//! Edge-guided synthesis of flow inside masked regions.
//!
//! Masked pixels are filled by harmonic interpolation of u and v. Diffusion
//! does not pass through flow-edge pixels: an unknown pixel averages only its
//! non-edge 4-neighbours, so a motion boundary seen in the edge map survives
//! into the hole. Edges are taken as given; broken edges are not connected
//! across the hole.

use serde::{Deserialize, Serialize};

use crate::flow::FlowField;
use crate::imaging::MaskFrame;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edge: Vec<bool>,
}

impl EdgeMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edge: vec![false; width * height],
        }
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.edge[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edge.iter().filter(|&&e| e).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowProvenance {
    Observed,
    Synthesized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompletionWarning {
    /// The iteration budget ran out with the last update above 10x tol.
    NonConvergence { iterations: usize, residual: f32 },
    /// Nothing was observed; the field was filled with zeros.
    AllMasked,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedFlow {
    pub flow: FlowField,
    pub provenance: Vec<FlowProvenance>,
    pub warning: Option<CompletionWarning>,
    /// Sweeps actually run.
    pub iterations: usize,
    /// Largest absolute update of each sweep.
    pub residuals: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    pub edge_threshold: f32,
    pub tol: f32,
    pub max_iters: usize,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            edge_threshold: 1.0,
            tol: 1e-4,
            max_iters: 2000,
        }
    }
}

/// Derivative of one component along an axis at `i`, using only valid
/// samples: central where both sides are valid, one-sided otherwise.
fn derivative(c: &[f32], valid: &[bool], i: usize, prev: Option<usize>, next: Option<usize>) -> f32 {
    let p = prev.filter(|&j| valid[j]);
    let n = next.filter(|&j| valid[j]);
    match (p, n) {
        (Some(p), Some(n)) => 0.5 * (c[n] - c[p]),
        (Some(p), None) => c[i] - c[p],
        (None, Some(n)) => c[n] - c[i],
        (None, None) => 0.0,
    }
}

/// Mark pixels where the gradient magnitude of u or of v exceeds `threshold`.
pub fn extract_flow_edges(flow: &FlowField, threshold: f32) -> EdgeMap {
    let (w, h) = (flow.width, flow.height);
    let mut edges = EdgeMap::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !flow.valid[i] {
                continue;
            }
            let left = (x > 0).then(|| i - 1);
            let right = (x + 1 < w).then(|| i + 1);
            let up = (y > 0).then(|| i - w);
            let down = (y + 1 < h).then(|| i + w);
            let mag = |c: &[f32]| {
                let gx = derivative(c, &flow.valid, i, left, right);
                let gy = derivative(c, &flow.valid, i, up, down);
                (gx * gx + gy * gy).sqrt()
            };
            edges.edge[i] = mag(&flow.u).max(mag(&flow.v)) > threshold;
        }
    }
    edges
}

fn neighbours(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// The 4-neighbours each unknown pixel averages over.
///
/// Non-edge neighbours are used when there are any. A pixel with none, or
/// whose restricted neighbourhood cannot reach an observed pixel, falls back
/// to all of its neighbours so that the system stays nonsingular.
pub(crate) fn stencils(w: usize, h: usize, known: &[bool], edge: &[bool]) -> Vec<(usize, Vec<usize>)> {
    let n = w * h;
    let unknown: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in unknown.iter().enumerate() {
        slot[i] = k;
    }
    let mut stencil: Vec<Vec<usize>> = unknown
        .iter()
        .map(|&i| {
            let open: Vec<usize> = neighbours(i, w, h).filter(|&j| !edge[j]).collect();
            if open.is_empty() {
                neighbours(i, w, h).collect()
            } else {
                open
            }
        })
        .collect();

    loop {
        // An unknown is anchored when its stencil reaches an observed pixel
        // or another anchored unknown.
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); unknown.len()];
        let mut anchored = vec![false; unknown.len()];
        let mut queue = Vec::new();
        for (k, st) in stencil.iter().enumerate() {
            for &j in st {
                if known[j] {
                    if !anchored[k] {
                        anchored[k] = true;
                        queue.push(k);
                    }
                } else {
                    dependents[slot[j]].push(k);
                }
            }
        }
        while let Some(k) = queue.pop() {
            for &d in &dependents[k] {
                if !anchored[d] {
                    anchored[d] = true;
                    queue.push(d);
                }
            }
        }
        let mut changed = false;
        for (k, &i) in unknown.iter().enumerate() {
            let full = neighbours(i, w, h).count();
            if !anchored[k] && stencil[k].len() < full {
                stencil[k] = neighbours(i, w, h).collect();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    unknown.into_iter().zip(stencil).collect()
}

/// Fill the masked part of `flow` by edge-masked harmonic interpolation.
pub fn complete_flow(
    flow: &FlowField,
    mask: &MaskFrame,
    edges: &EdgeMap,
    tol: f32,
    max_iters: usize,
) -> Result<CompletedFlow> {
    let (w, h) = (flow.width, flow.height);
    if !mask.same_size(w, h) {
        return Err(Error::dims(
            format!("{w}x{h}"),
            format!("{}x{}", mask.width(), mask.height()),
        ));
    }
    if edges.width != w || edges.height != h {
        return Err(Error::dims(
            format!("{w}x{h}"),
            format!("{}x{}", edges.width, edges.height),
        ));
    }
    let n = w * h;
    let known: Vec<bool> = (0..n).map(|i| !mask.is_fg_index(i) && flow.valid[i]).collect();
    let provenance: Vec<FlowProvenance> = known
        .iter()
        .map(|&k| {
            if k {
                FlowProvenance::Observed
            } else {
                FlowProvenance::Synthesized
            }
        })
        .collect();
    let mut out = flow.clone();
    out.valid = vec![true; n];

    if !known.iter().any(|&k| k) {
        log::warn!("flow completion: every pixel is masked, filling with zero flow");
        out.u.fill(0.0);
        out.v.fill(0.0);
        return Ok(CompletedFlow {
            flow: out,
            provenance,
            warning: Some(CompletionWarning::AllMasked),
            iterations: 0,
            residuals: Vec::new(),
        });
    }

    let stencil = stencils(w, h, &known, &edges.edge);
    if stencil.is_empty() {
        return Ok(CompletedFlow {
            flow: out,
            provenance,
            warning: None,
            iterations: 0,
            residuals: Vec::new(),
        });
    }
    initial_guess(&mut out, &known);

    let (red, black): (Vec<_>, Vec<_>) = stencil.iter().partition(|(i, _)| (i % w + i / w) % 2 == 0);
    let mut residuals = Vec::new();
    let mut last = f32::INFINITY;
    for _ in 0..max_iters {
        let mut change = 0.0f32;
        for colour in [&red, &black] {
            for (i, st) in colour.iter() {
                let k = st.len() as f32;
                let su: f32 = st.iter().map(|&j| out.u[j]).sum();
                let sv: f32 = st.iter().map(|&j| out.v[j]).sum();
                let (nu, nv) = (su / k, sv / k);
                change = change.max((nu - out.u[*i]).abs()).max((nv - out.v[*i]).abs());
                out.u[*i] = nu;
                out.v[*i] = nv;
            }
        }
        residuals.push(change);
        last = change;
        if change < tol {
            break;
        }
    }
    let iterations = residuals.len();
    let warning = (last > 10.0 * tol).then(|| {
        log::warn!("flow completion did not converge: update {last} after {iterations} sweeps");
        CompletionWarning::NonConvergence {
            iterations,
            residual: last,
        }
    });
    Ok(CompletedFlow {
        flow: out,
        provenance,
        warning,
        iterations,
        residuals,
    })
}

/// Onion-peel fill: each unknown layer takes the mean of its already-filled
/// neighbours. Only a starting point for the sweeps.
fn initial_guess(f: &mut FlowField, known: &[bool]) {
    let (w, h) = (f.width, f.height);
    let mut filled = known.to_vec();
    let mut frontier: Vec<usize> = (0..w * h).filter(|&i| !filled[i]).collect();
    while !frontier.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &frontier {
            let (mut su, mut sv, mut k) = (0.0, 0.0, 0.0);
            for j in neighbours(i, w, h).filter(|&j| filled[j]) {
                su += f.u[j];
                sv += f.v[j];
                k += 1.0;
            }
            if k > 0.0 {
                layer.push((i, su / k, sv / k));
            } else {
                rest.push(i);
            }
        }
        for &(i, u, v) in &layer {
            f.u[i] = u;
            f.v[i] = v;
            filled[i] = true;
        }
        frontier = rest;
    }
}

/// Extract edges from the observed flow and complete the masked region.
pub fn complete_with_params(flow: &FlowField, mask: &MaskFrame, p: &CompletionParams) -> Result<CompletedFlow> {
    let mut observed = flow.clone();
    observed.invalidate(mask);
    let edges = extract_flow_edges(&observed, p.edge_threshold);
    complete_flow(&observed, mask, &edges, p.tol, p.max_iters)
}
