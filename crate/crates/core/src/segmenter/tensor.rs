use rayon::prelude::*;

use crate::error::{Error, Result};

/// Dense channel-major activation volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite value {} at flat index {i}",
                data[i]
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Stack equally sized tensors along the channel axis, in order.
    pub fn concat(parts: &[&Tensor3]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if (p.height, p.width) != (h, w) {
                return Err(Error::ShapeMismatch(format!(
                    "cannot concatenate {}x{} with {h}x{w}",
                    p.height, p.width
                )));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Ok(Self {
            channels,
            height: h,
            width: w,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn from_planes(height: usize, width: usize, planes: Vec<Vec<f32>>) -> Self {
        let channels = planes.len();
        Self {
            channels,
            height,
            width,
            data: planes.concat(),
        }
    }
}

/// 3x3 filter bank. Convolution kernels are laid out `[out, in, 3, 3]`,
/// transposed-convolution kernels `[in, out, 3, 3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    shape: [usize; 4],
    data: Vec<f32>,
}

impl Kernel {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if shape[2] != 3 || shape[3] != 3 {
            return Err(Error::ShapeMismatch(format!(
                "kernel must be 3x3, got {}x{}",
                shape[2], shape[3]
            )));
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "kernel {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn taps(&self, a: usize, b: usize) -> &[f32] {
        let start = (a * self.shape[1] + b) * 9;
        &self.data[start..start + 9]
    }
}

/// Floats per accumulator tile; keeps a tile plus its source rows in L1/L2.
const TILE_FLOATS: usize = 8192;

#[inline]
fn axpy(acc: &mut [f32], w: f32, src: &[f32]) {
    for (a, &s) in acc.iter_mut().zip(src) {
        *a += w * s;
    }
}

/// Copy every channel into a zero-bordered grid of `(h + top + bottom)` rows
/// by `(w + left + right)` columns, with `slack` trailing zeros per plane so
/// shifted full-row slices never run off the end.
fn pad_planes(
    x: &Tensor3,
    top: usize,
    bottom: usize,
    left: usize,
    right: usize,
    slack: usize,
) -> (Vec<f32>, usize, usize) {
    let (h, w) = (x.height, x.width);
    let pw = w + left + right;
    let stride = (h + top + bottom) * pw + slack;
    let mut out = vec![0.0f32; x.channels * stride];
    for c in 0..x.channels {
        let src = x.plane(c);
        let dst = &mut out[c * stride..(c + 1) * stride];
        for y in 0..h {
            let row = (y + top) * pw + left;
            dst[row..row + w].copy_from_slice(&src[y * w..(y + 1) * w]);
        }
    }
    (out, pw, stride)
}

/// Same-size 3x3 cross-correlation with zero padding.
///
/// Per output sample the sum runs bias first, then input channel, then
/// kernel row, then kernel column, independent of tiling or thread count.
pub fn conv2d(x: &Tensor3, kernel: &Kernel, bias: &[f32]) -> Result<Tensor3> {
    let [out_c, in_c, _, _] = kernel.shape;
    if in_c != x.channels {
        return Err(Error::ShapeMismatch(format!(
            "conv kernel expects {in_c} input channels, tensor has {}",
            x.channels
        )));
    }
    if bias.len() != out_c {
        return Err(Error::ShapeMismatch(format!(
            "conv bias has {} entries for {out_c} outputs",
            bias.len()
        )));
    }
    let (h, w) = (x.height, x.width);
    let (padded, pw, stride) = pad_planes(x, 1, 1, 1, 1, 2);
    let tile_rows = (TILE_FLOATS / pw).clamp(1, h);

    let planes: Vec<Vec<f32>> = (0..out_c)
        .into_par_iter()
        .map(|o| {
            let mut plane = vec![0.0f32; h * w];
            let mut acc = vec![0.0f32; tile_rows * pw];
            for y0 in (0..h).step_by(tile_rows) {
                let rows = tile_rows.min(h - y0);
                let n = rows * pw;
                let acc = &mut acc[..n];
                acc.fill(bias[o]);
                for i in 0..in_c {
                    let src = &padded[i * stride..(i + 1) * stride];
                    let taps = kernel.taps(o, i);
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let off = (y0 + ky) * pw + kx;
                            axpy(acc, taps[ky * 3 + kx], &src[off..off + n]);
                        }
                    }
                }
                for r in 0..rows {
                    plane[(y0 + r) * w..(y0 + r + 1) * w].copy_from_slice(&acc[r * pw..r * pw + w]);
                }
            }
            plane
        })
        .collect();
    Ok(Tensor3::from_planes(h, w, planes))
}

/// Stride-2 transposed 3x3 convolution, padding 1, output padding 1, so the
/// output is exactly twice the input in each spatial dimension:
/// input sample (y, x) scatters `k[ky][kx]` onto (2y + ky - 1, 2x + kx - 1).
pub fn upconv2(x: &Tensor3, kernel: &Kernel, bias: &[f32]) -> Result<Tensor3> {
    let [in_c, out_c, _, _] = kernel.shape;
    if in_c != x.channels {
        return Err(Error::ShapeMismatch(format!(
            "up-conv kernel expects {in_c} input channels, tensor has {}",
            x.channels
        )));
    }
    if bias.len() != out_c {
        return Err(Error::ShapeMismatch(format!(
            "up-conv bias has {} entries for {out_c} outputs",
            bias.len()
        )));
    }
    let (h, w) = (x.height, x.width);
    // Gather form: output (2a + py, 2b + px) reads input (a + dy, b + dx)
    // through tap k where (parity, shift) = PHASE[k].
    const PHASE: [(usize, usize); 3] = [(1, 1), (0, 0), (1, 0)];
    let (padded, pw, stride) = pad_planes(x, 0, 1, 0, 1, 1);
    let n = h * pw;

    let planes: Vec<Vec<f32>> = (0..out_c)
        .into_par_iter()
        .map(|o| {
            let mut acc = vec![vec![bias[o]; n]; 4];
            for i in 0..in_c {
                let src = &padded[i * stride..(i + 1) * stride];
                let taps = kernel.taps(i, o);
                for (ky, &(py, dy)) in PHASE.iter().enumerate() {
                    for (kx, &(px, dx)) in PHASE.iter().enumerate() {
                        let off = dy * pw + dx;
                        axpy(&mut acc[py * 2 + px], taps[ky * 3 + kx], &src[off..off + n]);
                    }
                }
            }
            let ow = 2 * w;
            let mut plane = vec![0.0f32; 4 * h * w];
            for (phase, a) in acc.iter().enumerate() {
                let (py, px) = (phase / 2, phase % 2);
                for y in 0..h {
                    let out_row = &mut plane[(2 * y + py) * ow..(2 * y + py + 1) * ow];
                    for xx in 0..w {
                        out_row[2 * xx + px] = a[y * pw + xx];
                    }
                }
            }
            plane
        })
        .collect();
    Ok(Tensor3::from_planes(2 * h, 2 * w, planes))
}

/// 2x2 max pooling with stride 2.
pub fn maxpool2(x: &Tensor3) -> Result<Tensor3> {
    let (h, w) = (x.height, x.width);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimensions {
            height: h,
            width: w,
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut data = Vec::with_capacity(x.channels * oh * ow);
    for c in 0..x.channels {
        let p = x.plane(c);
        for y in 0..oh {
            let (r0, r1) = (&p[2 * y * w..(2 * y + 1) * w], &p[(2 * y + 1) * w..(2 * y + 2) * w]);
            for xx in 0..ow {
                data.push(
                    r0[2 * xx]
                        .max(r0[2 * xx + 1])
                        .max(r1[2 * xx])
                        .max(r1[2 * xx + 1]),
                );
            }
        }
    }
    Ok(Tensor3 {
        channels: x.channels,
        height: oh,
        width: ow,
        data,
    })
}

/// Inference-mode batch normalization parameters for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
}

impl BatchNorm {
    pub fn identity(channels: usize) -> Self {
        Self {
            scale: vec![1.0; channels],
            shift: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 0.0,
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }
}

/// `(x - mean) / sqrt(var + eps) * scale + shift`, per channel.
pub fn batchnorm_infer(x: &Tensor3, bn: &BatchNorm) -> Result<Tensor3> {
    let c = x.channels;
    for (name, len) in [
        ("scale", bn.scale.len()),
        ("shift", bn.shift.len()),
        ("running mean", bn.running_mean.len()),
        ("running variance", bn.running_var.len()),
    ] {
        if len != c {
            return Err(Error::ShapeMismatch(format!(
                "batch-norm {name} has {len} entries for {c} channels"
            )));
        }
    }
    let mut out = x.clone();
    apply_bn(&mut out, bn, false);
    Ok(out)
}

/// In-place batch norm with optional ReLU; lengths already validated.
pub(crate) fn apply_bn(x: &mut Tensor3, bn: &BatchNorm, relu: bool) {
    let n = x.height * x.width;
    for (c, plane) in x.data.chunks_mut(n).enumerate() {
        let inv = (1.0 / (f64::from(bn.running_var[c]) + f64::from(bn.eps)).sqrt()) as f32;
        let (mean, scale, shift) = (bn.running_mean[c], bn.scale[c], bn.shift[c]);
        for v in plane.iter_mut() {
            let y = (*v - mean) * inv * scale + shift;
            *v = if relu { y.max(0.0) } else { y };
        }
    }
}
