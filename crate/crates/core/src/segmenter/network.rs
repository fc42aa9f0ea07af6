use serde::{Deserialize, Serialize};

use super::tensor::{apply_bn, conv2d, maxpool2, upconv2, Tensor3};
use super::weights::WeightStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    ConvBn,
    DropoutMaxpool,
    UpConvBn,
    /// Running features followed by an encoder stage output (main + skip),
    /// then conv + BN.
    ConvBnConcat,
    Sigmoid,
}

impl LayerKind {
    pub fn has_params(self) -> bool {
        matches!(self, Self::ConvBn | Self::UpConvBn | Self::ConvBnConcat)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Square kernel side; 0 for the sigmoid row.
    pub kernel: usize,
    /// Channels arriving along the main path.
    pub in_channels: usize,
    /// Extra channels concatenated from an encoder stage.
    pub skip_channels: usize,
    pub out_channels: usize,
    /// 1-based encoder stage (the features entering the n-th pool).
    pub skip_source: Option<usize>,
}

impl LayerSpec {
    fn new(kind: LayerKind, kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind,
            kernel,
            in_channels,
            skip_channels: 0,
            out_channels,
            skip_source: None,
        }
    }

    fn concat(stage: usize, main: usize, skip: usize, out: usize) -> Self {
        Self {
            skip_channels: skip,
            skip_source: Some(stage),
            ..Self::new(LayerKind::ConvBnConcat, 3, main, out)
        }
    }

    /// Channels the layer's kernel actually sees.
    pub fn total_in(&self) -> usize {
        self.in_channels + self.skip_channels
    }
}

/// The encoder-decoder layer stack, one entry per table row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_channels: usize,
    pub output_channels: usize,
}

impl NetworkSpec {
    /// The published 12-in, 1-out configuration.
    pub fn standard() -> Self {
        Self::with_base_width(64)
    }

    /// The standard topology with every channel count scaled so the first
    /// block has `base` channels (64 reproduces the table).
    pub fn with_base_width(base: usize) -> Self {
        use LayerKind::*;
        let conv = |i, o| LayerSpec::new(ConvBn, 3, i, o);
        let pool = |c| LayerSpec::new(DropoutMaxpool, 2, c, c);
        let up = |i, o| LayerSpec::new(UpConvBn, 3, i, o);
        let (c1, c2, c3, c4) = (base, 2 * base, 4 * base, 8 * base);
        let layers = vec![
            conv(12, c1),
            conv(c1, c1),
            pool(c1),
            conv(c1, c2),
            conv(c2, c2),
            pool(c2),
            conv(c2, c3),
            conv(c3, c3),
            conv(c3, c3),
            pool(c3),
            conv(c3, c4),
            conv(c4, c4),
            conv(c4, c4),
            pool(c4),
            conv(c4, c4),
            conv(c4, c4),
            conv(c4, c4),
            up(c4, c4),
            LayerSpec::concat(4, c4, c4, c4),
            conv(c4, c4),
            up(c4, c4),
            LayerSpec::concat(3, c4, c3, c3),
            conv(c3, c3),
            up(c3, c3),
            LayerSpec::concat(2, c3, c2, c2),
            conv(c2, c2),
            up(c2, c2),
            LayerSpec::concat(1, c2, c1, c1),
            conv(c1, c1),
            conv(c1, 1),
            LayerSpec::new(Sigmoid, 0, 1, 1),
        ];
        let spec = Self {
            layers,
            input_channels: 12,
            output_channels: 1,
        };
        spec.validate().expect("generated network is consistent");
        spec
    }

    /// Check kernel sizes, channel chaining, skip arithmetic and block counts.
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, msg: String| Err(Error::ShapeMismatch(format!("layer {i}: {msg}")));
        let mut channels = self.input_channels;
        let mut stages: Vec<usize> = Vec::new();
        let mut ups = 0;
        let mut down_blocks = 0;
        let mut in_block = false;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels != channels {
                return bad(i, format!("expects {} channels, receives {channels}", l.in_channels));
            }
            let want_kernel = match l.kind {
                LayerKind::DropoutMaxpool => 2,
                LayerKind::Sigmoid => 0,
                _ => 3,
            };
            if l.kernel != want_kernel {
                return bad(i, format!("kernel {} should be {want_kernel}", l.kernel));
            }
            match l.kind {
                LayerKind::ConvBn => {
                    if ups == 0 && !in_block {
                        down_blocks += 1;
                        in_block = true;
                    }
                }
                LayerKind::DropoutMaxpool => {
                    if l.out_channels != l.in_channels {
                        return bad(i, "pooling cannot change channels".into());
                    }
                    stages.push(channels);
                    in_block = false;
                }
                LayerKind::UpConvBn => ups += 1,
                LayerKind::ConvBnConcat => {
                    let stage = l.skip_source.unwrap_or(0);
                    // Decoders consume encoder stages deepest first.
                    if stage == 0 || stage > stages.len() || stage != stages.len() + 1 - ups {
                        return bad(i, format!("skip source {stage} out of order"));
                    }
                    if l.skip_channels != stages[stage - 1] {
                        return bad(
                            i,
                            format!(
                                "skip carries {} channels, stage {stage} has {}",
                                l.skip_channels,
                                stages[stage - 1]
                            ),
                        );
                    }
                }
                LayerKind::Sigmoid => {
                    if i + 1 != self.layers.len() || l.out_channels != l.in_channels {
                        return bad(i, "sigmoid must be the last, channel-preserving row".into());
                    }
                }
            }
            if l.kind != LayerKind::ConvBnConcat && (l.skip_channels != 0 || l.skip_source.is_some()) {
                return bad(i, "only concat rows take skip channels".into());
            }
            channels = l.out_channels;
        }
        if channels != self.output_channels {
            return Err(Error::ShapeMismatch(format!(
                "network ends with {channels} channels, expected {}",
                self.output_channels
            )));
        }
        if ups != stages.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} pools but {ups} up-convolutions",
                stages.len()
            )));
        }
        if down_blocks != stages.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{down_blocks} encoder conv blocks for {} pools",
                stages.len()
            )));
        }
        if self.layers.last().map(|l| l.kind) != Some(LayerKind::Sigmoid) {
            return Err(Error::ShapeMismatch("network must end in a sigmoid".into()));
        }
        Ok(())
    }

    pub fn pool_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::DropoutMaxpool)
            .count()
    }

    /// Required divisor of input height and width.
    pub fn spatial_divisor(&self) -> usize {
        1 << self.pool_count()
    }

    /// (channels, height, width) after every row for an input of `h` x `w`.
    pub fn shape_trace(&self, h: usize, w: usize) -> Result<Vec<(usize, usize, usize)>> {
        let d = self.spatial_divisor();
        if h == 0 || w == 0 || h % d != 0 || w % d != 0 {
            return Err(Error::ShapeMismatch(format!(
                "input {h}x{w} must be a positive multiple of {d} in both dimensions"
            )));
        }
        let (mut h, mut w) = (h, w);
        Ok(self
            .layers
            .iter()
            .map(|l| {
                match l.kind {
                    LayerKind::DropoutMaxpool => (h, w) = (h / 2, w / 2),
                    LayerKind::UpConvBn => (h, w) = (h * 2, w * 2),
                    _ => {}
                }
                (l.out_channels, h, w)
            })
            .collect())
    }

    /// Ordinals (indices into `layers`) of rows that own parameters.
    pub fn param_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.kind.has_params())
    }
}

/// Per-pixel foreground probability, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

const PROB_MIN: f32 = f32::MIN_POSITIVE;
/// Largest f32 below 1.
const PROB_MAX: f32 = 1.0 - f32::EPSILON / 2.0;

fn sigmoid(z: f32) -> f32 {
    let p = 1.0 / (1.0 + (-f64::from(z)).exp());
    (p as f32).clamp(PROB_MIN, PROB_MAX)
}

/// Run the stack on a 12-channel input. Dropout is the identity; every
/// conv and up-conv is followed by BN, then ReLU except on the last conv,
/// which feeds the sigmoid.
pub fn forward(net: &NetworkSpec, weights: &WeightStore, input: &Tensor3) -> Result<ProbabilityMap> {
    if input.channels() != net.input_channels {
        return Err(Error::ShapeMismatch(format!(
            "network takes {} channels, input has {}",
            net.input_channels,
            input.channels()
        )));
    }
    net.shape_trace(input.height(), input.width())?;
    weights.check_against(net)?;

    let last_param = net.param_layers().last().map(|(i, _)| i);
    let mut x = input.clone();
    let mut skips: Vec<Tensor3> = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        let relu = Some(i) != last_param;
        x = match layer.kind {
            LayerKind::ConvBn | LayerKind::ConvBnConcat => {
                let p = weights.layer(i)?;
                let mut y = if let Some(stage) = layer.skip_source {
                    conv2d(&Tensor3::concat(&[&x, &skips[stage - 1]])?, &p.kernel, &p.bias)?
                } else {
                    conv2d(&x, &p.kernel, &p.bias)?
                };
                apply_bn(&mut y, &p.bn, relu);
                y
            }
            LayerKind::UpConvBn => {
                let p = weights.layer(i)?;
                let mut y = upconv2(&x, &p.kernel, &p.bias)?;
                apply_bn(&mut y, &p.bn, relu);
                y
            }
            LayerKind::DropoutMaxpool => {
                let y = maxpool2(&x)?;
                skips.push(x);
                y
            }
            LayerKind::Sigmoid => {
                let (h, w) = (x.height(), x.width());
                let data = x.into_data().into_iter().map(sigmoid).collect();
                return Ok(ProbabilityMap {
                    width: w,
                    height: h,
                    data,
                });
            }
        };
    }
    Err(Error::ShapeMismatch("network has no sigmoid output".into()))
}
