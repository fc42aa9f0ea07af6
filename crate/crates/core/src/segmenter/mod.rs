//! Foreground segmentation: an inference engine for the encoder-decoder
//! stack, its 12-plane input assembly, and a differencing fallback that needs
//! no weights.

mod classic;
mod input;
mod network;
mod tensor;
mod weights;

pub use classic::{binarize, differencing_segment, DifferencingParams};
pub use input::{assemble_input, FpmSource, SegmenterInput};
pub use network::{forward, LayerKind, LayerSpec, NetworkSpec, ProbabilityMap};
pub use tensor::{batchnorm_infer, conv2d, maxpool2, upconv2, BatchNorm, Kernel, Tensor3};
pub use weights::{LayerParams, WeightStore, DEFAULT_BN_EPS, WEIGHTS_FORMAT};

use crate::error::Result;
use crate::imaging::MaskFrame;

/// Forward pass followed by binarization.
pub fn segment_with_network(
    net: &NetworkSpec,
    weights: &WeightStore,
    input: &SegmenterInput,
    threshold: f32,
) -> Result<(ProbabilityMap, MaskFrame)> {
    let prob = forward(net, weights, &input.to_tensor()?)?;
    let mask = binarize(&prob, threshold);
    Ok((prob, mask))
}
