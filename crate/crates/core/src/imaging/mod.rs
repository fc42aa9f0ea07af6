//! Raster types, numbered-frame I/O, resampling, temporal median and mask
//! utilities shared by every stage.

mod frame;
pub mod io;
mod ops;

pub use frame::{
    quantize, FloatFrame, Frame, FrameSequence, MaskFrame, BACKGROUND, FOREGROUND, LUMA_B, LUMA_G,
    LUMA_R,
};
pub use ops::{
    box_blur, connected_components, dilate_mask, median_of, remove_small_components,
    resize_bilinear, resize_mask_nearest, temporal_median, to_gray,
};

/// Canonical working resolution.
pub const CANONICAL_WIDTH: usize = 320;
pub const CANONICAL_HEIGHT: usize = 240;
