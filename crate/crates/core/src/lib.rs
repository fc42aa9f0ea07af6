pub mod cli;
pub mod completion;
pub mod error;
pub mod evaluation;
pub mod flow;
pub mod flow_completion;
pub mod imaging;
pub mod pipeline;
pub mod segmenter;
pub mod synth;

pub use error::{Error, Result};
