//! Dense motion estimation between frame pairs and warping utilities.

mod estimate;
mod field;
mod plan;
mod warp;

pub use estimate::{estimate_flow, estimate_flow_masked, FlowParams};
pub use field::{FlowField, FLO_MAGIC};
pub use plan::{plan_flow_pairs, FlowPairPlan};
pub use warp::warp_frame;
