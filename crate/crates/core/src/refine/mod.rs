//! Inference-time layout refinement: a global similarity transform found by
//! beam search, and removal of floating components outside control boxes.

mod artifacts;
mod beam;
mod transform;

pub use artifacts::{filter_artifacts, ArtifactReport, PartAction};
pub use beam::{optimize_layout, BeamConfig, Optimized, TraceRow};
pub use transform::SimilarityTransform;
