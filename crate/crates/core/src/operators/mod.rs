//! `Q^λ±`, `P±`, and the Galerkin assembly of the operator blocks.

mod assembly;
mod cache;
mod smoothing;
mod weights;

pub use assembly::{assemble_blocks, assemble_m, symmetrize, Assembler, BlockDiagnostics, OperatorBlocks};
pub use cache::{
    straight_line_factor, CacheSummary, EvalOptions, NodeSmoothing, OrbitCache, RecordKind, Scratch, Smoother,
};
pub use smoothing::{
    apply_projection, apply_smoothing, ProjectionEvaluator, SmoothingEvaluator, TimeRule,
};
pub use weights::{window_rule, OrbitWeights};
