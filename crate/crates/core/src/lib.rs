//! Engine for machine-in-the-loop interpretive text analysis.
//!
//! Documents are ingested into a word–document network, the analyst's codes
//! and categories are layered on top as metadata, and a hierarchical,
//! degree-corrected block model is fit by minimizing a description length.
//! The resulting word and document clusters drive a hexagonal treemap of
//! the corpus and a ranked document sampler.

pub mod annotations;
pub mod blockmodel;
pub mod corpus;
pub mod inference;
pub mod layout;
pub mod multinet;
pub mod project;
pub mod sampler;
pub mod scalar;

pub use scalar::Scalar;

/// Objective value in double precision, the working type of inference.
pub type Objective = blockmodel::ObjectiveValue<f64>;
/// Single-precision objective, for quick previews of large partitions.
pub type ObjectiveF32 = blockmodel::ObjectiveValue<f32>;
/// Incremental single-level state in double precision.
pub type LevelState<'g> = blockmodel::LevelState<'g, f64>;
