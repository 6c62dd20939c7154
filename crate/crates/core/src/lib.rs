pub mod config;
pub mod corpus;
pub mod eval;
pub mod extraction;
pub mod fusion;
pub mod inference;
pub mod pipeline;
pub mod scalar;
pub mod signal;
pub mod temporal;

pub use config::Config;
pub use temporal::TimePoint;

/// Scalar used by the concrete aliases below.
pub type Real = f64;
pub type Chunk = extraction::FocusedChunk<Real>;
pub type ChunkSet = extraction::FocusedChunkSet<Real>;
pub type Outcome = inference::InferenceOutcome<Real>;
pub type Verdict = fusion::ExpirationVerdict<Real>;
pub type ExpiryPipeline = pipeline::Pipeline<Real>;
