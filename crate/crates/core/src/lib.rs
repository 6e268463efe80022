//! Link prediction over flattened knowledge graphs.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision for callers that do not need to choose.

pub mod kg;
pub mod rdf;
pub mod rng;
pub mod scalar;
pub mod split;
pub mod embed;
pub mod model;
pub mod metrics;
pub mod synth;
pub mod pipeline;

pub type EmbeddingMatrixF32 = embed::EmbeddingMatrix<f32>;
pub type EmbeddingMatrixF64 = embed::EmbeddingMatrix<f64>;
pub type LogisticModelF32 = model::LogisticModel<f32>;
pub type LogisticModelF64 = model::LogisticModel<f64>;
pub type MlpModelF32 = model::MlpModel<f32>;
pub type MlpModelF64 = model::MlpModel<f64>;
pub type ScoredExampleF32 = metrics::ScoredExample<f32>;
pub type ScoredExampleF64 = metrics::ScoredExample<f64>;
