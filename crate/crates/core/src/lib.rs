//! Diagnostics for annotation artifacts in labeled sentence-pair corpora.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod aflite;
pub mod corpus;
pub mod embedstore;
pub mod error;
pub mod heuristics;
pub mod lexstats;
pub mod linmodels;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod seeding;
pub mod synthgen;
pub mod textproc;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use corpus::{Dataset, Label, PairExample, Split};
pub use textproc::{Gazetteer, TokenSeq};

pub type EmbeddingTableF64 = embedstore::EmbeddingTable<f64>;
pub type EmbeddingTableF32 = embedstore::EmbeddingTable<f32>;
pub type TextClassifierF64 = linmodels::TextClassifier<f64>;
pub type TextClassifierF32 = linmodels::TextClassifier<f32>;
pub type LogRegModelF64 = linmodels::LogRegModel<f64>;
pub type LogRegModelF32 = linmodels::LogRegModel<f32>;
pub type PmiTableF64 = lexstats::PmiTable<f64>;
pub type PmiTableF32 = lexstats::PmiTable<f32>;
pub type InstanceF64 = aflite::Instance<f64>;
pub type InstanceF32 = aflite::Instance<f32>;
