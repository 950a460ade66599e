//! Bounded-memory, single-pass skip-gram with negative sampling.
//!
//! The streaming model keeps a fixed-size space-saving sketch as its
//! vocabulary and a reservoir of sketch slot indices as its negative
//! sampling distribution. Embeddings and learning rates are indexed by
//! sketch slot, so memory is fixed by the configuration no matter how long
//! the stream runs. A conventional two-pass trainer and the evaluation
//! helpers used to compare the two live alongside it.

pub mod batch;
mod codec;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod persist;
pub mod reservoir;
pub mod scalar;
pub mod sgns;
pub mod sketch;
pub mod stream;
pub mod surrogate;

pub use crate::batch::{BatchModel, BatchVocab, NegativeTable};
pub use crate::corpus::{CountTable, Sentence};
pub use crate::error::{Error, Result};
pub use crate::eval::{CountErrorReport, ErrorMode, SimilarityReport, WordVectors};
pub use crate::reservoir::Reservoir;
pub use crate::scalar::Scalar;
pub use crate::sgns::{EmbeddingTable, GradientStepSpec, LearningSchedule, ScheduleKind, SlotLearningState};
pub use crate::sketch::{ObserveOutcome, SpaceSavingSketch};
pub use crate::stream::{StreamModel, TrainStats, TrainerConfig};

/// Single-precision embedding table, the default for training.
pub type EmbeddingTable32 = EmbeddingTable<f32>;
/// Double-precision embedding table.
pub type EmbeddingTable64 = EmbeddingTable<f64>;
/// Single-precision streaming model, the one the CLI trains and checkpoints.
pub type StreamModel32 = StreamModel<f32>;
/// Double-precision streaming model.
pub type StreamModel64 = StreamModel<f64>;
pub type BatchModel32 = BatchModel<f32>;
pub type BatchModel64 = BatchModel<f64>;
