//! Multilingual news classification experiments.
//!
//! Three subtasks are supported: news genre (multiclass, article level),
//! framing (multilabel, article level) and persuasion techniques
//! (multilabel, paragraph level). The crate covers corpus parsing and
//! splitting, text augmentation, a hashed n-gram linear classifier trained
//! with Adam, official-style F1 scoring, a line-delimited JSON protocol for
//! external model backends, and the orchestration that sweeps seeds, selects
//! setups and writes prediction files.

pub mod augment;
pub mod backend;
pub mod classifier;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use corpus::{Dataset, Document, LabelKind, LabelSpace, LabeledInstance, Subtask};
