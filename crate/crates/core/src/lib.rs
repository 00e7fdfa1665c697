//! Metric-guided distillation for retrieve-then-rank sentence retrieval.
//!
//! A dual-encoder retriever and a cross-encoder ranker are trained so that
//! their relevance orderings follow the quality ordering a generation metric
//! (BLEU, ROUGE) assigns to candidate sentences against reference sentences.
//! Knowledge flows metric → ranker (ListMLE) → retriever (KL divergence).

pub mod corpus;
pub mod dense;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod pipeline;
pub mod pool;
pub mod sparse;
pub mod training;

pub use error::{Error, Result};
