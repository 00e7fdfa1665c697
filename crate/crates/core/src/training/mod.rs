//! Losses, the optimizer and the three training procedures: retriever
//! warm-up, metric → ranker distillation and ranker → retriever distillation.

mod checkpoint;
mod config;
mod data;
mod distill;
mod eval;
mod loss;
mod optim;
mod ranker;
mod trainer;
mod warmup;

pub use checkpoint::{Checkpoint, ModelKind};
pub use config::{derive_seed, TrainingConfig};
pub use data::{Candidate, Split};
pub use distill::{distill_retriever, distill_retriever_direct, distill_with, DistillTeacher};
pub use eval::{argmax, recall_at_1, RankingExample};
pub use loss::{contrastive_loss, kl_distill_loss, list_mle_loss, list_mle_loss_ordering, LossGrad};
pub use optim::Adam;
pub use ranker::{initial_ranker, train_ranker, RankerObjective};
pub use trainer::{EpochRecord, TrainReport};
pub use warmup::{initial_retriever, warmup_retriever};

pub use crate::pool::CandidatePool;
