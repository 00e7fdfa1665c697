//! Dense retrieval: the dual-encoder retriever, the cross-encoder ranker and
//! an exact inner-product index.

mod cross;
mod encoder;
mod index;
mod params;
mod vocab;

pub use cross::{CrossCache, CrossEncoder};
pub use encoder::{dot_sim, DualEncoder, EmbeddingVector, EncodeCache, EncoderParams, ModelDims};
pub use index::{index_corpus, FlatIpIndex, PrecomputedEmbeddings, SentenceEncoder};
pub use params::{Matrix, ParamSet};
pub use vocab::{Vocab, UNKNOWN_ID, UNKNOWN_TOKEN};

