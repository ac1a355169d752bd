//! Node and package embeddings: weighted random walks over project graphs,
//! co-import sequences over packages, and one skip-gram trainer for both.

mod matrix;
mod skipgram;
mod walks;

pub use matrix::{cosine_similarity, EmbeddingMatrix};
pub use skipgram::{
    positive_pairs, skipgram_loss_and_grad, train_skipgram, train_skipgram_with_report, ContextWindow, LossGrad,
    SkipGramConfig, TrainReport,
};
pub use walks::{build_package_corpus, sample_walks, Corpus, CorpusKind, WalkConfig, WalkSet};

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("corpus has no training pairs")]
    EmptyCorpus,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("duplicate embedding id {0}")]
    DuplicateId(String),
    #[error("invalid skip-gram config: {0}")]
    InvalidConfig(String),
    #[error("embedding file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
