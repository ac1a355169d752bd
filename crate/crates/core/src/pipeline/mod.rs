//! End-to-end orchestration: ingest, networks, embeddings, features, PCA,
//! regression and report, each writing its outputs under one directory.

pub mod analysis;
mod config;
mod run;

pub use config::{default_cutoff, ConfigError, ModelId, PipelineConfig, WINDOW_CHOICES};
pub use run::{
    run_embed, run_features, run_ingest, run_networks, run_pca, run_pipeline, run_regress, run_report, FileRecord,
    RunManifest, StageRecord,
};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Networks,
    Embed,
    Features,
    Pca,
    Regress,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Networks => "networks",
            Stage::Embed => "embed",
            Stage::Features => "features",
            Stage::Pca => "pca",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Numeric,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Numeric => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: FailureKind, message: impl fmt::Display) -> Self {
        PipelineError { stage, kind, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

/// How an error from a library module is classified when it aborts a stage.
pub(crate) trait Classify: fmt::Display {
    fn kind(&self) -> FailureKind;

    fn at(self, stage: Stage) -> PipelineError
    where
        Self: Sized,
    {
        PipelineError::new(stage, self.kind(), &self)
    }
}

impl Classify for ConfigError {
    fn kind(&self) -> FailureKind {
        FailureKind::Config
    }
}

impl Classify for crate::corpus::CorpusError {
    fn kind(&self) -> FailureKind {
        FailureKind::Data
    }
}

impl Classify for crate::netbuild::GraphError {
    fn kind(&self) -> FailureKind {
        FailureKind::Data
    }
}

impl Classify for crate::metrics::MetricsError {
    fn kind(&self) -> FailureKind {
        use crate::metrics::MetricsError as E;
        match self {
            E::Embed(e) => e.kind(),
            _ => FailureKind::Data,
        }
    }
}

impl Classify for crate::embed::EmbedError {
    fn kind(&self) -> FailureKind {
        use crate::embed::EmbedError as E;
        match self {
            E::InvalidConfig(_) => FailureKind::Config,
            E::Format(_) | E::Csv(_) | E::Io(_) | E::DuplicateId(_) | E::EmptyGraph | E::EmptyCorpus => FailureKind::Data,
            E::DimensionMismatch { .. } | E::ZeroVector => FailureKind::Numeric,
        }
    }
}

impl Classify for crate::stats::StatsError {
    fn kind(&self) -> FailureKind {
        use crate::stats::StatsError as E;
        match self {
            E::UnknownColumn(_) => FailureKind::Data,
            _ => FailureKind::Numeric,
        }
    }
}

impl Classify for std::io::Error {
    fn kind(&self) -> FailureKind {
        FailureKind::Data
    }
}

impl Classify for serde_json::Error {
    fn kind(&self) -> FailureKind {
        FailureKind::Data
    }
}
