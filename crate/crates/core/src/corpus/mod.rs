//! Event logs, project catalogs and import manifests, plus the filters that
//! turn raw platform exports into a modelling sample: bot removal, project
//! selection and core-developer identification.

mod bots;
mod catalog;
mod cores;
mod events;
mod imports;

pub use bots::{filter_bots, load_denylist, top_committers, ActiveActor, BotReport, BotRules, RemovedActor};
pub use catalog::{select_projects, Catalog, ExclusionCounts, OwnerKind, ProjectRecord, ProjectSet, SelectionRules};
pub use cores::{
    identify_all_core_developers, identify_core_developers, read_cores_csv, write_cores_csv, CoreDevAssignment,
    CoreRule, CoreSet,
};
pub use events::{format_timestamp, load_events, parse_timestamp, EventLog, InteractionEvent, InteractionKind, RejectedLine};
pub use imports::{load_imports, write_imports, ImportSequence};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("projects.csv row {row}: {reason}")]
    Catalog { row: usize, reason: String },
    #[error("cores.csv row {row}: {reason}")]
    Cores { row: usize, reason: String },
    #[error("imports.jsonl line {line}: {reason}")]
    Imports { line: usize, reason: String },
    #[error("project {0}: no commit history")]
    NoCommitHistory(String),
}
