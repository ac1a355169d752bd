//! Projection of developer activity into directed project-to-project
//! networks, and the structural diagnostics reported on them.

mod projection;
mod transitivity;

pub use projection::{degree_out, project_network, ProjectGraph};
pub use transitivity::{summarize, transitivity, triad_census, undirected_view, NetworkSummary, TriadCensus, UndirectedGraph};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("unknown project {0}")]
    UnknownNode(String),
    #[error("transitivity undefined: graph has no triads")]
    TransitivityUndefined,
    #[error("edge csv row {row}: {reason}")]
    EdgeRow { row: usize, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
