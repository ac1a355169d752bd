use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Months, Utc};

use super::GraphError;
use crate::corpus::{CoreSet, EventLog, InteractionKind};

/// Directed project-to-project network for one interaction kind.
///
/// An edge `A -> B` carries the number of distinct core developers of `A` who
/// interacted with `B` during the window before their first commit to `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectGraph {
    pub kind: InteractionKind,
    pub window_months: u32,
    nodes: BTreeSet<String>,
    out: BTreeMap<String, BTreeMap<String, u32>>,
}

impl ProjectGraph {
    pub fn new(kind: InteractionKind, window_months: u32) -> Self {
        Self { kind, window_months, nodes: BTreeSet::new(), out: BTreeMap::new() }
    }

    pub fn add_node(&mut self, id: &str) {
        if !self.nodes.contains(id) {
            self.nodes.insert(id.to_string());
        }
    }

    /// Adds `weight` to `src -> dst`. Self-loops and zero weights are ignored.
    pub fn add_edge_weight(&mut self, src: &str, dst: &str, weight: u32) {
        if src == dst || weight == 0 {
            return;
        }
        self.add_node(src);
        self.add_node(dst);
        *self.out.entry(src.to_string()).or_default().entry(dst.to_string()).or_default() += weight;
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains(id)
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(src, dst, weight)` in ascending `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.out
            .iter()
            .flat_map(|(src, dsts)| dsts.iter().map(move |(dst, w)| (src.as_str(), dst.as_str(), *w)))
    }

    pub fn weight(&self, src: &str, dst: &str) -> Option<u32> {
        self.out.get(src).and_then(|m| m.get(dst)).copied()
    }

    /// Out-neighbours of `id` with weights, ascending by neighbour id.
    pub fn out_edges(&self, id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.out.get(id).into_iter().flat_map(|m| m.iter().map(|(d, w)| (d.as_str(), *w)))
    }

    /// Writes edges as `src,dst,weight,kind`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GraphError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["src", "dst", "weight", "kind"])?;
        for (src, dst, w) in self.edges() {
            writer.write_record([src, dst, &w.to_string(), self.kind.as_str()])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Rebuilds a graph from an edge CSV plus the focal node set (isolates are
    /// not recoverable from edges alone).
    pub fn read_csv<'a, R: Read>(
        source: R,
        kind: InteractionKind,
        window_months: u32,
        focal: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, GraphError> {
        let mut graph = Self::new(kind, window_months);
        for id in focal {
            graph.add_node(id);
        }
        let mut reader = csv::Reader::from_reader(source);
        for (idx, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |reason: String| GraphError::EdgeRow { row: idx + 2, reason };
            if row.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", row.len())));
            }
            let weight: u32 = row[2].parse().map_err(|e| bad(format!("weight: {e}")))?;
            if row[3] != *kind.as_str() {
                return Err(bad(format!("kind {} in a {} graph", &row[3], kind)));
            }
            if weight == 0 || row[0] == row[1] {
                return Err(bad("zero weight or self-loop".into()));
            }
            graph.add_edge_weight(&row[0], &row[1], weight);
        }
        Ok(graph)
    }
}

fn window_start(first_commit: DateTime<Utc>, months: u32) -> DateTime<Utc> {
    first_commit.checked_sub_months(Months::new(months)).unwrap_or(DateTime::<Utc>::MIN_UTC)
}

/// Projects person-to-project events of one kind onto focal projects.
///
/// Each core developer contributes at most 1 to the weight of `A -> B`, however
/// many qualifying events they have on `B`. A developer's window is
/// `[first_commit - window_months, first_commit)` in calendar months. Every key
/// of `cores` becomes a node, so focal projects without qualifying interactions
/// stay as isolates.
pub fn project_network(log: &EventLog, cores: &CoreSet, kind: InteractionKind, window_months: u32) -> ProjectGraph {
    let mut by_actor: HashMap<&str, Vec<(DateTime<Utc>, &str)>> = HashMap::new();
    for e in log.of_kind(kind) {
        by_actor.entry(e.actor_id.as_str()).or_default().push((e.timestamp, e.project_id.as_str()));
    }
    for history in by_actor.values_mut() {
        history.sort_unstable();
    }

    let mut graph = ProjectGraph::new(kind, window_months);
    for (focal, devs) in cores {
        graph.add_node(focal);
        let mut weights: BTreeMap<&str, u32> = BTreeMap::new();
        for dev in devs {
            let Some(history) = by_actor.get(dev.developer_id.as_str()) else { continue };
            let end = dev.first_commit_ts;
            let start = window_start(end, window_months);
            let lo = history.partition_point(|(ts, _)| *ts < start);
            let hi = history.partition_point(|(ts, _)| *ts < end);
            let touched: BTreeSet<&str> =
                history[lo..hi].iter().map(|(_, p)| *p).filter(|p| *p != focal.as_str()).collect();
            for dst in touched {
                *weights.entry(dst).or_default() += 1;
            }
        }
        for (dst, w) in weights {
            graph.add_edge_weight(focal, dst, w);
        }
    }
    graph
}

/// Weighted out-degree: the sum of out-edge weights.
pub fn degree_out(graph: &ProjectGraph, project: &str) -> Result<u64, GraphError> {
    if !graph.contains(project) {
        return Err(GraphError::UnknownNode(project.to_string()));
    }
    Ok(graph.out_edges(project).map(|(_, w)| u64::from(w)).sum())
}
