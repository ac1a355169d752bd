use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{GraphError, ProjectGraph};
use crate::corpus::InteractionKind;

/// Unweighted symmetric closure of a [`ProjectGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UndirectedGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl UndirectedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) {
        if !self.nodes.contains(id) {
            self.nodes.insert(id.to_string());
        }
    }

    /// Inserts `{a, b}`; self-pairs are ignored.
    pub fn add_edge(&mut self, a: &str, b: &str) {
        if a == b {
            return;
        }
        self.add_node(a);
        self.add_node(b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edges.insert((lo.to_string(), hi.to_string()));
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    /// Pairs as `(lo, hi)` with `lo < hi`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, a: &str, b: &str) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.edges.contains(&(lo.to_string(), hi.to_string()))
    }

    /// Nodes touching at least one edge.
    pub fn non_isolated_count(&self) -> usize {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for (a, b) in &self.edges {
            seen.insert(a);
            seen.insert(b);
        }
        seen.len()
    }

    /// Sorted adjacency lists over node indices in id order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let index: BTreeMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (a, b) in &self.edges {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

pub fn undirected_view(graph: &ProjectGraph) -> UndirectedGraph {
    let mut view = UndirectedGraph::new();
    for node in graph.nodes() {
        view.add_node(node);
    }
    for (src, dst, _) in graph.edges() {
        view.add_edge(src, dst);
    }
    view
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TriadCensus {
    pub triangles: u64,
    /// Paths of length two, `sum_v C(deg v, 2)`.
    pub triads: u64,
}

pub fn triad_census(graph: &UndirectedGraph) -> TriadCensus {
    let adj = graph.adjacency();
    let triads = adj.iter().map(|n| (n.len() as u64) * (n.len() as u64).saturating_sub(1) / 2).sum();
    let mut triangles = 0u64;
    for (u, nu) in adj.iter().enumerate() {
        for &v in nu.iter().filter(|&&v| v > u) {
            // count w > v adjacent to both, so each triangle u < v < w is seen once
            let (mut i, mut j) = (0, 0);
            let nv = &adj[v];
            while i < nu.len() && j < nv.len() {
                match nu[i].cmp(&nv[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        if nu[i] > v {
                            triangles += 1;
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    TriadCensus { triangles, triads }
}

/// `3 * triangles / triads`.
pub fn transitivity(graph: &UndirectedGraph) -> Result<f64, GraphError> {
    let census = triad_census(graph);
    if census.triads == 0 {
        return Err(GraphError::TransitivityUndefined);
    }
    Ok(3.0 * census.triangles as f64 / census.triads as f64)
}

/// Report row for one network: non-isolated nodes, undirected edges, transitivity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub kind: InteractionKind,
    pub window_months: u32,
    pub nodes: usize,
    pub edges: usize,
    pub directed_edges: usize,
    pub triangles: u64,
    pub triads: u64,
    pub transitivity: Option<f64>,
}

pub fn summarize(graph: &ProjectGraph) -> NetworkSummary {
    let view = undirected_view(graph);
    let census = triad_census(&view);
    NetworkSummary {
        kind: graph.kind,
        window_months: graph.window_months,
        nodes: view.non_isolated_count(),
        edges: view.edge_count(),
        directed_edges: graph.edge_count(),
        triangles: census.triangles,
        triads: census.triads,
        transitivity: (census.triads > 0).then(|| 3.0 * census.triangles as f64 / census.triads as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(pairs: &[(&str, &str)]) -> UndirectedGraph {
        let mut g = UndirectedGraph::new();
        for (a, b) in pairs {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn symmetric_collapse() {
        let mut d = ProjectGraph::new(InteractionKind::Commit, 12);
        d.add_edge_weight("A", "B", 3);
        d.add_edge_weight("B", "A", 1);
        let u = undirected_view(&d);
        assert_eq!(u.edges().collect::<Vec<_>>(), [("A", "B")]);

        let mut d = ProjectGraph::new(InteractionKind::Commit, 12);
        d.add_edge_weight("B", "A", 1);
        assert!(undirected_view(&d).contains_edge("A", "B"));

        assert_eq!(undirected_view(&ProjectGraph::new(InteractionKind::Star, 12)), UndirectedGraph::new());
    }

    #[test]
    fn small_cases() {
        assert_eq!(transitivity(&graph(&[("a", "b"), ("b", "c"), ("a", "c")])).unwrap(), 1.0);
        assert_eq!(transitivity(&graph(&[("a", "b"), ("b", "c")])).unwrap(), 0.0);
        assert!(matches!(transitivity(&graph(&[("a", "b")])), Err(GraphError::TransitivityUndefined)));
        assert!(matches!(transitivity(&UndirectedGraph::new()), Err(GraphError::TransitivityUndefined)));
    }

    #[test]
    fn complete_graph_and_star() {
        let names: Vec<String> = (0..6).map(|i| format!("n{i}")).collect();
        let mut k6 = UndirectedGraph::new();
        let mut star = UndirectedGraph::new();
        for i in 0..6 {
            for j in (i + 1)..6 {
                k6.add_edge(&names[i], &names[j]);
            }
            if i > 0 {
                star.add_edge(&names[0], &names[i]);
            }
        }
        assert_eq!(triad_census(&k6), TriadCensus { triangles: 20, triads: 60 });
        assert_eq!(transitivity(&k6).unwrap(), 1.0);
        assert_eq!(transitivity(&star).unwrap(), 0.0);
    }

    #[test]
    fn summary_excludes_isolates() {
        let mut d = ProjectGraph::new(InteractionKind::Issue, 6);
        d.add_node("iso");
        d.add_edge_weight("a", "b", 1);
        d.add_edge_weight("b", "a", 1);
        d.add_edge_weight("b", "c", 2);
        let s = summarize(&d);
        assert_eq!((s.nodes, s.edges, s.directed_edges), (3, 2, 3));
        assert_eq!(s.transitivity, Some(0.0));
    }
}
