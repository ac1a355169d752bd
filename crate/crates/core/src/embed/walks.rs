use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EmbedError;
use crate::corpus::ImportSequence;
use crate::netbuild::ProjectGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { walk_length: 20, walks_per_node: 10, seed: 0 }
    }
}

/// Random walks over node indices into `nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSet {
    pub nodes: Vec<String>,
    pub walks: Vec<Vec<u32>>,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl WalkSet {
    pub fn walk_ids(&self, i: usize) -> impl Iterator<Item = &str> {
        self.walks[i].iter().map(|&n| self.nodes[n as usize].as_str())
    }
}

/// Index-based out-adjacency with cumulative integer weights for sampling.
pub(crate) struct SamplingAdjacency {
    pub nodes: Vec<String>,
    /// per node: (neighbour, cumulative weight up to and including it)
    pub next: Vec<Vec<(u32, u64)>>,
}

impl SamplingAdjacency {
    pub fn new(graph: &ProjectGraph) -> Self {
        let nodes: Vec<String> = graph.nodes().map(str::to_string).collect();
        let index: BTreeMap<&str, u32> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();
        let next = nodes
            .iter()
            .map(|n| {
                let mut acc = 0u64;
                graph
                    .out_edges(n)
                    .map(|(dst, w)| {
                        acc += u64::from(w);
                        (index[dst], acc)
                    })
                    .collect()
            })
            .collect();
        Self { nodes, next }
    }

    pub fn step(&self, from: u32, rng: &mut impl Rng) -> Option<u32> {
        let options = &self.next[from as usize];
        let total = options.last()?.1;
        let draw = rng.random_range(0..total);
        let pos = options.partition_point(|&(_, cum)| cum <= draw);
        Some(options[pos].0)
    }
}

/// First-order weighted walks: each step picks an out-neighbour with
/// probability proportional to the edge weight, and a walk stops early at a
/// node without out-edges.
///
/// Walk `r * n + i` starts at node `i` (ascending id order) on repetition `r`
/// and draws from its own ChaCha stream, so the result depends only on the
/// graph and the seed.
pub fn sample_walks(graph: &ProjectGraph, cfg: &WalkConfig) -> Result<WalkSet, EmbedError> {
    if graph.is_empty() {
        return Err(EmbedError::EmptyGraph);
    }
    if cfg.walk_length == 0 || cfg.walks_per_node == 0 {
        return Err(EmbedError::InvalidConfig("walk_length and walks_per_node must be positive".into()));
    }
    let adj = SamplingAdjacency::new(graph);
    let n = adj.nodes.len();
    let mut walks = Vec::with_capacity(n * cfg.walks_per_node);
    for rep in 0..cfg.walks_per_node {
        for start in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((rep * n + start) as u64);
            let mut walk = Vec::with_capacity(cfg.walk_length);
            let mut at = start as u32;
            walk.push(at);
            while walk.len() < cfg.walk_length {
                match adj.step(at, &mut rng) {
                    Some(next) => {
                        walk.push(next);
                        at = next;
                    }
                    None => break,
                }
            }
            walks.push(walk);
        }
    }
    Ok(WalkSet {
        nodes: adj.nodes,
        walks,
        walk_length: cfg.walk_length,
        walks_per_node: cfg.walks_per_node,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Walks,
    Packages,
}

/// Token sequences for skip-gram training over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub kind: CorpusKind,
    pub tokens: Vec<String>,
    pub sequences: Vec<Vec<u32>>,
}

impl Corpus {
    pub fn from_walks(walks: &WalkSet) -> Self {
        Self { kind: CorpusKind::Walks, tokens: walks.nodes.clone(), sequences: walks.walks.clone() }
    }

    pub fn token_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.tokens.len()];
        for seq in &self.sequences {
            for &t in seq {
                counts[t as usize] += 1;
            }
        }
        counts
    }
}

/// One sequence per project with at least one package; vocabulary sorted by id.
pub fn build_package_corpus(imports: &[ImportSequence]) -> Corpus {
    let vocab: BTreeSet<&str> = imports.iter().flat_map(|s| s.packages.iter().map(String::as_str)).collect();
    let index: BTreeMap<&str, u32> = vocab.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
    let sequences = imports
        .iter()
        .filter(|s| !s.packages.is_empty())
        .map(|s| s.packages.iter().map(|p| index[p.as_str()]).collect())
        .collect();
    Corpus { kind: CorpusKind::Packages, tokens: vocab.into_iter().map(str::to_string).collect(), sequences }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::InteractionKind;

    fn chain(n: usize) -> ProjectGraph {
        let mut g = ProjectGraph::new(InteractionKind::Star, 12);
        for i in 0..n - 1 {
            g.add_edge_weight(&format!("n{i:02}"), &format!("n{:02}", i + 1), 1);
        }
        g
    }

    #[test]
    fn chain_walk_is_deterministic_path() {
        let g = chain(25);
        let walks = sample_walks(&g, &WalkConfig { walk_length: 20, walks_per_node: 1, seed: 3 }).unwrap();
        let first: Vec<&str> = walks.walk_ids(0).collect();
        let expected: Vec<String> = (0..20).map(|i| format!("n{i:02}")).collect();
        assert_eq!(first, expected);
        // the sink at the end of the chain yields a single-node walk
        assert_eq!(walks.walks[24].len(), 1);
    }

    #[test]
    fn walks_follow_edges_and_are_seeded() {
        let mut g = ProjectGraph::new(InteractionKind::Commit, 12);
        for (a, b, w) in [("a", "b", 1), ("b", "c", 2), ("c", "a", 1), ("b", "a", 5), ("c", "d", 1)] {
            g.add_edge_weight(a, b, w);
        }
        let cfg = WalkConfig { walk_length: 20, walks_per_node: 7, seed: 11 };
        let ws = sample_walks(&g, &cfg).unwrap();
        assert_eq!(ws.walks.len(), 4 * 7);
        for i in 0..ws.walks.len() {
            let ids: Vec<&str> = ws.walk_ids(i).collect();
            assert!(ids.len() <= 20);
            for pair in ids.windows(2) {
                assert!(g.weight(pair[0], pair[1]).is_some(), "{pair:?} is not an edge");
            }
        }
        assert_eq!(sample_walks(&g, &cfg).unwrap(), ws);
        assert_ne!(sample_walks(&g, &WalkConfig { seed: 12, ..cfg }).unwrap(), ws);
    }

    #[test]
    fn empty_graph_errors() {
        let g = ProjectGraph::new(InteractionKind::Star, 12);
        assert!(matches!(sample_walks(&g, &WalkConfig::default()), Err(EmbedError::EmptyGraph)));
    }

    #[test]
    fn package_corpus() {
        let cutoff = chrono::DateTime::<chrono::Utc>::MAX_UTC;
        let seq = |id: &str, pkgs: &[&str]| ImportSequence {
            project_id: id.into(),
            packages: pkgs.iter().map(|s| s.to_string()).collect(),
            cutoff_ts: cutoff,
        };
        let corpus = build_package_corpus(&[seq("a", &["q", "p"]), seq("b", &[]), seq("c", &["p"])]);
        assert_eq!(corpus.tokens, ["p", "q"]);
        assert_eq!(corpus.sequences, vec![vec![1, 0], vec![0]]);
        assert_eq!(corpus.token_counts(), [2, 1]);
    }
}
