mod common;

use std::collections::{BTreeMap, BTreeSet};

use chrono::Months;
use proptest::prelude::*;

use weaktie::corpus::{CoreRule, InteractionKind};
use weaktie::netbuild::{project_network, transitivity, undirected_view, ProjectGraph, UndirectedGraph};
use weaktie::synth::{generate_synthetic_corpus, SynthSpec};

fn small_corpus() -> (weaktie::synth::SynthCorpus, weaktie::pipeline::analysis::Ingested) {
    let spec = SynthSpec { n_projects: 120, n_devs: 240, cluster_count: 3, planted_effect: 0.5, seed: 11 };
    let corpus = generate_synthetic_corpus(&spec).unwrap();
    let ingested = common::ingest_synthetic(&corpus, CoreRule::Pct5Min10);
    (corpus, ingested)
}

/// Scans every event for every core developer, with no indexing.
fn brute_force_weights(
    ingested: &weaktie::pipeline::analysis::Ingested,
    kind: InteractionKind,
    months: u32,
) -> BTreeMap<(String, String), u32> {
    let mut weights = BTreeMap::new();
    for (focal, devs) in &ingested.cores {
        for dev in devs {
            let end = dev.first_commit_ts;
            let start = end.checked_sub_months(Months::new(months)).unwrap();
            let touched: BTreeSet<&str> = ingested
                .events
                .events
                .iter()
                .filter(|e| e.kind == kind && e.actor_id == dev.developer_id && e.project_id != *focal)
                .filter(|e| e.timestamp >= start && e.timestamp < end)
                .map(|e| e.project_id.as_str())
                .collect();
            for dst in touched {
                *weights.entry((focal.clone(), dst.to_string())).or_insert(0) += 1;
            }
        }
    }
    weights
}

fn weights_of(graph: &ProjectGraph) -> BTreeMap<(String, String), u32> {
    graph.edges().map(|(s, d, w)| ((s.to_string(), d.to_string()), w)).collect()
}

#[test]
fn projection_matches_exhaustive_scan() {
    let (_, ingested) = small_corpus();
    for kind in [InteractionKind::Commit, InteractionKind::Issue, InteractionKind::Star] {
        for months in [6, 12, 24] {
            let graph = project_network(&ingested.events, &ingested.cores, kind, months);
            assert_eq!(weights_of(&graph), brute_force_weights(&ingested, kind, months), "{kind} {months}");
            let mut nodes: BTreeSet<&str> = ingested.cores.keys().map(String::as_str).collect();
            nodes.extend(graph.edges().map(|(_, d, _)| d));
            assert!(graph.nodes().eq(nodes.iter().copied()));
        }
    }
}

#[test]
fn longer_windows_only_add_weight() {
    let (_, ingested) = small_corpus();
    for kind in [InteractionKind::Commit, InteractionKind::Issue, InteractionKind::Star] {
        let graphs: Vec<_> = [6, 12, 24].map(|m| project_network(&ingested.events, &ingested.cores, kind, m)).into();
        for pair in graphs.windows(2) {
            let wider = weights_of(&pair[1]);
            for (edge, w) in weights_of(&pair[0]) {
                assert!(wider.get(&edge).is_some_and(|&v| v >= w), "{kind} {edge:?}");
            }
        }
    }
}

#[test]
fn edge_csv_round_trips() {
    let (_, ingested) = small_corpus();
    let graph = project_network(&ingested.events, &ingested.cores, InteractionKind::Issue, 12);
    let mut buf = Vec::new();
    graph.write_csv(&mut buf).unwrap();
    let back =
        ProjectGraph::read_csv(buf.as_slice(), InteractionKind::Issue, 12, ingested.cores.keys().map(String::as_str))
            .unwrap();
    assert_eq!(back, graph);
}

fn graph_from(edges: &[(usize, usize)], label: impl Fn(usize) -> String) -> UndirectedGraph {
    let mut g = UndirectedGraph::new();
    for &(a, b) in edges {
        if a != b {
            g.add_edge(&label(a), &label(b));
        }
    }
    g
}

proptest! {
    #[test]
    fn transitivity_is_a_relabelling_invariant_in_unit_interval(
        edges in prop::collection::vec((0usize..15, 0usize..15), 0..60),
        shift in 1usize..15,
    ) {
        let g = graph_from(&edges, |i| format!("n{i:02}"));
        let relabelled = graph_from(&edges, |i| format!("m{:02}", (i + shift) % 15));
        match (transitivity(&g), transitivity(&relabelled)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() < 1e-15);
            }
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn undirected_view_ignores_direction_and_weight(
        edges in prop::collection::vec((0usize..10, 0usize..10, 1u32..4), 0..40),
    ) {
        let mut forward = ProjectGraph::new(InteractionKind::Star, 6);
        let mut backward = ProjectGraph::new(InteractionKind::Star, 6);
        for &(a, b, w) in edges.iter().filter(|(a, b, _)| a != b) {
            forward.add_edge_weight(&format!("n{a}"), &format!("n{b}"), w);
            backward.add_edge_weight(&format!("n{b}"), &format!("n{a}"), 1);
        }
        let (f, b) = (undirected_view(&forward), undirected_view(&backward));
        let fe: BTreeSet<(String, String)> = f.edges().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        let be: BTreeSet<(String, String)> = b.edges().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        prop_assert_eq!(fe, be);
    }
}
