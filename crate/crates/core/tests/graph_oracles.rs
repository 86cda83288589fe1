mod common;

use common::*;
use faultline::callgraph::{chain_distance, CallGraph, Direction};
use faultline::metrics::centrality::{all_centralities, CentralityConfig};
use proptest::prelude::*;

#[test]
fn centralities_match_brute_force_on_random_digraphs() {
    for seed in 0..100u64 {
        let (n, edges) = random_digraph(seed, 50, 2.5);
        let err = max_oracle_error(n, &edges);
        assert!(err <= 1e-8, "seed {seed}: n={n}, error {err}");
    }
}

#[test]
fn shortest_paths_match_floyd_warshall_n30() {
    let (_, edges) = random_digraph(7, 30, 2.0);
    let n = 30;
    let edges: Vec<_> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
    let g = CallGraph::from_index_edges(n, &edges);
    let fw = floyd_warshall(n, &edges);
    for s in 0..n {
        let d = g.bfs(s, Direction::Out);
        for t in 0..n {
            assert_eq!(d[t], (fw[s][t] != INF).then_some(fw[s][t]));
        }
    }
}

fn name(i: usize) -> String {
    format!("g.py::n{i:03}")
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2..=max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n)))
}

proptest! {
    #[test]
    fn chain_distance_is_a_metric((n, edges) in graph_strategy(10)) {
        let g = CallGraph::from_index_edges(n, &edges);
        let d = |a: usize, b: usize| chain_distance(&g, &name(a), &name(b)).unwrap();
        for a in 0..n {
            prop_assert_eq!(d(a, a), Some(0));
            for b in 0..n {
                prop_assert_eq!(d(a, b), d(b, a));
                for c in 0..n {
                    if let (Some(ab), Some(bc), Some(ac)) = (d(a, b), d(b, c), d(a, c)) {
                        prop_assert!(ac <= ab + bc);
                    }
                }
            }
        }
    }

    #[test]
    fn harmonic_and_discount_monotone_under_edge_addition(
        (n, edges) in graph_strategy(15),
        extra in (0usize..15, 0usize..15),
    ) {
        let config = CentralityConfig { harmonic_normalized: false, ..CentralityConfig::default() };
        let before = all_centralities(&CallGraph::from_index_edges(n, &edges), &config).unwrap();
        let mut more = edges.clone();
        more.push((extra.0 % n, extra.1 % n));
        let after = all_centralities(&CallGraph::from_index_edges(n, &more), &config).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a.harmonic >= b.harmonic - 1e-12);
            prop_assert!(a.distance_discount >= b.distance_discount - 1e-12);
        }
    }

    #[test]
    fn isolated_node_leaves_local_metrics_unchanged((n, edges) in graph_strategy(12)) {
        let config = CentralityConfig::default();
        let before = all_centralities(&CallGraph::from_index_edges(n, &edges), &config).unwrap();
        let after = all_centralities(&CallGraph::from_index_edges(n + 1, &edges), &config).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(a.degrees, b.degrees);
            prop_assert!((a.distance_discount - b.distance_discount).abs() < 1e-12);
            prop_assert!((a.betweenness - b.betweenness).abs() < 1e-12);
            let scaled = b.harmonic * (n - 1) as f64 / n as f64;
            prop_assert!((a.harmonic - scaled).abs() < 1e-12);
        }
    }

    #[test]
    fn pagerank_mass_and_floor((n, edges) in graph_strategy(20)) {
        let config = CentralityConfig::default();
        let c = all_centralities(&CallGraph::from_index_edges(n, &edges), &config).unwrap();
        let total: f64 = c.iter().map(|x| x.pagerank).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for x in &c {
            prop_assert!(x.pagerank >= (1.0 - config.damping) / n as f64 - 1e-12);
        }
    }
}
