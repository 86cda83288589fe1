//! Choosing corruption target sets and the hard task subset.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TaskInstance;
use crate::callgraph::{CallGraph, Direction};
use crate::repo::UnitId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSelection {
    pub sets: Vec<Vec<UnitId>>,
    pub requested: usize,
}

impl MultiSelection {
    /// True when fewer qualifying sets exist than were requested.
    pub fn short(&self) -> bool {
        self.sets.len() < self.requested
    }
}

/// True when one id is a class containing the other (a method or nested class).
fn nested(a: &UnitId, b: &UnitId) -> bool {
    a.file() == b.file() && {
        let (qa, qb) = (a.qualname(), b.qualname());
        qb.starts_with(&format!("{qa}.")) || qa.starts_with(&format!("{qb}."))
    }
}

/// Samples up to `count` distinct sets of `k` candidates whose pairwise
/// undirected call-graph distance is at most `max_distance`.
///
/// Sets never pair a class with one of its own members. Sampling is
/// deterministic for a given seed and candidate order.
pub fn select_multifunction_sets(
    g: &CallGraph,
    candidates: &[UnitId],
    k: usize,
    max_distance: usize,
    count: usize,
    seed: u64,
) -> MultiSelection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cand: Vec<usize> = candidates.iter().filter_map(|c| g.index_of(c.as_str()).ok()).collect();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    if k == 0 || cand.len() < k {
        return MultiSelection { sets: out, requested: count };
    }

    let mut balls: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut ball = |v: usize| -> BTreeSet<usize> {
        balls
            .entry(v)
            .or_insert_with(|| {
                let d = g.bfs(v, Direction::Both);
                cand.iter()
                    .copied()
                    .filter(|&w| w != v && d[w].is_some_and(|d| d <= max_distance))
                    .collect()
            })
            .clone()
    };

    let attempts = count.saturating_mul(50).max(200);
    let mut order = cand.clone();
    for _ in 0..attempts {
        if out.len() >= count {
            break;
        }
        order.shuffle(&mut rng);
        let mut set = vec![order[0]];
        let mut pool = ball(order[0]);
        while set.len() < k {
            let options: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|w| !set.iter().any(|s| nested(g.node(*s), g.node(*w))))
                .collect();
            if options.is_empty() {
                break;
            }
            let pick = options[rng.gen_range(0..options.len())];
            set.push(pick);
            let next = ball(pick);
            pool = pool.intersection(&next).copied().filter(|w| !set.contains(w)).collect();
        }
        if set.len() < k {
            continue;
        }
        set.sort_unstable();
        if found.insert(set.clone()) {
            out.push(set.iter().map(|&i| g.node(i).clone()).collect());
        }
    }
    if out.len() < count {
        log::warn!("only {} of {count} requested {k}-target sets qualify", out.len());
    }
    MultiSelection { sets: out, requested: count }
}

/// Tasks whose (maximum over targets) percentiles reach `pct` on both metrics.
pub fn select_hard_set<'a>(
    tasks: &'a [TaskInstance],
    complexity_metric: &str,
    centrality_metric: &str,
    pct: f64,
) -> Vec<&'a TaskInstance> {
    tasks
        .iter()
        .filter(|t| {
            let c = t.max_percentile(complexity_metric).unwrap_or(f64::NEG_INFINITY);
            let z = t.max_percentile(centrality_metric).unwrap_or(f64::NEG_INFINITY);
            c >= pct && z >= pct
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::chain_distance;

    fn ids(g: &CallGraph) -> Vec<UnitId> {
        g.nodes().to_vec()
    }

    #[test]
    fn path_graph_respects_distance() {
        let g = CallGraph::from_index_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let sel = select_multifunction_sets(&g, &ids(&g), 2, 4, 100, 1);
        assert!(!sel.sets.is_empty());
        for set in &sel.sets {
            let d = chain_distance(&g, set[0].as_str(), set[1].as_str()).unwrap().unwrap();
            assert!(d <= 4);
        }
        // 15 pairs minus {n0,n5}
        assert_eq!(sel.sets.len(), 14);
        assert!(sel.short());
    }

    #[test]
    fn short_path_pair_is_valid() {
        let g = CallGraph::from_index_edges(3, &[(0, 1), (1, 2)]);
        let sel = select_multifunction_sets(&g, &ids(&g), 2, 4, 10, 3);
        let pairs: BTreeSet<Vec<String>> = sel
            .sets
            .iter()
            .map(|s| s.iter().map(|u| u.to_string()).collect())
            .collect();
        assert!(pairs.contains(&vec!["g.py::n000".to_string(), "g.py::n002".to_string()]));
    }

    #[test]
    fn deterministic_per_seed() {
        let g = CallGraph::from_index_edges(8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)]);
        let a = select_multifunction_sets(&g, &ids(&g), 3, 4, 5, 9);
        let b = select_multifunction_sets(&g, &ids(&g), 3, 4, 5, 9);
        assert_eq!(a, b);
        assert_eq!(select_multifunction_sets(&g, &ids(&g), 1, 4, 3, 9).sets.len(), 3);
    }

    #[test]
    fn class_and_member_never_paired() {
        let a = UnitId::from("a.py::C");
        let b = UnitId::from("a.py::C.m");
        let g = CallGraph::from_edges([a.clone(), b.clone()], [(b.clone(), a.clone())]);
        let sel = select_multifunction_sets(&g, &[a, b], 2, 4, 5, 0);
        assert!(sel.sets.is_empty());
    }
}
