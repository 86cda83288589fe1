//! Graph centrality over the call graph: shortest paths, harmonic
//! centrality, PageRank, distance-discount centrality, betweenness and
//! degrees.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::callgraph::{CallGraph, Direction, GraphError};
use crate::repo::UnitId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CentralityError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("pagerank did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degrees {
    pub in_degree: usize,
    pub out_degree: usize,
    pub total: usize,
}

/// BFS distances from `source`; the source itself and unreachable nodes are absent.
pub fn shortest_paths(
    g: &CallGraph,
    source: &str,
    direction: Direction,
) -> Result<BTreeMap<UnitId, usize>, GraphError> {
    let s = g.index_of(source)?;
    Ok(g.bfs(s, direction)
        .into_iter()
        .enumerate()
        .filter(|&(i, d)| i != s && d.is_some())
        .map(|(i, d)| (g.node(i).clone(), d.unwrap_or_default()))
        .collect())
}

fn harmonic_at(g: &CallGraph, s: usize, direction: Direction, normalized: bool) -> f64 {
    let sum: f64 = g
        .bfs(s, direction)
        .iter()
        .enumerate()
        .filter_map(|(i, d)| match d {
            Some(d) if i != s => Some(1.0 / *d as f64),
            _ => None,
        })
        .fold(0.0, |a, b| a + b);
    if !normalized {
        sum
    } else if g.len() < 2 {
        0.0
    } else {
        sum / (g.len() - 1) as f64
    }
}

/// Sum of reciprocal distances in `direction`, optionally divided by |V| - 1.
pub fn harmonic_centrality(g: &CallGraph, f: &str, direction: Direction, normalized: bool) -> Result<f64, GraphError> {
    Ok(harmonic_at(g, g.index_of(f)?, direction, normalized))
}

fn discount_at(g: &CallGraph, s: usize, alpha: f64) -> f64 {
    g.bfs(s, Direction::Out)
        .iter()
        .enumerate()
        .filter_map(|(i, d)| match d {
            Some(d) if i != s => Some(alpha.powi(*d as i32)),
            _ => None,
        })
        .fold(0.0, |a, b| a + b)
}

/// Sum of `alpha^d` over nodes reachable from `f` along call edges.
pub fn distance_discount(g: &CallGraph, f: &str, alpha: f64) -> Result<f64, CentralityError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CentralityError::InvalidParameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(discount_at(g, g.index_of(f)?, alpha))
}

/// PageRank by power iteration; dangling mass is spread uniformly.
pub fn pagerank_vector(g: &CallGraph, damping: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>, CentralityError> {
    let n = g.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(0.0..=1.0).contains(&damping) {
        return Err(CentralityError::InvalidParameter(format!("damping must be in [0, 1], got {damping}")));
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let dangling: f64 = (0..n).filter(|&v| g.successors(v).is_empty()).map(|v| rank[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let next: Vec<f64> = (0..n)
            .map(|v| {
                let inflow: f64 = g
                    .predecessors(v)
                    .iter()
                    .map(|&u| rank[u] / g.successors(u).len() as f64)
                    .sum();
                base + damping * inflow
            })
            .collect();
        residual = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if residual < tol {
            return Ok(rank);
        }
    }
    Err(CentralityError::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

pub fn pagerank(
    g: &CallGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<BTreeMap<UnitId, f64>, CentralityError> {
    let rank = pagerank_vector(g, damping, tol, max_iter)?;
    Ok(g.nodes().iter().cloned().zip(rank).collect())
}

/// Directed, unnormalized betweenness of every node (Brandes).
pub fn betweenness_all(g: &CallGraph) -> Vec<f64> {
    let n = g.len();
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut stack = Vec::with_capacity(n);
            let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut sigma = vec![0f64; n];
            let mut dist: Vec<i64> = vec![-1; n];
            sigma[s] = 1.0;
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                stack.push(v);
                for &w in g.successors(v) {
                    if dist[w] < 0 {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if dist[w] == dist[v] + 1 {
                        sigma[w] += sigma[v];
                        preds[w].push(v);
                    }
                }
            }
            let mut delta = vec![0f64; n];
            let mut contrib = vec![0f64; n];
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    contrib[w] = delta[w];
                }
            }
            contrib
        })
        .collect();
    let mut total = vec![0f64; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

pub fn betweenness(g: &CallGraph, f: &str) -> Result<f64, GraphError> {
    let i = g.index_of(f)?;
    Ok(betweenness_all(g)[i])
}

pub fn degrees(g: &CallGraph, f: &str) -> Result<Degrees, GraphError> {
    let i = g.index_of(f)?;
    Ok(degrees_at(g, i))
}

fn degrees_at(g: &CallGraph, i: usize) -> Degrees {
    let in_degree = g.predecessors(i).len();
    let out_degree = g.successors(i).len();
    Degrees {
        in_degree,
        out_degree,
        total: in_degree + out_degree,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralityConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: f64,
    pub harmonic_direction: Direction,
    pub harmonic_normalized: bool,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 200,
            alpha: 0.5,
            harmonic_direction: Direction::Out,
            harmonic_normalized: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeCentrality {
    pub degrees: Degrees,
    pub pagerank: f64,
    pub harmonic: f64,
    pub distance_discount: f64,
    pub betweenness: f64,
}

/// Every centrality measure for every node, in node order.
pub fn all_centralities(g: &CallGraph, config: &CentralityConfig) -> Result<Vec<NodeCentrality>, CentralityError> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CentralityError::InvalidParameter(format!(
            "alpha must be in (0, 1), got {}",
            config.alpha
        )));
    }
    let pr = pagerank_vector(g, config.damping, config.tol, config.max_iter)?;
    let bc = betweenness_all(g);
    Ok((0..g.len())
        .into_par_iter()
        .map(|i| NodeCentrality {
            degrees: degrees_at(g, i),
            pagerank: pr[i],
            harmonic: harmonic_at(g, i, config.harmonic_direction, config.harmonic_normalized),
            distance_discount: discount_at(g, i, config.alpha),
            betweenness: bc[i],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> CallGraph {
        CallGraph::from_index_edges(3, &[(0, 1), (1, 2)])
    }

    fn name(i: usize) -> String {
        format!("g.py::n{i:03}")
    }

    #[test]
    fn path_examples() {
        let g = path3();
        let sp = shortest_paths(&g, &name(0), Direction::Out).unwrap();
        assert_eq!(sp.values().copied().collect::<Vec<_>>(), [1, 2]);
        assert!(shortest_paths(&g, &name(0), Direction::In).unwrap().is_empty());
        assert!((harmonic_centrality(&g, &name(0), Direction::Out, true).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(harmonic_centrality(&g, &name(2), Direction::Out, true).unwrap(), 0.0);
        assert!((distance_discount(&g, &name(0), 0.5).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(distance_discount(&g, &name(2), 0.5).unwrap(), 0.0);
        assert_eq!(betweenness(&g, &name(1)).unwrap(), 1.0);
        assert_eq!(
            degrees(&g, &name(0)).unwrap(),
            Degrees { in_degree: 0, out_degree: 1, total: 1 }
        );
    }

    #[test]
    fn singleton_and_star() {
        let g = CallGraph::from_index_edges(1, &[]);
        assert_eq!(harmonic_centrality(&g, &name(0), Direction::Out, true).unwrap(), 0.0);
        let star = CallGraph::from_index_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert!((distance_discount(&star, &name(0), 0.3).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn pagerank_symmetric_cases() {
        let cycle = CallGraph::from_index_edges(2, &[(0, 1), (1, 0)]);
        let pr = pagerank_vector(&cycle, 0.85, 1e-12, 200).unwrap();
        assert!(pr.iter().all(|p| (p - 0.5).abs() < 1e-12));
        let isolated = CallGraph::from_index_edges(4, &[]);
        let pr = pagerank_vector(&isolated, 0.85, 1e-12, 200).unwrap();
        assert!(pr.iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn pagerank_reports_nonconvergence() {
        let g = CallGraph::from_index_edges(3, &[(0, 1), (1, 2)]);
        assert!(matches!(
            pagerank_vector(&g, 0.85, 0.0, 3),
            Err(CentralityError::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn self_loop_degrees() {
        let g = CallGraph::from_index_edges(1, &[(0, 0)]);
        assert_eq!(
            degrees(&g, &name(0)).unwrap(),
            Degrees { in_degree: 1, out_degree: 1, total: 2 }
        );
    }

    #[test]
    fn unknown_node() {
        assert!(matches!(
            betweenness(&path3(), "nope"),
            Err(GraphError::UnknownNode(_))
        ));
    }
}
