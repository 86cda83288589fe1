//! Brute-force graph oracles shared by the oracle tests and the acceptance suite.
#![allow(dead_code)]

use std::path::PathBuf;

use faultline::callgraph::{CallGraph, Direction};
use faultline::metrics::Complexity;
use faultline::repo::ingest_repository;
use faultline::metrics::centrality::{all_centralities, CentralityConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: usize = usize::MAX;

/// Random digraph with n in [2, max_n] and roughly `mean_degree` out-edges per node.
pub fn random_digraph(seed: u64, max_n: usize, mean_degree: f64) -> (usize, Vec<(usize, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_n);
    let p = (mean_degree / n as f64).min(1.0);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

/// All-pairs hop distances; self-distance 0, `INF` when unreachable.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        if a != b {
            d[a][b] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != INF && d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn dedup(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut e = edges.to_vec();
    e.sort_unstable();
    e.dedup();
    e
}

/// Dense Google-matrix power iteration run to a fixed, generous sweep count.
pub fn dense_pagerank(n: usize, edges: &[(usize, usize)], damping: f64) -> Vec<f64> {
    let edges = dedup(edges);
    let mut out = vec![0usize; n];
    for &(a, _) in &edges {
        out[a] += 1;
    }
    // m[j][i] = probability of stepping i -> j
    let mut m = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let link = if out[i] == 0 {
                1.0 / n as f64
            } else if edges.binary_search(&(i, j)).is_ok() {
                1.0 / out[i] as f64
            } else {
                0.0
            };
            m[j][i] = damping * link + (1.0 - damping) / n as f64;
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..2000 {
        x = (0..n).map(|j| (0..n).map(|i| m[j][i] * x[i]).sum()).collect();
    }
    x
}

/// Betweenness by listing every shortest s-t path explicitly.
pub fn enumerated_betweenness(n: usize, edges: &[(usize, usize)], dist: &[Vec<usize>]) -> Vec<f64> {
    let edges = dedup(edges);
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
    }
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            if s == t || dist[s][t] == INF {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for &w in &adj[last] {
                    if dist[s][w] == path.len() && dist[w][t] != INF && dist[s][w] + dist[w][t] == dist[s][t] {
                        let mut next = path.clone();
                        next.push(w);
                        stack.push(next);
                    }
                }
            }
            let total = paths.len() as f64;
            for path in &paths {
                for &v in &path[1..path.len() - 1] {
                    bc[v] += 1.0 / total;
                }
            }
        }
    }
    bc
}

/// Largest absolute deviation between the library and the oracles on one graph.
pub fn max_oracle_error(n: usize, edges: &[(usize, usize)]) -> f64 {
    let g = CallGraph::from_index_edges(n, edges);
    let config = CentralityConfig {
        tol: 1e-13,
        max_iter: 10_000,
        ..CentralityConfig::default()
    };
    let got = all_centralities(&g, &config).expect("centralities");
    let dist = floyd_warshall(n, edges);
    let pr = dense_pagerank(n, edges, config.damping);
    let bc = enumerated_betweenness(n, edges, &dist);
    let uniq = dedup(edges);
    let mut worst = 0.0f64;
    for s in 0..n {
        let reach = (0..n).filter(|&t| t != s && dist[s][t] != INF);
        let harmonic: f64 = reach.clone().map(|t| 1.0 / dist[s][t] as f64).sum::<f64>() / (n - 1) as f64;
        let discount: f64 = reach.map(|t| 0.5f64.powi(dist[s][t] as i32)).sum();
        let indeg = uniq.iter().filter(|e| e.1 == s).count();
        let outdeg = uniq.iter().filter(|e| e.0 == s).count();
        let c = &got[s];
        if c.degrees.in_degree != indeg || c.degrees.out_degree != outdeg || c.degrees.total != indeg + outdeg {
            return f64::INFINITY;
        }
        for (a, b) in [
            (c.harmonic, harmonic),
            (c.distance_discount, discount),
            (c.pagerank, pr[s]),
            (c.betweenness, bc[s]),
        ] {
            worst = worst.max((a - b).abs());
        }
        // in-direction distances against the transposed matrix
        let bfs_in = g.bfs(s, Direction::In);
        for (t, d) in bfs_in.iter().enumerate() {
            let want = if dist[t][s] == INF { None } else { Some(dist[t][s]) };
            if *d != want {
                return f64::INFINITY;
            }
        }
    }
    worst
}

pub fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/inventory_repo")
}

/// Relative path to sha256 for every file under `root`, caches excluded.
pub fn tree_digest(root: &std::path::Path) -> std::collections::BTreeMap<String, String> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| {
            let n = e.file_name().to_string_lossy();
            n != "__pycache__" && n != ".pytest_cache"
        })
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().to_string();
            (rel, faultline::digest::sha256_hex(std::fs::read(e.path()).unwrap()))
        })
        .collect()
}

/// A task over the fixture with the given corruptions, failing set from a
/// real validation run.
pub fn fixture_task(
    repo: &faultline::repo::Repository,
    baseline: &faultline::harness::SuiteReport,
    mode: faultline::taskgen::TaskMode,
    corruptions: Vec<faultline::taskgen::Corruption>,
) -> faultline::taskgen::TaskInstance {
    use faultline::taskgen::{task_id, validate_task, GeneratorInfo, RepoRef, TaskInstance, ValidationConfig};
    let v = validate_task(&repo.root, baseline, &corruptions, &ValidationConfig::default()).expect("validation runs");
    assert!(v.accepted, "fixture task must validate: {:?}", v.reason);
    TaskInstance {
        task_id: task_id(&repo.commit, mode, &corruptions),
        repo_ref: RepoRef {
            source: "fixture".into(),
            commit: repo.commit.clone(),
        },
        mode,
        corruptions,
        failing_tests: v.failing_tests.into_iter().collect(),
        metrics: Default::default(),
        generator: GeneratorInfo {
            version: "test".into(),
            seed: 0,
        },
    }
}

/// `pkg.mod::name` test id to the `pkg/mod.py::name` unit id.
pub fn test_unit(test_id: &str) -> String {
    let (module, name) = test_id.split_once("::").expect("test id");
    format!("{}.py::{name}", module.replace('.', "/"))
}

/// Source of a Python string literal holding `text`.
pub fn py_literal(text: &str) -> String {
    serde_json::to_string(text).expect("string serializes")
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[derive(serde::Deserialize)]
struct GoldenRow {
    unit: String,
    kind: String,
    loc: usize,
    cyclomatic: usize,
    eta1: usize,
    eta2: usize,
    n1: usize,
    n2: usize,
    halstead_difficulty: f64,
    halstead_volume: f64,
    nesting_depth: usize,
}

/// Rows in the hand-counted golden table and every deviation from it.
pub fn complexity_golden_mismatches() -> (usize, Vec<String>) {
    let repo = ingest_repository(&fixtures_dir().join("inventory_repo"), "pytest").unwrap();
    let mut reader = csv::Reader::from_path(fixtures_dir().join("golden/complexity.csv")).unwrap();
    let golden: Vec<GoldenRow> = reader.deserialize().map(Result::unwrap).collect();
    if golden.len() != repo.units.len() {
        return (golden.len(), vec![format!("unit count: {} units, {} golden rows", repo.units.len(), golden.len())]);
    }

    let mut mismatches = Vec::new();
    for row in &golden {
        let Some(unit) = repo.unit(&row.unit) else {
            mismatches.push(format!("missing unit {}", row.unit));
            continue;
        };
        if serde_json::to_value(unit.kind).unwrap() != row.kind.as_str() {
            mismatches.push(format!("{} kind", row.unit));
        }
        let c = Complexity::of_unit(unit).unwrap();
        let h = c.halstead;
        let ints = [
            ("loc", c.loc, row.loc),
            ("cyclomatic", c.cyclomatic, row.cyclomatic),
            ("eta1", h.eta1, row.eta1),
            ("eta2", h.eta2, row.eta2),
            ("n1", h.n1, row.n1),
            ("n2", h.n2, row.n2),
            ("nesting_depth", c.nesting_depth, row.nesting_depth),
        ];
        for (name, got, want) in ints {
            if got != want {
                mismatches.push(format!("{} {name}: got {got}, want {want}", row.unit));
            }
        }
        for (name, got, want) in [
            ("difficulty", h.difficulty(), row.halstead_difficulty),
            ("volume", h.volume(), row.halstead_volume),
        ] {
            if (got - want).abs() > 1e-9 {
                mismatches.push(format!("{} {name}: got {got}, want {want}", row.unit));
            }
        }
    }
    (golden.len(), mismatches)
}
