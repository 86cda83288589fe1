//! Static call graph over repository units.
//!
//! Resolution order for a call `name(...)`: a definition in the caller's
//! own file, then import bindings (following re-exports), then every unit
//! in the repository with that name. Calls through a receiver of unknown
//! type link only when the method name is unique across the repository.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::python::{CallTarget, ImportBinding};
use crate::repo::{Repository, RepoSnapshot, UnitId, UnitKind};

/// Re-export chains longer than this are abandoned.
const MAX_IMPORT_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node: {0}")]
    UnknownNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Along edges, caller to callee.
    Out,
    /// Against edges, callee to caller.
    In,
    /// Ignoring edge direction.
    Both,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    nodes: Vec<UnitId>,
    index: HashMap<UnitId, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    pub unresolved: Vec<(UnitId, String)>,
}

impl CallGraph {
    /// Builds a graph from explicit nodes and edges. Unknown endpoints are
    /// added as nodes; duplicate edges collapse.
    pub fn from_edges<I, E>(nodes: I, edges: E) -> Self
    where
        I: IntoIterator<Item = UnitId>,
        E: IntoIterator<Item = (UnitId, UnitId)>,
    {
        let edges: Vec<(UnitId, UnitId)> = edges.into_iter().collect();
        let mut all: BTreeSet<UnitId> = nodes.into_iter().collect();
        for (a, b) in &edges {
            all.insert(a.clone());
            all.insert(b.clone());
        }
        let nodes: Vec<UnitId> = all.into_iter().collect();
        let index: HashMap<UnitId, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let pairs: BTreeSet<(usize, usize)> = edges.iter().map(|(a, b)| (index[a], index[b])).collect();
        Self::from_index_pairs(nodes, index, pairs)
    }

    fn from_index_pairs(nodes: Vec<UnitId>, index: HashMap<UnitId, usize>, pairs: BTreeSet<(usize, usize)>) -> Self {
        let n = nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (a, b) in pairs {
            succ[a].push(b);
            pred[b].push(a);
        }
        for p in &mut pred {
            p.sort_unstable();
        }
        Self {
            nodes,
            index,
            succ,
            pred,
            unresolved: Vec::new(),
        }
    }

    pub fn from_snapshot(snapshot: &RepoSnapshot) -> Self {
        let mut g = Self::from_edges(snapshot.units.iter().map(|u| u.id.clone()), snapshot.edges.iter().cloned());
        g.unresolved = snapshot.unresolved.clone();
        g
    }

    /// Graph on `0..n` with string node names, for tests and synthetic data.
    pub fn from_index_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let nodes: Vec<UnitId> = (0..n).map(|i| UnitId::from(format!("g.py::n{i:03}").as_str())).collect();
        let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        Self::from_index_pairs(nodes, index, edges.iter().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitId] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &UnitId {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.pred[i]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.succ[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Edges in (caller, callee) order, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (&UnitId, &UnitId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(move |(a, bs)| bs.iter().map(move |&b| (&self.nodes[a], &self.nodes[b])))
    }

    /// Breadth-first hop counts from `source`; `None` marks unreachable nodes.
    pub fn bfs(&self, source: usize, direction: Direction) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0) + 1;
            let mut visit = |w: usize| {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            };
            match direction {
                Direction::Out => self.succ[v].iter().copied().for_each(&mut visit),
                Direction::In => self.pred[v].iter().copied().for_each(&mut visit),
                Direction::Both => self.succ[v]
                    .iter()
                    .chain(self.pred[v].iter())
                    .copied()
                    .for_each(&mut visit),
            }
        }
        dist
    }
}

/// Undirected shortest-path length between two units; `None` when disconnected.
pub fn chain_distance(g: &CallGraph, a: &str, b: &str) -> Result<Option<usize>, GraphError> {
    let i = g.index_of(a)?;
    let j = g.index_of(b)?;
    Ok(g.bfs(i, Direction::Both)[j])
}

#[derive(Default)]
struct NameIndex<'a> {
    module_files: HashMap<String, &'a str>,
    /// (file, top-level name) → units (several when redefined).
    top: HashMap<(&'a str, &'a str), Vec<UnitId>>,
    /// (file, class qualname, method name) → methods.
    methods: HashMap<(&'a str, &'a str, &'a str), Vec<UnitId>>,
    by_name: HashMap<&'a str, Vec<UnitId>>,
    methods_by_name: HashMap<&'a str, Vec<UnitId>>,
    kinds: HashMap<UnitId, UnitKind>,
}

fn base_name(qual: &str) -> &str {
    qual.split('#').next().unwrap_or(qual)
}

impl<'a> NameIndex<'a> {
    fn build(repo: &'a Repository) -> Self {
        let mut ix = NameIndex::default();
        for (file, source) in &repo.sources {
            ix.module_files.insert(source.module.clone(), file.as_str());
            if let Some(stripped) = source.module.strip_prefix("src.") {
                ix.module_files.entry(stripped.to_string()).or_insert(file.as_str());
            }
        }
        for unit in &repo.units {
            let file = unit.id.file();
            let qual = base_name(unit.id.qualname());
            ix.kinds.insert(unit.id.clone(), unit.kind);
            match unit.kind {
                UnitKind::Method => {
                    let (class, name) = qual.rsplit_once('.').unwrap_or(("", qual));
                    ix.methods.entry((file, class, name)).or_default().push(unit.id.clone());
                    ix.methods_by_name.entry(name).or_default().push(unit.id.clone());
                }
                UnitKind::Function | UnitKind::Class if !qual.contains('.') => {
                    ix.top.entry((file, qual)).or_default().push(unit.id.clone());
                    ix.by_name.entry(qual).or_default().push(unit.id.clone());
                }
                UnitKind::Function | UnitKind::Class => {}
            }
        }
        ix
    }

    fn top(&self, file: &str, name: &str) -> Vec<UnitId> {
        self.top.get(&(file, name)).cloned().unwrap_or_default()
    }

    fn method_of(&self, class: &UnitId, name: &str) -> Vec<UnitId> {
        self.methods
            .get(&(class.file(), base_name(class.qualname()), name))
            .cloned()
            .unwrap_or_default()
    }

    fn unique_method(&self, name: &str) -> Vec<UnitId> {
        match self.methods_by_name.get(name) {
            Some(ids) if ids.len() == 1 => ids.clone(),
            _ => Vec::new(),
        }
    }

    fn is_class(&self, id: &UnitId) -> bool {
        self.kinds.get(id) == Some(&UnitKind::Class)
    }

    fn binding_module(&self, binding: &ImportBinding) -> Option<String> {
        match &binding.attr {
            None => Some(binding.module.clone()),
            Some(attr) => {
                let candidate = if binding.module.is_empty() {
                    attr.clone()
                } else {
                    format!("{}.{attr}", binding.module)
                };
                self.module_files.contains_key(&candidate).then_some(candidate)
            }
        }
    }

    /// Units a module exposes under `name`, following its own imports.
    fn resolve_symbol(&self, repo: &Repository, module: &str, name: &str, depth: usize) -> Vec<UnitId> {
        if depth > MAX_IMPORT_DEPTH {
            return Vec::new();
        }
        let Some(file) = self.module_files.get(module) else {
            return Vec::new();
        };
        let local = self.top(file, name);
        if !local.is_empty() {
            return local;
        }
        let Some(source) = repo.sources.get(*file) else {
            return Vec::new();
        };
        source
            .imports
            .iter()
            .filter(|b| b.local == name)
            .flat_map(|b| self.resolve_binding(repo, b, depth + 1))
            .collect()
    }

    fn resolve_binding(&self, repo: &Repository, binding: &ImportBinding, depth: usize) -> Vec<UnitId> {
        match &binding.attr {
            Some(attr) if self.binding_module(binding).is_none() => {
                self.resolve_symbol(repo, &binding.module, attr, depth)
            }
            _ => Vec::new(),
        }
    }

    /// Resolves `rest` relative to module `module`, descending into
    /// submodules and finally a class for `Class.method`.
    fn resolve_in_module(&self, repo: &Repository, module: &str, rest: &[String]) -> Vec<UnitId> {
        for split in (0..rest.len()).rev() {
            let mut name = module.to_string();
            for part in &rest[..split] {
                name.push('.');
                name.push_str(part);
            }
            if !self.module_files.contains_key(&name) {
                continue;
            }
            return match &rest[split..] {
                [f] => self.resolve_symbol(repo, &name, f, 0),
                [class, method] => self
                    .resolve_symbol(repo, &name, class, 0)
                    .iter()
                    .filter(|id| self.is_class(id))
                    .flat_map(|id| self.method_of(id, method))
                    .collect(),
                _ => Vec::new(),
            };
        }
        Vec::new()
    }

    fn resolve(&self, repo: &Repository, caller: &UnitId, class: Option<&str>, target: &CallTarget) -> Vec<UnitId> {
        let file = caller.file();
        let Some(source) = repo.sources.get(file) else {
            return Vec::new();
        };
        let parts = match target {
            CallTarget::Method(name) => return self.unique_method(name),
            CallTarget::Dotted(parts) => parts,
        };
        let binding = |name: &str| source.imports.iter().rev().find(|b| b.local == name);
        match parts.as_slice() {
            [] => Vec::new(),
            [name] => {
                let local = self.top(file, name);
                if !local.is_empty() {
                    return local;
                }
                if let Some(b) = binding(name) {
                    return self.resolve_binding(repo, b, 0);
                }
                self.by_name.get(name.as_str()).cloned().unwrap_or_default()
            }
            [head, method] if (head == "self" || head == "cls") && class.is_some() => {
                let class_id = UnitId::new(file, class.unwrap_or_default());
                let found = self.method_of(&class_id, method);
                if found.is_empty() {
                    self.unique_method(method)
                } else {
                    found
                }
            }
            [head, rest @ ..] => {
                let local_classes: Vec<UnitId> = self.top(file, head).into_iter().filter(|id| self.is_class(id)).collect();
                if !local_classes.is_empty() {
                    return match rest {
                        [method] => local_classes.iter().flat_map(|c| self.method_of(c, method)).collect(),
                        _ => Vec::new(),
                    };
                }
                if let Some(b) = binding(head) {
                    if let Some(module) = self.binding_module(b) {
                        return self.resolve_in_module(repo, &module, rest);
                    }
                    let imported: Vec<UnitId> = self.resolve_binding(repo, b, 0);
                    return match rest {
                        [method] => imported
                            .iter()
                            .filter(|id| self.is_class(id))
                            .flat_map(|c| self.method_of(c, method))
                            .collect(),
                        _ => Vec::new(),
                    };
                }
                self.unique_method(parts.last().map(String::as_str).unwrap_or_default())
            }
        }
    }
}

pub fn build_call_graph(repo: &Repository) -> CallGraph {
    let ix = NameIndex::build(repo);
    let nodes: Vec<UnitId> = repo.units.iter().map(|u| u.id.clone()).collect();
    let index: HashMap<UnitId, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
    let mut pairs = BTreeSet::new();
    let mut unresolved = BTreeSet::new();
    for unit in &repo.units {
        let file = unit.id.file();
        let Some(source) = repo.sources.get(file) else {
            continue;
        };
        let qual = unit.id.qualname();
        let class = source.classes.get(qual).map(String::as_str);
        for target in source.calls.get(qual).into_iter().flatten() {
            let callees = ix.resolve(repo, &unit.id, class, target);
            if callees.is_empty() {
                unresolved.insert((unit.id.clone(), target.display()));
            }
            for callee in callees {
                if let Some(&j) = index.get(&callee) {
                    pairs.insert((index[&unit.id], j));
                }
            }
        }
    }
    let mut graph = CallGraph::from_index_pairs(nodes, index, pairs);
    graph.unresolved = unresolved.into_iter().collect();
    graph
}
