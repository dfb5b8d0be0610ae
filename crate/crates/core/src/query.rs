//! Conjunctive queries: parsing, shape analysis, and label templates.
//!
//! A query is a connected pattern of labeled edges over variables (tokens
//! starting with `?`). Constants are allowed at endpoints and act as
//! singleton candidate sets during evaluation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

/// Index into [`ConjunctiveQuery::var_names`], in first-appearance order.
pub type VarId = usize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Endpoint {
    Var(VarId),
    Const(String),
}

impl Endpoint {
    pub fn var(&self) -> Option<VarId> {
        match self {
            Endpoint::Var(v) => Some(*v),
            Endpoint::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryEdge {
    pub src: Endpoint,
    pub label: String,
    pub dst: Endpoint,
    /// Position in parse order; the deterministic tie-breaker everywhere.
    pub idx: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    pub edges: Vec<QueryEdge>,
    pub var_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryError {
    Empty,
    BadLine { line: usize },
    FullyConstantEdge { line: usize },
    DuplicateEdge { line: usize },
    Disconnected,
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryError::Empty => write!(f, "empty query"),
            QueryError::BadLine { line } => {
                write!(f, "bad query line {line}: expected `src label dst`")
            }
            QueryError::FullyConstantEdge { line } => {
                write!(f, "line {line}: edge has no variable endpoint")
            }
            QueryError::DuplicateEdge { line } => write!(f, "line {line}: duplicate query edge"),
            QueryError::Disconnected => write!(f, "query graph is disconnected"),
        }
    }
}

/// Result of cycle analysis on the undirected query graph over variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryShape {
    pub acyclic: bool,
    /// A cycle basis; only cycles of length >= 3 are listed. Parallel edges
    /// between the same variable pair (length-2 cycles) are handled by
    /// direct intersection in the engine and do not appear here.
    pub cycles: Vec<Vec<VarId>>,
}

impl ConjunctiveQuery {
    /// Parses one edge per line: `?x label ?y`, constants as bare tokens.
    pub fn parse(text: &str) -> Result<ConjunctiveQuery, QueryError> {
        let mut var_names: Vec<String> = Vec::new();
        let mut var_ids: BTreeMap<String, VarId> = BTreeMap::new();
        let mut edges: Vec<QueryEdge> = Vec::new();
        let mut seen: BTreeSet<(Endpoint, String, Endpoint)> = BTreeSet::new();
        let intern =
            |tok: &str, var_names: &mut Vec<String>, var_ids: &mut BTreeMap<String, VarId>| {
                if tok.starts_with('?') {
                    let id = *var_ids.entry(tok.to_string()).or_insert_with(|| {
                        var_names.push(tok.to_string());
                        var_names.len() - 1
                    });
                    Endpoint::Var(id)
                } else {
                    Endpoint::Const(tok.to_string())
                }
            };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let n = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(QueryError::BadLine { line: n });
            }
            let src = intern(toks[0], &mut var_names, &mut var_ids);
            let dst = intern(toks[2], &mut var_names, &mut var_ids);
            if src.var().is_none() && dst.var().is_none() {
                return Err(QueryError::FullyConstantEdge { line: n });
            }
            let key = (src.clone(), toks[1].to_string(), dst.clone());
            if !seen.insert(key) {
                return Err(QueryError::DuplicateEdge { line: n });
            }
            edges.push(QueryEdge {
                src,
                label: toks[1].to_string(),
                dst,
                idx: edges.len(),
            });
        }
        if edges.is_empty() {
            return Err(QueryError::Empty);
        }
        let q = ConjunctiveQuery { edges, var_names };
        if !q.is_connected() {
            return Err(QueryError::Disconnected);
        }
        Ok(q)
    }

    /// Inverse of `parse` on the edge list.
    pub fn print(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!(
                "{} {} {}\n",
                self.endpoint_text(&e.src),
                e.label,
                self.endpoint_text(&e.dst)
            ));
        }
        out
    }

    pub fn endpoint_text<'a>(&'a self, ep: &'a Endpoint) -> &'a str {
        match ep {
            Endpoint::Var(v) => &self.var_names[*v],
            Endpoint::Const(c) => c,
        }
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    /// Variables of one edge (0, 1, or 2 entries; self-loops yield 1).
    pub fn edge_vars(&self, e: &QueryEdge) -> Vec<VarId> {
        let mut vs = Vec::new();
        if let Some(v) = e.src.var() {
            vs.push(v);
        }
        if let Some(v) = e.dst.var() {
            if !vs.contains(&v) {
                vs.push(v);
            }
        }
        vs
    }

    /// True when every variable is reachable from the first through shared
    /// variables (constants do not connect edges).
    fn is_connected(&self) -> bool {
        if self.var_names.is_empty() {
            return true;
        }
        let mut adj: Vec<Vec<VarId>> = vec![Vec::new(); self.var_names.len()];
        for e in &self.edges {
            if let (Some(u), Some(v)) = (e.src.var(), e.dst.var()) {
                if u != v {
                    adj[u].push(v);
                    adj[v].push(u);
                }
            }
        }
        let mut seen = vec![false; self.var_names.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Cycle analysis over the undirected query graph.
    pub fn analyze_shape(&self) -> QueryShape {
        let n = self.var_names.len();
        // Spanning forest over var-var edges, first-come order.
        let mut parent: Vec<Option<VarId>> = vec![None; n];
        let mut depth: Vec<usize> = vec![0; n];
        let mut in_tree = vec![false; n];
        let mut tree_adj: BTreeSet<(VarId, VarId)> = BTreeSet::new();
        if n > 0 {
            in_tree[0] = true;
        }
        let mut extra: Vec<(VarId, VarId)> = Vec::new();
        let mut pending: Vec<(VarId, VarId)> = self
            .edges
            .iter()
            .filter_map(|e| match (e.src.var(), e.dst.var()) {
                (Some(u), Some(v)) => Some((u, v)),
                _ => None,
            })
            .collect();
        // Grow the tree to fixpoint, then everything left is a non-tree edge.
        let mut grew = true;
        while grew {
            grew = false;
            pending.retain(|&(u, v)| {
                if u == v {
                    extra.push((u, v));
                    return false;
                }
                match (in_tree[u], in_tree[v]) {
                    (true, false) => {
                        parent[v] = Some(u);
                        depth[v] = depth[u] + 1;
                        in_tree[v] = true;
                        tree_adj.insert((u.min(v), u.max(v)));
                        grew = true;
                        false
                    }
                    (false, true) => {
                        parent[u] = Some(v);
                        depth[u] = depth[v] + 1;
                        in_tree[u] = true;
                        tree_adj.insert((u.min(v), u.max(v)));
                        grew = true;
                        false
                    }
                    (true, true) => {
                        extra.push((u, v));
                        false
                    }
                    (false, false) => true,
                }
            });
        }
        let mut cycles = Vec::new();
        let mut cyclic = false;
        for (u, v) in extra {
            cyclic = true;
            if u == v || tree_adj.contains(&(u.min(v), u.max(v))) {
                // Self-loop or parallel to a tree edge: length < 3, handled
                // by direct intersection, not listed.
                continue;
            }
            cycles.push(normalize_cycle(tree_path(&parent, &depth, u, v)));
        }
        QueryShape {
            acyclic: !cyclic,
            cycles,
        }
    }
}

/// Tree path from u to v inclusive, via lowest common ancestor.
fn tree_path(parent: &[Option<VarId>], depth: &[usize], u: VarId, v: VarId) -> Vec<VarId> {
    let mut up = vec![u];
    let mut vp = vec![v];
    let (mut a, mut b) = (u, v);
    while depth[a] > depth[b] {
        a = parent[a].unwrap();
        up.push(a);
    }
    while depth[b] > depth[a] {
        b = parent[b].unwrap();
        vp.push(b);
    }
    while a != b {
        a = parent[a].unwrap();
        up.push(a);
        b = parent[b].unwrap();
        vp.push(b);
    }
    // up ends at the LCA; vp ends one short of it.
    vp.pop();
    vp.reverse();
    up.extend(vp);
    up
}

/// Rotate to start at the smallest var, heading toward its smaller neighbor.
fn normalize_cycle(mut cycle: Vec<VarId>) -> Vec<VarId> {
    let min_pos = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
        .unwrap();
    cycle.rotate_left(min_pos);
    if cycle.len() > 2 && cycle[1] > cycle[cycle.len() - 1] {
        cycle[1..].reverse();
    }
    cycle
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateError {
    ArityMismatch { expected: usize, got: usize },
    UnknownTemplate(String),
}

impl fmt::Display for TemplateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateError::ArityMismatch { expected, got } => {
                write!(f, "template takes {expected} labels, got {got}")
            }
            TemplateError::UnknownTemplate(name) => write!(f, "unknown template `{name}`"),
        }
    }
}

/// A query topology with label placeholders, one per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    /// (src token, dst token) per edge; labels are filled in at instantiation.
    pub edges: Vec<(&'static str, &'static str)>,
}

impl Template {
    pub fn arity(&self) -> usize {
        self.edges.len()
    }

    pub fn instantiate(&self, labels: &[&str]) -> Result<ConjunctiveQuery, TemplateError> {
        if labels.len() != self.edges.len() {
            return Err(TemplateError::ArityMismatch {
                expected: self.edges.len(),
                got: labels.len(),
            });
        }
        let mut text = String::new();
        for ((src, dst), label) in self.edges.iter().zip(labels) {
            text.push_str(&format!("{src} {label} {dst}\n"));
        }
        Ok(ConjunctiveQuery::parse(&text).expect("template topology is valid"))
    }

    /// Four-edge diamond: two directed paths from ?a to ?d.
    pub fn diamond4() -> Template {
        Template {
            name: "diamond4",
            edges: vec![("?a", "?b"), ("?b", "?d"), ("?a", "?c"), ("?c", "?d")],
        }
    }

    /// Nine-edge snowflake tree: hub ?p, secondary hubs ?m1 and ?m3.
    pub fn snowflake9() -> Template {
        Template {
            name: "snowflake9",
            edges: vec![
                ("?p", "?a"),
                ("?q", "?p"),
                ("?p", "?m1"),
                ("?p", "?b"),
                ("?m1", "?c"),
                ("?q", "?m2"),
                ("?q", "?m3"),
                ("?m3", "?d"),
                ("?m3", "?e"),
            ],
        }
    }

    pub fn by_name(name: &str) -> Result<Template, TemplateError> {
        match name {
            "diamond4" => Ok(Template::diamond4()),
            "snowflake9" => Ok(Template::snowflake9()),
            other => Err(TemplateError::UnknownTemplate(other.to_string())),
        }
    }
}
