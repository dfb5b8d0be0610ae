//! Dictionary-encoded triple store with six permutation indexes.
//!
//! The data graph is a set of `(s, p, o)` triples over two separate id
//! spaces: nodes (subjects and objects) and predicates. Every triple is
//! stored in all six sort orders so that any combination of bound positions
//! in a scan pattern is a prefix of some index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Dense node identifier, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Dense predicate identifier, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredId(pub u32);

/// One directed, labeled edge of the data graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub s: NodeId,
    pub p: PredId,
    pub o: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreError {
    /// A non-comment line did not contain exactly three terms.
    Malformed { line: usize },
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::Malformed { line } => {
                write!(f, "malformed triple on line {line}: expected `s p o [.]`")
            }
        }
    }
}

/// Interning dictionary for one id space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dict {
    terms: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Dict {
    pub fn encode(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.terms.push(term.to_string());
        self.ids.insert(term.to_string(), id);
        id
    }

    pub fn lookup(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub fn decode(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|t| t.as_str())
    }
}

// The six permutations, as position maps from (s, p, o).
const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2], // spo
    [0, 2, 1], // sop
    [1, 0, 2], // pso
    [1, 2, 0], // pos
    [2, 0, 1], // osp
    [2, 1, 0], // ops
];

/// Immutable, fully indexed data graph.
#[derive(Debug, Clone)]
pub struct TripleStore {
    node_dict: Dict,
    pred_dict: Dict,
    triples: BTreeSet<(u32, u32, u32)>,
    indexes: [Vec<[u32; 3]>; 6],
}

/// Incremental construction; `finish` sorts the six indexes.
#[derive(Debug, Clone, Default)]
pub struct TripleStoreBuilder {
    node_dict: Dict,
    pred_dict: Dict,
    triples: BTreeSet<(u32, u32, u32)>,
}

impl TripleStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts one triple, interning all three terms. Duplicates collapse.
    pub fn add(&mut self, s: &str, p: &str, o: &str) {
        let s = self.node_dict.encode(s);
        let p = self.pred_dict.encode(p);
        let o = self.node_dict.encode(o);
        self.triples.insert((s, p, o));
    }

    /// Inserts one triple by already-interned ids (snapshot reload path).
    pub fn add_ids(&mut self, s: u32, p: u32, o: u32) {
        self.triples.insert((s, p, o));
    }

    pub fn intern_node(&mut self, term: &str) -> u32 {
        self.node_dict.encode(term)
    }

    pub fn intern_pred(&mut self, term: &str) -> u32 {
        self.pred_dict.encode(term)
    }

    pub fn finish(self) -> TripleStore {
        let mut indexes: [Vec<[u32; 3]>; 6] = Default::default();
        for (perm, index) in PERMS.iter().zip(indexes.iter_mut()) {
            index.reserve(self.triples.len());
            for &(s, p, o) in &self.triples {
                let t = [s, p, o];
                index.push([t[perm[0]], t[perm[1]], t[perm[2]]]);
            }
            index.sort_unstable();
        }
        TripleStore {
            node_dict: self.node_dict,
            pred_dict: self.pred_dict,
            triples: self.triples,
            indexes,
        }
    }
}

fn clean_token(tok: &str) -> &str {
    tok.trim_start_matches('<').trim_end_matches('>')
}

impl TripleStore {
    /// Parses line-oriented triple text: `s p o [.]` per line, `#` comments,
    /// blank lines ignored, angle brackets stripped.
    pub fn load_ntriples(text: &str) -> Result<TripleStore, StoreError> {
        let mut builder = TripleStoreBuilder::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks: Vec<&str> = line.split_whitespace().collect();
            if toks.last() == Some(&".") {
                toks.pop();
            }
            if toks.len() != 3 {
                return Err(StoreError::Malformed { line: lineno + 1 });
            }
            builder.add(
                clean_token(toks[0]),
                clean_token(toks[1]),
                clean_token(toks[2]),
            );
        }
        Ok(builder.finish())
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_dict.len()
    }

    pub fn pred_count(&self) -> usize {
        self.pred_dict.len()
    }

    pub fn node_dict(&self) -> &Dict {
        &self.node_dict
    }

    pub fn pred_dict(&self) -> &Dict {
        &self.pred_dict
    }

    pub fn node(&self, term: &str) -> Option<NodeId> {
        self.node_dict.lookup(term).map(NodeId)
    }

    pub fn pred(&self, term: &str) -> Option<PredId> {
        self.pred_dict.lookup(term).map(PredId)
    }

    pub fn node_text(&self, id: NodeId) -> &str {
        self.node_dict.decode(id.0)
    }

    pub fn pred_text(&self, id: PredId) -> &str {
        self.pred_dict.decode(id.0)
    }

    /// All triples in (s, p, o) order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().map(|&(s, p, o)| Triple {
            s: NodeId(s),
            p: PredId(p),
            o: NodeId(o),
        })
    }

    /// Index scan: yields exactly the triples matching every bound position.
    ///
    /// Picks the permutation whose bound positions form a prefix, so each
    /// yielded triple is one contiguous index hit (one edge walk).
    pub fn scan(
        &self,
        s: Option<NodeId>,
        p: Option<PredId>,
        o: Option<NodeId>,
    ) -> impl Iterator<Item = Triple> + '_ {
        let (which, prefix) = Self::pick_index(s, p, o);
        let index = &self.indexes[which];
        let lo = index.partition_point(|row| &row[..prefix.len()] < prefix.as_slice());
        let hi = index.partition_point(|row| &row[..prefix.len()] <= prefix.as_slice());
        let perm = PERMS[which];
        index[lo..hi].iter().map(move |row| {
            let mut spo = [0u32; 3];
            for (k, &pos) in perm.iter().enumerate() {
                spo[pos] = row[k];
            }
            Triple {
                s: NodeId(spo[0]),
                p: PredId(spo[1]),
                o: NodeId(spo[2]),
            }
        })
    }

    fn pick_index(s: Option<NodeId>, p: Option<PredId>, o: Option<NodeId>) -> (usize, Vec<u32>) {
        let s = s.map(|n| n.0);
        let p = p.map(|n| n.0);
        let o = o.map(|n| n.0);
        // Index choice by bound-position set; the prefix is the bound values
        // in that index's key order.
        match (s, p, o) {
            (None, None, None) => (0, alloc::vec![]),
            (Some(s), None, None) => (0, alloc::vec![s]),
            (None, Some(p), None) => (2, alloc::vec![p]),
            (None, None, Some(o)) => (4, alloc::vec![o]),
            (Some(s), Some(p), None) => (0, alloc::vec![s, p]),
            (Some(s), None, Some(o)) => (1, alloc::vec![s, o]),
            (None, Some(p), Some(o)) => (3, alloc::vec![p, o]),
            (Some(s), Some(p), Some(o)) => (0, alloc::vec![s, p, o]),
        }
    }

    /// Scans through a specific index permutation (0..6); used to check that
    /// all six indexes agree.
    pub fn scan_via_index(
        &self,
        which: usize,
        s: Option<NodeId>,
        p: Option<PredId>,
        o: Option<NodeId>,
    ) -> Vec<Triple> {
        let perm = PERMS[which];
        self.indexes[which]
            .iter()
            .map(|row| {
                let mut spo = [0u32; 3];
                for (k, &pos) in perm.iter().enumerate() {
                    spo[pos] = row[k];
                }
                Triple {
                    s: NodeId(spo[0]),
                    p: PredId(spo[1]),
                    o: NodeId(spo[2]),
                }
            })
            .filter(|t| {
                s.is_none_or(|s| t.s == s)
                    && p.is_none_or(|p| t.p == p)
                    && o.is_none_or(|o| t.o == o)
            })
            .collect()
    }
}
