//! Two-phase evaluation: answer-graph materialization, then embedding
//! enumeration.
//!
//! Phase 1 walks the planned edge order, populating per-query-edge pair
//! sets from the store under the current candidate sets, with node burnback
//! run to fixpoint after every step. With edge burnback enabled, chords are
//! additionally maintained as triangle-join intersections and triangle
//! consistency is enforced, which culls spurious pairs in cyclic queries.
//!
//! Phase 2 backtracks over the answer graph's pair sets in the
//! defactorization order, producing each embedding exactly once.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::planner::{Chord, DefacPlan, EdgePlan, Side, TriangulationPlan};
use crate::query::{ConjunctiveQuery, Endpoint, VarId};
use crate::store::{NodeId, PredId, TripleStore};

/// Counters accumulated over both phases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    /// Matching edges retrieved from the data graph.
    pub edge_walks: u64,
    pub pairs_added: u64,
    pub burned_nodes: u64,
    pub burned_pairs: u64,
    /// Successful partial-tuple extensions during phase 2.
    pub tuple_extensions: u64,
    /// Partial tuples abandoned with zero extensions during phase 2.
    pub failed_extensions: u64,
    pub embeddings: u64,
}

/// One complete variable binding; indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Embedding {
    pub binding: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOpts {
    /// Off by default; node burnback alone suffices for acyclic queries.
    pub edge_burnback: bool,
}

/// Pair set with adjacency views in both directions.
#[derive(Debug, Clone, Default)]
pub struct PairSet {
    fwd: BTreeMap<u32, BTreeSet<u32>>,
    rev: BTreeMap<u32, BTreeSet<u32>>,
    len: usize,
    materialized: bool,
}

impl PairSet {
    pub fn insert(&mut self, a: u32, b: u32) -> bool {
        if self.fwd.entry(a).or_default().insert(b) {
            self.rev.entry(b).or_default().insert(a);
            self.len += 1;
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, a: u32, b: u32) -> bool {
        let removed = match self.fwd.get_mut(&a) {
            Some(set) => set.remove(&b),
            None => false,
        };
        if removed {
            if self.fwd[&a].is_empty() {
                self.fwd.remove(&a);
            }
            let set = self.rev.get_mut(&b).unwrap();
            set.remove(&a);
            if set.is_empty() {
                self.rev.remove(&b);
            }
            self.len -= 1;
        }
        removed
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.fwd.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.fwd
            .iter()
            .flat_map(|(&a, bs)| bs.iter().map(move |&b| (a, b)))
    }

    pub fn src_nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.fwd.keys().copied()
    }

    pub fn dst_nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.rev.keys().copied()
    }

    pub fn successors(&self, a: u32) -> impl Iterator<Item = u32> + '_ {
        self.fwd.get(&a).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn predecessors(&self, b: u32) -> impl Iterator<Item = u32> + '_ {
        self.rev.get(&b).into_iter().flat_map(|s| s.iter().copied())
    }

    fn retain<F: FnMut(u32, u32) -> bool>(&mut self, mut keep: F) -> usize {
        let doomed: Vec<(u32, u32)> = self.iter().filter(|&(a, b)| !keep(a, b)).collect();
        for (a, b) in &doomed {
            self.remove(*a, *b);
        }
        doomed.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Var(VarId),
    /// Constant endpoint, resolved against the node dictionary (`None` when
    /// the term does not occur in the store).
    Const(Option<u32>),
}

#[derive(Debug, Clone, Copy)]
struct ResolvedEdge {
    src: Slot,
    pred: Option<PredId>,
    dst: Slot,
}

/// Factorized evaluation state: per-edge pair sets, per-variable candidate
/// sets, and (for cyclic queries under edge burnback) chord pair sets.
#[derive(Debug, Clone)]
pub struct AnswerGraph {
    edge_sets: Vec<PairSet>,
    chord_sets: Vec<PairSet>,
    chords: Vec<Chord>,
    /// `None` until the variable is first touched by an extension.
    cand: Vec<Option<BTreeSet<u32>>>,
    processed: Vec<bool>,
    resolved: Vec<ResolvedEdge>,
    /// Pairs of processed edges over the same variable pair (length-2
    /// cycles); `true` when both run in the same direction.
    parallel: Vec<(usize, usize, bool)>,
    pub stats: EngineStats,
}

impl AnswerGraph {
    pub fn new(q: &ConjunctiveQuery, store: &TripleStore, chords: &[Chord]) -> AnswerGraph {
        let resolve = |ep: &Endpoint| match ep {
            Endpoint::Var(v) => Slot::Var(*v),
            Endpoint::Const(c) => Slot::Const(store.node(c).map(|n| n.0)),
        };
        let resolved = q
            .edges
            .iter()
            .map(|e| ResolvedEdge {
                src: resolve(&e.src),
                pred: store.pred(&e.label),
                dst: resolve(&e.dst),
            })
            .collect::<Vec<_>>();
        let mut parallel = Vec::new();
        for i in 0..q.edges.len() {
            for j in i + 1..q.edges.len() {
                if let (Slot::Var(u1), Slot::Var(v1), Slot::Var(u2), Slot::Var(v2)) = (
                    resolved[i].src,
                    resolved[i].dst,
                    resolved[j].src,
                    resolved[j].dst,
                ) {
                    if u1 != v1 && ((u1, v1) == (u2, v2) || (u1, v1) == (v2, u2)) {
                        parallel.push((i, j, u1 == u2));
                    }
                }
            }
        }
        AnswerGraph {
            edge_sets: vec![PairSet::default(); q.edges.len()],
            chord_sets: vec![PairSet::default(); chords.len()],
            chords: chords.to_vec(),
            cand: vec![None; q.var_count()],
            processed: vec![false; q.edges.len()],
            resolved,
            parallel,
            stats: EngineStats::default(),
        }
    }

    pub fn edge_len(&self, e: usize) -> usize {
        self.edge_sets[e].len()
    }

    pub fn edge_pairs(&self, e: usize) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edge_sets[e]
            .iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
    }

    pub fn total_pairs(&self) -> usize {
        self.edge_sets.iter().map(|s| s.len()).sum()
    }

    pub fn chord_len(&self, c: usize) -> usize {
        self.chord_sets[c].len()
    }

    pub fn chord_pairs(&self, c: usize) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.chord_sets[c]
            .iter()
            .map(|(a, b)| (NodeId(a), NodeId(b)))
    }

    pub fn candidate_set(&self, v: VarId) -> Option<&BTreeSet<u32>> {
        self.cand[v].as_ref()
    }

    pub fn is_processed(&self, e: usize) -> bool {
        self.processed[e]
    }

    /// Test hook: drops one pair without rerunning burnback, leaving the
    /// graph deliberately inconsistent.
    pub fn corrupt_drop_pair(&mut self) -> bool {
        for set in self.edge_sets.iter_mut() {
            let first = set.iter().next();
            if let Some((a, b)) = first {
                set.remove(a, b);
                return true;
            }
        }
        false
    }

    /// Bound node set for a slot, if it is constrained at all.
    fn slot_bound(&self, slot: Slot) -> Option<BTreeSet<u32>> {
        match slot {
            Slot::Var(v) => self.cand[v].clone(),
            Slot::Const(Some(n)) => Some(BTreeSet::from([n])),
            Slot::Const(None) => Some(BTreeSet::new()),
        }
    }

    /// One edge-extension step: populate `edge_sets[e]` with the matching
    /// data edges that meet the current candidate sets.
    pub fn extend_edge(&mut self, store: &TripleStore, e: usize) {
        assert!(!self.processed[e], "edge extended twice");
        let ResolvedEdge { src, pred, dst } = self.resolved[e];
        let self_loop = matches!((src, dst), (Slot::Var(a), Slot::Var(b)) if a == b);
        let mut pairs = PairSet::default();
        if let Some(p) = pred {
            let src_bound = self.slot_bound(src);
            let dst_bound = self.slot_bound(dst);
            let mut admit = |t: crate::store::Triple, stats: &mut EngineStats| {
                stats.edge_walks += 1;
                if self_loop && t.s != t.o {
                    return;
                }
                pairs.insert(t.s.0, t.o.0);
            };
            match (&src_bound, &dst_bound) {
                (Some(ss), d) => {
                    for &a in ss {
                        for t in store.scan(Some(NodeId(a)), Some(p), None) {
                            if d.as_ref().is_some_and(|ds| !ds.contains(&t.o.0)) {
                                self.stats.edge_walks += 1;
                                continue;
                            }
                            admit(t, &mut self.stats);
                        }
                    }
                }
                (None, Some(ds)) => {
                    for &b in ds {
                        for t in store.scan(None, Some(p), Some(NodeId(b))) {
                            admit(t, &mut self.stats);
                        }
                    }
                }
                (None, None) => {
                    for t in store.scan(None, Some(p), None) {
                        admit(t, &mut self.stats);
                    }
                }
            }
        }
        self.stats.pairs_added += pairs.len() as u64;
        pairs.materialized = true;
        self.edge_sets[e] = pairs;
        self.processed[e] = true;
        // Initialize or tighten the candidate sets of the edge's variables.
        if let Slot::Var(v) = src {
            let proj: BTreeSet<u32> = self.edge_sets[e].src_nodes().collect();
            self.intersect_cand(v, &proj);
        }
        if let Slot::Var(v) = dst {
            let proj: BTreeSet<u32> = self.edge_sets[e].dst_nodes().collect();
            self.intersect_cand(v, &proj);
        }
    }

    fn intersect_cand(&mut self, v: VarId, with: &BTreeSet<u32>) {
        match &mut self.cand[v] {
            None => self.cand[v] = Some(with.clone()),
            Some(cur) => {
                let before = cur.len();
                cur.retain(|n| with.contains(n));
                self.stats.burned_nodes += (before - cur.len()) as u64;
            }
        }
    }

    /// Cascading removal of unsupported candidate nodes and their pairs,
    /// run to fixpoint over all processed edges (and materialized chords).
    pub fn node_burnback(&mut self, q: &ConjunctiveQuery) {
        loop {
            let mut changed = false;

            // Candidate sets must be supported by every processed edge.
            for e in 0..self.edge_sets.len() {
                if !self.processed[e] {
                    continue;
                }
                if let Slot::Var(v) = self.resolved[e].src {
                    let proj: BTreeSet<u32> = self.edge_sets[e].src_nodes().collect();
                    let before = self.stats.burned_nodes;
                    self.intersect_cand(v, &proj);
                    changed |= self.stats.burned_nodes != before;
                }
                if let Slot::Var(v) = self.resolved[e].dst {
                    let proj: BTreeSet<u32> = self.edge_sets[e].dst_nodes().collect();
                    let before = self.stats.burned_nodes;
                    self.intersect_cand(v, &proj);
                    changed |= self.stats.burned_nodes != before;
                }
            }
            for c in 0..self.chord_sets.len() {
                if !self.chord_sets[c].materialized {
                    continue;
                }
                let Chord { u, v } = self.chords[c];
                let proj_u: BTreeSet<u32> = self.chord_sets[c].src_nodes().collect();
                let proj_v: BTreeSet<u32> = self.chord_sets[c].dst_nodes().collect();
                let before = self.stats.burned_nodes;
                self.intersect_cand(u, &proj_u);
                self.intersect_cand(v, &proj_v);
                changed |= self.stats.burned_nodes != before;
            }

            // Pairs must stay within the candidate sets.
            for e in 0..self.edge_sets.len() {
                if !self.processed[e] {
                    continue;
                }
                let ResolvedEdge { src, dst, .. } = self.resolved[e];
                let src_ok: Option<BTreeSet<u32>> = match src {
                    Slot::Var(v) => self.cand[v].clone(),
                    Slot::Const(_) => None,
                };
                let dst_ok: Option<BTreeSet<u32>> = match dst {
                    Slot::Var(v) => self.cand[v].clone(),
                    Slot::Const(_) => None,
                };
                let removed = self.edge_sets[e].retain(|a, b| {
                    src_ok.as_ref().is_none_or(|s| s.contains(&a))
                        && dst_ok.as_ref().is_none_or(|s| s.contains(&b))
                });
                self.stats.burned_pairs += removed as u64;
                changed |= removed > 0;
            }
            for c in 0..self.chord_sets.len() {
                if !self.chord_sets[c].materialized {
                    continue;
                }
                let Chord { u, v } = self.chords[c];
                let cu = self.cand[u].clone();
                let cv = self.cand[v].clone();
                let removed = self.chord_sets[c].retain(|a, b| {
                    cu.as_ref().is_none_or(|s| s.contains(&a))
                        && cv.as_ref().is_none_or(|s| s.contains(&b))
                });
                self.stats.burned_pairs += removed as u64;
                changed |= removed > 0;
            }

            // Parallel query edges over the same variable pair: direct
            // pairwise intersection (length-2 cycles need no chords).
            for &(e1, e2, same_dir) in &self.parallel {
                if !self.processed[e1] || !self.processed[e2] {
                    continue;
                }
                let (s1, s2) = (&self.edge_sets[e1], &self.edge_sets[e2]);
                let keep1: Vec<(u32, u32)> = s1
                    .iter()
                    .filter(|&(a, b)| {
                        if same_dir {
                            !s2.contains(a, b)
                        } else {
                            !s2.contains(b, a)
                        }
                    })
                    .collect();
                let keep2: Vec<(u32, u32)> = s2
                    .iter()
                    .filter(|&(a, b)| {
                        if same_dir {
                            !s1.contains(a, b)
                        } else {
                            !s1.contains(b, a)
                        }
                    })
                    .collect();
                for (a, b) in keep1 {
                    self.edge_sets[e1].remove(a, b);
                    self.stats.burned_pairs += 1;
                    changed = true;
                }
                for (a, b) in keep2 {
                    self.edge_sets[e2].remove(a, b);
                    self.stats.burned_pairs += 1;
                    changed = true;
                }
            }

            let _ = q;
            if !changed {
                break;
            }
        }
    }

    fn side_materialized(&self, side: Side) -> bool {
        match side {
            Side::Edge(e) => self.processed[e],
            Side::Chord(c) => self.chord_sets[c].materialized,
        }
    }

    /// Endpoint variables of a side, in its stored orientation.
    fn side_vars(&self, q: &ConjunctiveQuery, side: Side) -> (VarId, VarId) {
        match side {
            Side::Edge(e) => {
                let edge = &q.edges[e];
                (edge.src.var().unwrap(), edge.dst.var().unwrap())
            }
            Side::Chord(c) => (self.chords[c].u, self.chords[c].v),
        }
    }

    /// Pairs of a side oriented from `from` to `to`.
    fn side_pairs(
        &self,
        q: &ConjunctiveQuery,
        side: Side,
        from: VarId,
        to: VarId,
    ) -> Vec<(u32, u32)> {
        let (u, _v) = self.side_vars(q, side);
        let set = match side {
            Side::Edge(e) => &self.edge_sets[e],
            Side::Chord(c) => &self.chord_sets[c],
        };
        if u == from {
            set.iter().collect()
        } else {
            debug_assert_eq!(_v, from, "side does not touch {from}..{to}");
            set.iter().map(|(a, b)| (b, a)).collect()
        }
    }

    fn side_contains(&self, q: &ConjunctiveQuery, side: Side, from: VarId, a: u32, b: u32) -> bool {
        let (u, _) = self.side_vars(q, side);
        let set = match side {
            Side::Edge(e) => &self.edge_sets[e],
            Side::Chord(c) => &self.chord_sets[c],
        };
        if u == from {
            set.contains(a, b)
        } else {
            set.contains(b, a)
        }
    }

    fn side_remove(&mut self, side: Side, from_is_stored_src: bool, a: u32, b: u32) -> bool {
        let set = match side {
            Side::Edge(e) => &mut self.edge_sets[e],
            Side::Chord(c) => &mut self.chord_sets[c],
        };
        if from_is_stored_src {
            set.remove(a, b)
        } else {
            set.remove(b, a)
        }
    }

    /// Recomputes one chord as the intersection over its ready triangles of
    /// the join of the opposite two sides; tightens endpoint candidates.
    pub fn maintain_chord(
        &mut self,
        q: &ConjunctiveQuery,
        tplan: &TriangulationPlan,
        c: usize,
    ) -> bool {
        let Chord { u, v } = self.chords[c];
        let mut acc: Option<PairSet> = if self.chord_sets[c].materialized {
            Some(self.chord_sets[c].clone())
        } else {
            None
        };
        let mut any_ready = self.chord_sets[c].materialized;
        for tri in &tplan.triangles {
            let Some(pos) = tri.sides.iter().position(|s| *s == Side::Chord(c)) else {
                continue;
            };
            // The chord spans vars[pos] -> vars[(pos+1)%3]; the other two
            // sides form the path through the remaining vertex.
            let x = tri.vars[pos];
            let y = tri.vars[(pos + 1) % 3];
            let w = tri.vars[(pos + 2) % 3];
            let s1 = tri.sides[(pos + 1) % 3]; // connects y .. w
            let s2 = tri.sides[(pos + 2) % 3]; // connects w .. x
            if !self.side_materialized(s1) || !self.side_materialized(s2) {
                continue;
            }
            any_ready = true;
            let mut join = PairSet::default();
            for (xv, wv) in self.side_pairs(q, s2, x, w) {
                for (wv2, yv) in self.side_pairs(q, s1, w, y) {
                    if wv == wv2 {
                        // Orient onto (chord.u, chord.v).
                        if x == u {
                            join.insert(xv, yv);
                        } else {
                            join.insert(yv, xv);
                        }
                    }
                }
            }
            acc = Some(match acc {
                None => join,
                Some(mut cur) => {
                    cur.retain(|a, b| join.contains(a, b));
                    cur
                }
            });
        }
        if !any_ready {
            return false;
        }
        let mut next = acc.unwrap_or_default();
        next.materialized = true;
        let changed = next.len() != self.chord_sets[c].len() || !self.chord_sets[c].materialized;
        self.chord_sets[c] = next;
        let proj_u: BTreeSet<u32> = self.chord_sets[c].src_nodes().collect();
        let proj_v: BTreeSet<u32> = self.chord_sets[c].dst_nodes().collect();
        self.intersect_cand(u, &proj_u);
        self.intersect_cand(v, &proj_v);
        if changed {
            self.node_burnback(q);
        }
        changed
    }

    /// Triangle-consistency fixpoint: a pair survives only with a witness
    /// completing each triangle it sits in. Spurious edges of cyclic queries
    /// die here.
    pub fn edge_burnback(&mut self, q: &ConjunctiveQuery, tplan: &TriangulationPlan) {
        loop {
            let mut changed = false;
            for tri in &tplan.triangles {
                if tri.sides.iter().any(|&s| !self.side_materialized(s)) {
                    continue;
                }
                for pos in 0..3 {
                    let r = tri.sides[pos];
                    let x = tri.vars[pos];
                    let y = tri.vars[(pos + 1) % 3];
                    let z = tri.vars[(pos + 2) % 3];
                    let s = tri.sides[(pos + 1) % 3]; // y .. z
                    let t = tri.sides[(pos + 2) % 3]; // z .. x
                    let (stored_src, _) = self.side_vars(q, r);
                    let doomed: Vec<(u32, u32)> = self
                        .side_pairs(q, r, x, y)
                        .into_iter()
                        .filter(|&(a, b)| {
                            // Witness z-value reachable from both ends.
                            !self
                                .side_pairs(q, s, y, z)
                                .into_iter()
                                .any(|(b2, c)| b2 == b && self.side_contains(q, t, z, c, a))
                        })
                        .collect();
                    if !doomed.is_empty() {
                        changed = true;
                        for (a, b) in doomed {
                            if self.side_remove(r, stored_src == x, a, b) {
                                self.stats.burned_pairs += 1;
                            }
                        }
                    }
                }
            }
            if changed {
                self.node_burnback(q);
                for c in 0..self.chords.len() {
                    self.maintain_chord(q, tplan, c);
                }
            } else {
                break;
            }
        }
    }
}

/// Phase 1: runs the plan to completion and returns the final answer graph.
///
/// Chord maintenance and triangle consistency only engage when
/// `opts.edge_burnback` is set; without it the triangulation plan is carried
/// for planning purposes only and spurious edges may survive.
pub fn generate_answer_graph(
    q: &ConjunctiveQuery,
    plan: &EdgePlan,
    tplan: Option<&TriangulationPlan>,
    store: &TripleStore,
    opts: EngineOpts,
) -> AnswerGraph {
    let chords: &[Chord] = tplan.map_or(&[], |t| &t.chords);
    let mut ag = AnswerGraph::new(q, store, chords);
    for &e in &plan.order {
        ag.extend_edge(store, e);
        ag.node_burnback(q);
        if opts.edge_burnback {
            if let Some(tplan) = tplan {
                for c in 0..chords.len() {
                    ag.maintain_chord(q, tplan, c);
                }
            }
        }
    }
    ag.node_burnback(q);
    if opts.edge_burnback {
        if let Some(tplan) = tplan {
            for c in 0..chords.len() {
                ag.maintain_chord(q, tplan, c);
            }
            ag.edge_burnback(q, tplan);
        }
    }
    ag
}

/// Phase 2: backtracking join over the answer graph in the plan's order.
pub fn generate_embeddings(
    q: &ConjunctiveQuery,
    ag: &mut AnswerGraph,
    dplan: &DefacPlan,
) -> Vec<Embedding> {
    struct Frame<'a> {
        order: &'a [usize],
        resolved: &'a [ResolvedEdge],
        out: Vec<Embedding>,
    }

    // Outer None = unbound variable; inner None = unmatchable constant.
    fn slot_value(binding: &[Option<u32>], slot: Slot) -> Option<Option<u32>> {
        match slot {
            Slot::Var(v) => binding[v].map(Some),
            Slot::Const(c) => Some(c),
        }
    }

    fn descend(
        f: &mut Frame<'_>,
        ag_sets: &[PairSet],
        stats: &mut EngineStats,
        binding: &mut Vec<Option<u32>>,
        step: usize,
    ) {
        if step == f.order.len() {
            stats.embeddings += 1;
            f.out.push(Embedding {
                binding: binding.iter().map(|b| NodeId(b.unwrap())).collect(),
            });
            return;
        }
        let e = f.order[step];
        let ResolvedEdge { src, dst, .. } = f.resolved[e];
        let set = &ag_sets[e];
        let sv = slot_value(binding, src);
        let dv = slot_value(binding, dst);
        let had_binding = binding.iter().any(|b| b.is_some());
        let mut extensions = 0u64;
        match (sv, dv) {
            (Some(Some(a)), Some(Some(b))) => {
                if set.contains(a, b) {
                    extensions += 1;
                    descend(f, ag_sets, stats, binding, step + 1);
                }
            }
            (Some(Some(a)), None) => {
                let v = match dst {
                    Slot::Var(v) => v,
                    Slot::Const(_) => unreachable!(),
                };
                let succ: Vec<u32> = set.successors(a).collect();
                for b in succ {
                    extensions += 1;
                    binding[v] = Some(b);
                    descend(f, ag_sets, stats, binding, step + 1);
                    binding[v] = None;
                }
            }
            (None, Some(Some(b))) => {
                let v = match src {
                    Slot::Var(v) => v,
                    Slot::Const(_) => unreachable!(),
                };
                let pred: Vec<u32> = set.predecessors(b).collect();
                for a in pred {
                    extensions += 1;
                    binding[v] = Some(a);
                    descend(f, ag_sets, stats, binding, step + 1);
                    binding[v] = None;
                }
            }
            (None, None) => {
                let (su, du) = match (src, dst) {
                    (Slot::Var(a), Slot::Var(b)) => (a, b),
                    _ => unreachable!(),
                };
                let all: Vec<(u32, u32)> = set.iter().collect();
                for (a, b) in all {
                    extensions += 1;
                    binding[su] = Some(a);
                    binding[du] = Some(b);
                    descend(f, ag_sets, stats, binding, step + 1);
                    binding[su] = None;
                    binding[du] = None;
                }
            }
            // A constant absent from the dictionary can never match.
            (Some(None), _) | (_, Some(None)) => {}
        }
        if extensions == 0 {
            // Only a real partial tuple counts as a dead end.
            if had_binding {
                stats.failed_extensions += 1;
            }
        } else {
            stats.tuple_extensions += extensions;
        }
    }

    let AnswerGraph {
        edge_sets,
        resolved,
        stats,
        ..
    } = ag;
    let mut frame = Frame {
        order: &dplan.order,
        resolved,
        out: Vec::new(),
    };
    let mut binding: Vec<Option<u32>> = vec![None; q.var_count()];
    descend(&mut frame, edge_sets, stats, &mut binding, 0);
    frame.out.sort();
    frame.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;
    use crate::planner::{plan_defactorization, plan_edgifier, plan_triangulation};
    use crate::query::Template;
    use crate::testkit::fixtures;

    fn eval(
        q: &ConjunctiveQuery,
        store: &TripleStore,
        edge_burnback: bool,
    ) -> (AnswerGraph, Vec<Embedding>) {
        let cat = Catalog::build(store);
        let plan = plan_edgifier(q, store, &cat);
        let shape = q.analyze_shape();
        let tplan = (!shape.acyclic).then(|| plan_triangulation(q, &shape, store, &cat));
        let mut ag = generate_answer_graph(
            q,
            &plan,
            tplan.as_ref(),
            store,
            EngineOpts { edge_burnback },
        );
        let dplan = plan_defactorization(q, &ag);
        let emb = generate_embeddings(q, &mut ag, &dplan);
        (ag, emb)
    }

    #[test]
    fn chain_extension_steps() {
        let st = fixtures::g_chain();
        let q = fixtures::chain_query();
        let mut ag = AnswerGraph::new(&q, &st, &[]);
        ag.extend_edge(&st, 1); // ?x B ?y
        assert_eq!(ag.edge_len(1), 1);
        assert_eq!(ag.candidate_set(1).unwrap().len(), 1); // ?x = {x1}
        ag.extend_edge(&st, 0); // ?w A ?x
        assert_eq!(ag.edge_len(0), 3);
        ag.extend_edge(&st, 2); // ?y C ?z
        assert_eq!(ag.edge_len(2), 4);
        ag.node_burnback(&q);
        assert_eq!(ag.total_pairs(), 8);
    }

    #[test]
    fn chain_full_pipeline() {
        let st = fixtures::g_chain();
        let q = fixtures::chain_query();
        let (ag, emb) = eval(&q, &st, false);
        assert_eq!(ag.total_pairs(), 8);
        assert_eq!(emb.len(), 12);
        assert_eq!(ag.stats.embeddings, 12);
    }

    #[test]
    fn burnback_makes_order_immaterial() {
        // Extra triple w1 A x2: x2 has no B-continuation, so it burns no
        // matter which extension order runs.
        let mut text = fixtures::G_CHAIN_TEXT.to_string();
        text.push_str("w1 A x2\n");
        let st = TripleStore::load_ntriples(&text).unwrap();
        let q = fixtures::chain_query();
        let mut reference: Option<Vec<Vec<(u32, u32)>>> = None;
        for order in [[1usize, 0, 2], [0, 1, 2], [2, 1, 0], [0, 2, 1]] {
            let mut ag = AnswerGraph::new(&q, &st, &[]);
            let mut processed = Vec::new();
            for e in order {
                // Keep prefixes connected, as real plans always are.
                processed.push(e);
                ag.extend_edge(&st, e);
                ag.node_burnback(&q);
            }
            ag.node_burnback(&q);
            let snapshot: Vec<Vec<(u32, u32)>> =
                (0..3).map(|e| ag.edge_sets[e].iter().collect()).collect();
            match &reference {
                None => reference = Some(snapshot),
                Some(r) => assert_eq!(r, &snapshot),
            }
            assert_eq!(ag.total_pairs(), 8);
        }
    }

    #[test]
    fn empty_edge_cascades_to_empty_ag() {
        let st = fixtures::g_chain();
        let q = ConjunctiveQuery::parse("?w A ?x\n?x Zz ?y").unwrap();
        let mut ag = AnswerGraph::new(&q, &st, &[]);
        ag.extend_edge(&st, 0);
        ag.extend_edge(&st, 1); // unknown predicate: empty
        ag.node_burnback(&q);
        assert_eq!(ag.total_pairs(), 0);
        assert!(ag.candidate_set(0).unwrap().is_empty());
    }

    #[test]
    fn burnback_is_idempotent() {
        let st = fixtures::g_chain();
        let q = fixtures::chain_query();
        let (mut ag, _) = eval(&q, &st, false);
        let stats = ag.stats;
        ag.node_burnback(&q);
        assert_eq!(ag.stats.burned_nodes, stats.burned_nodes);
        assert_eq!(ag.stats.burned_pairs, stats.burned_pairs);
    }

    #[test]
    fn spurious_diamond_survives_node_burnback() {
        let st = fixtures::g_spurious();
        let q = Template::diamond4()
            .instantiate(&["P", "Q", "R", "S"])
            .unwrap();
        let (ag, emb) = eval(&q, &st, false);
        assert_eq!(ag.total_pairs(), 8);
        assert_eq!(emb.len(), 0);
    }

    #[test]
    fn edge_burnback_empties_spurious_diamond() {
        let st = fixtures::g_spurious();
        let q = Template::diamond4()
            .instantiate(&["P", "Q", "R", "S"])
            .unwrap();
        let (ag, emb) = eval(&q, &st, true);
        assert_eq!(ag.total_pairs(), 0);
        assert_eq!(emb.len(), 0);
    }

    #[test]
    fn chord_intersection_on_spurious_fixture() {
        let st = fixtures::g_spurious();
        let cat = Catalog::build(&st);
        let q = Template::diamond4()
            .instantiate(&["P", "Q", "R", "S"])
            .unwrap();
        let shape = q.analyze_shape();
        let tplan = plan_triangulation(&q, &shape, &st, &cat);
        let plan = plan_edgifier(&q, &st, &cat);
        let mut ag = AnswerGraph::new(&q, &st, &tplan.chords);
        for &e in &plan.order {
            ag.extend_edge(&st, e);
        }
        ag.node_burnback(&q);
        // Both triangles ready: their joins are disjoint, so the chord is
        // empty and everything cascades away.
        ag.maintain_chord(&q, &tplan, 0);
        assert_eq!(ag.chord_len(0), 0);
        assert_eq!(ag.total_pairs(), 0);
    }

    #[test]
    fn single_embedding_diamond_is_ideal_under_edge_burnback() {
        let st = TripleStore::load_ntriples("a1 P b1\nb1 Q d1\na1 R c1\nc1 S d1\n").unwrap();
        let q = Template::diamond4()
            .instantiate(&["P", "Q", "R", "S"])
            .unwrap();
        let (ag, emb) = eval(&q, &st, true);
        assert_eq!(emb.len(), 1);
        assert_eq!(ag.total_pairs(), 4);
    }

    #[test]
    fn constants_act_as_singletons() {
        let st = fixtures::g_chain();
        let q = ConjunctiveQuery::parse("?x B ?y\n?y C z1").unwrap();
        let (ag, emb) = eval(&q, &st, false);
        assert_eq!(ag.edge_len(0), 1);
        assert_eq!(ag.edge_len(1), 1);
        assert_eq!(emb.len(), 1);
        let oracle = crate::testkit::oracle_evaluate(&q, &st);
        assert!(emb.iter().all(|e| oracle.contains(&e.binding)));
    }

    #[test]
    fn parallel_edges_intersect() {
        let st = TripleStore::load_ntriples("a P b\na Q b\nc P d\ne Q f\n").unwrap();
        let q = ConjunctiveQuery::parse("?x P ?y\n?x Q ?y").unwrap();
        let (ag, emb) = eval(&q, &st, false);
        assert_eq!(ag.edge_len(0), 1);
        assert_eq!(ag.edge_len(1), 1);
        assert_eq!(emb.len(), 1);
    }

    #[test]
    fn empty_answer_graph_gives_no_embeddings() {
        let st = fixtures::g_chain();
        let q = ConjunctiveQuery::parse("?x B ?y\n?y B ?z").unwrap();
        let (ag, emb) = eval(&q, &st, false);
        assert_eq!(ag.total_pairs(), 0);
        assert!(emb.is_empty());
    }
}
