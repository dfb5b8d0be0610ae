//! Cost-based planning: the edge-extension order (phase 1), chordification
//! of cyclic queries, and the greedy defactorization order (phase 2).
//!
//! The cost unit is the *edge walk*: one matching edge retrieved from the
//! data graph. A plan's cost is the sum over steps of the estimated edges
//! scanned at that step, with bound-set sizes tracked per variable and
//! capped by 2-gram key counts between adjacent edges.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::catalog::Catalog;
use crate::engine::AnswerGraph;
use crate::query::{ConjunctiveQuery, QueryShape, VarId};
use crate::store::TripleStore;

/// Estimates recorded for one step of an edge plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEstimate {
    pub edge: usize,
    /// Matching edges expected to be scanned at this step.
    pub est_edges: f64,
    /// Candidate-node estimates for the edge's endpoints after the step.
    pub est_src_cand: f64,
    pub est_dst_cand: f64,
}

/// Phase-1 plan: a connected left-deep order over the query's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePlan {
    pub order: Vec<usize>,
    pub est_cost: f64,
    pub est_cards: Vec<StepEstimate>,
    /// Set when some edge label has no catalog entry; such edges estimate
    /// to zero and sort first.
    pub missing_preds: bool,
}

/// An added variable pair (no predicate) that triangulates a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chord {
    pub u: VarId,
    pub v: VarId,
}

/// One side of a triangle: a query edge or a previously formed chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Edge(usize),
    Chord(usize),
}

/// `sides[k]` connects `vars[k]` and `vars[(k + 1) % 3]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangle {
    pub vars: [VarId; 3],
    pub sides: [Side; 3],
    /// Chord this triangle materializes, if any (the closing side between
    /// `vars[0]` and `vars[2]` when it is not a query edge).
    pub chord: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationPlan {
    pub chords: Vec<Chord>,
    /// Dependency order: a chord used as a side appears in an earlier
    /// triangle than any triangle consuming it.
    pub triangles: Vec<Triangle>,
    pub est_cost: f64,
}

/// Phase-2 join order over the answer graph's edge sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefacPlan {
    pub order: Vec<usize>,
}

pub mod cost {
    //! Cost-model primitives shared by the DP planners and by exhaustive
    //! enumeration checks.

    use super::*;
    use crate::catalog::{BoundSide, JoinType};
    use crate::query::Endpoint;
    use crate::store::PredId;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Role {
        Subj,
        Obj,
    }

    pub fn join_type(r1: Role, r2: Role) -> JoinType {
        match (r1, r2) {
            (Role::Subj, Role::Subj) => JoinType::Ss,
            (Role::Subj, Role::Obj) => JoinType::So,
            (Role::Obj, Role::Subj) => JoinType::Os,
            (Role::Obj, Role::Obj) => JoinType::Oo,
        }
    }

    /// Roles an edge's endpoints play at a variable (two for self-loops).
    pub fn roles_at(q: &ConjunctiveQuery, e: usize, var: VarId) -> Vec<Role> {
        let edge = &q.edges[e];
        let mut out = Vec::new();
        if edge.src.var() == Some(var) {
            out.push(Role::Subj);
        }
        if edge.dst.var() == Some(var) {
            out.push(Role::Obj);
        }
        out
    }

    pub fn pred_of(store: &TripleStore, q: &ConjunctiveQuery, e: usize) -> Option<PredId> {
        store.pred(&q.edges[e].label)
    }

    fn role_distinct(cat: &Catalog, p: Option<PredId>, role: Role) -> f64 {
        match p.and_then(|p| cat.onegram(p)) {
            Some(g) => match role {
                Role::Subj => g.d_subj as f64,
                Role::Obj => g.d_obj as f64,
            },
            None => 0.0,
        }
    }

    /// Candidate-set size estimate for `var` given the set of already
    /// planned edges in `mask`. Order-independent by construction, which is
    /// what makes subset DP exact for this model.
    pub fn cand_estimate(
        q: &ConjunctiveQuery,
        store: &TripleStore,
        cat: &Catalog,
        mask: u64,
        var: VarId,
    ) -> f64 {
        let mut est = f64::INFINITY;
        let members: Vec<usize> = (0..q.edges.len())
            .filter(|e| mask & (1 << e) != 0)
            .collect();
        for &e in &members {
            let p = pred_of(store, q, e);
            for role in roles_at(q, e, var) {
                est = est.min(role_distinct(cat, p, role));
            }
        }
        // Pairwise 2-gram key containment between planned edges at `var`.
        for (a, &e1) in members.iter().enumerate() {
            for &e2 in &members[a + 1..] {
                let (p1, p2) = (pred_of(store, q, e1), pred_of(store, q, e2));
                for r1 in roles_at(q, e1, var) {
                    for r2 in roles_at(q, e2, var) {
                        match (p1, p2) {
                            (Some(p1), Some(p2)) => {
                                est = est.min(cat.key_count(p1, p2, join_type(r1, r2)) as f64);
                            }
                            _ => est = est.min(0.0),
                        }
                    }
                }
            }
        }
        est
    }

    /// Effective bound-set size for the new edge `e` joining at `var`:
    /// the running candidate estimate further capped by the key count
    /// against each planned adjacent edge (smallest wins).
    fn bound_size(
        q: &ConjunctiveQuery,
        store: &TripleStore,
        cat: &Catalog,
        mask: u64,
        var: VarId,
        new_edge: usize,
    ) -> f64 {
        let mut size = cand_estimate(q, store, cat, mask, var);
        let p_new = pred_of(store, q, new_edge);
        for e in (0..q.edges.len()).filter(|e| mask & (1 << e) != 0 && *e != new_edge) {
            let p_old = pred_of(store, q, e);
            for r_old in roles_at(q, e, var) {
                for r_new in roles_at(q, new_edge, var) {
                    match (p_old, p_new) {
                        (Some(po), Some(pn)) => {
                            size = size.min(cat.key_count(po, pn, join_type(r_old, r_new)) as f64);
                        }
                        _ => size = size.min(0.0),
                    }
                }
            }
        }
        size
    }

    /// True when `e` can legally extend the prefix `mask`.
    pub fn connected(q: &ConjunctiveQuery, mask: u64, e: usize) -> bool {
        if mask == 0 {
            return true;
        }
        q.edge_vars(&q.edges[e]).iter().any(|&v| {
            (0..q.edges.len())
                .any(|o| mask & (1 << o) != 0 && q.edge_vars(&q.edges[o]).contains(&v))
        })
    }

    /// Estimated edge walks for extending `e` after the prefix `mask`.
    pub fn step_cost(
        q: &ConjunctiveQuery,
        store: &TripleStore,
        cat: &Catalog,
        mask: u64,
        e: usize,
    ) -> f64 {
        let edge = &q.edges[e];
        let Some(p) = pred_of(store, q, e) else {
            return 0.0;
        };
        let endpoint_bound = |ep: &Endpoint| -> Option<f64> {
            match ep {
                Endpoint::Const(c) => Some(if store.node(c).is_some() { 1.0 } else { 0.0 }),
                Endpoint::Var(v) => {
                    let covered = (0..q.edges.len())
                        .any(|o| mask & (1 << o) != 0 && q.edge_vars(&q.edges[o]).contains(v));
                    covered.then(|| bound_size(q, store, cat, mask, *v, e))
                }
            }
        };
        let bs = endpoint_bound(&edge.src);
        let bo = endpoint_bound(&edge.dst);
        match (bs, bo) {
            (None, None) => cat.estimate_pattern_cardinality(p, BoundSide::None, 0.0),
            (Some(b), None) => cat.estimate_pattern_cardinality(p, BoundSide::Subject, b),
            (None, Some(b)) => cat.estimate_pattern_cardinality(p, BoundSide::Object, b),
            (Some(b1), Some(b2)) => cat.estimate_pattern_cardinality(p, BoundSide::Both, b1 * b2),
        }
    }

    /// Total cost of a full order under the same model (enumeration helper).
    pub fn order_cost(
        q: &ConjunctiveQuery,
        store: &TripleStore,
        cat: &Catalog,
        order: &[usize],
    ) -> f64 {
        let mut mask = 0u64;
        let mut total = 0.0;
        for &e in order {
            total += step_cost(q, store, cat, mask, e);
            mask |= 1 << e;
        }
        total
    }
}

/// Bottom-up subset DP over connected left-deep orders; exact for the cost
/// model because each step cost depends only on (prefix set, next edge).
pub fn plan_edgifier(q: &ConjunctiveQuery, store: &TripleStore, cat: &Catalog) -> EdgePlan {
    let n = q.edges.len();
    assert!(n <= 24, "edge plans limited to 24 query edges");
    let full: u64 = (1 << n) - 1;
    // rem[mask] = cheapest completion cost from the prefix `mask`.
    let mut rem = vec![f64::INFINITY; 1 << n];
    rem[full as usize] = 0.0;
    for mask in (0..full).rev() {
        let mut best = f64::INFINITY;
        for e in 0..n {
            if mask & (1 << e) != 0 || !cost::connected(q, mask, e) {
                continue;
            }
            let c = cost::step_cost(q, store, cat, mask, e) + rem[(mask | (1 << e)) as usize];
            if c < best {
                best = c;
            }
        }
        rem[mask as usize] = best;
    }

    let missing_preds = (0..n).any(|e| {
        cost::pred_of(store, q, e)
            .and_then(|p| cat.onegram(p))
            .is_none()
    });

    // Reconstruct deterministically: minimal total, then the tie-break.
    // The first edge prefers the globally cheapest label count, later steps
    // the lowest edge idx.
    let mut order = Vec::with_capacity(n);
    let mut est_cards = Vec::with_capacity(n);
    let mut mask = 0u64;
    while mask != full {
        let mut pick: Option<(f64, (u64, usize))> = None;
        for e in 0..n {
            if mask & (1 << e) != 0 || !cost::connected(q, mask, e) {
                continue;
            }
            let step = cost::step_cost(q, store, cat, mask, e);
            let total = step + rem[(mask | (1 << e)) as usize];
            let count = cost::pred_of(store, q, e)
                .and_then(|p| cat.onegram(p))
                .map_or(0, |g| g.count);
            let key = if mask == 0 { (count, e) } else { (0, e) };
            let better = match &pick {
                None => true,
                Some((t, k)) => total < *t || (total == *t && key < *k),
            };
            if better {
                pick = Some((total, key));
            }
        }
        let (_, (_, e)) = pick.expect("connected query always has a next edge");
        let step = cost::step_cost(q, store, cat, mask, e);
        let next = mask | (1 << e);
        let cand_of = |ep: &crate::query::Endpoint| match ep {
            crate::query::Endpoint::Const(_) => 1.0,
            crate::query::Endpoint::Var(v) => cost::cand_estimate(q, store, cat, next, *v),
        };
        est_cards.push(StepEstimate {
            edge: e,
            est_edges: step,
            est_src_cand: cand_of(&q.edges[e].src),
            est_dst_cand: cand_of(&q.edges[e].dst),
        });
        order.push(e);
        mask = next;
    }

    EdgePlan {
        order,
        est_cost: rem[0],
        est_cards,
        missing_preds,
    }
}

// ---------------------------------------------------------------------------
// Triangulation

/// Side descriptor used during polygon DP.
#[derive(Debug, Clone, Copy)]
struct SideInfo {
    side: Side,
    est: f64,
    /// For query edges: predicate and whether the edge's src sits at the
    /// lower polygon position. Chords carry no predicate.
    pred: Option<crate::store::PredId>,
    src_at_low: bool,
}

impl SideInfo {
    fn distinct_at(&self, cat: &Catalog, at_low: bool) -> f64 {
        match self.pred.and_then(|p| cat.onegram(p)) {
            Some(g) => {
                if at_low == self.src_at_low {
                    g.d_subj as f64
                } else {
                    g.d_obj as f64
                }
            }
            // Chord or unknown predicate: its size bounds its distincts.
            None => self.est,
        }
    }

    fn role_at(&self, at_low: bool) -> cost::Role {
        if at_low == self.src_at_low {
            cost::Role::Subj
        } else {
            cost::Role::Obj
        }
    }
}

/// Estimated size of joining two triangle sides at their shared polygon
/// vertex: product of per-key fanouts times the key estimate, where the key
/// estimate is capped by the 2-gram key count when both sides are edges.
fn join_estimate(cat: &Catalog, left: &SideInfo, right: &SideInfo) -> f64 {
    // `left` spans (i, k), `right` spans (k, j); they meet at k, which is the
    // high end of `left` and the low end of `right`.
    let dl = left.distinct_at(cat, false);
    let dr = right.distinct_at(cat, true);
    if dl == 0.0 || dr == 0.0 {
        return 0.0;
    }
    let mut keys = dl.min(dr);
    if let (Some(p1), Some(p2)) = (left.pred, right.pred) {
        let jt = cost::join_type(left.role_at(false), right.role_at(true));
        keys = keys.min(cat.key_count(p1, p2, jt) as f64);
    }
    (left.est / dl) * (right.est / dr) * keys
}

struct PolyCtx<'a> {
    q: &'a ConjunctiveQuery,
    store: &'a TripleStore,
    cat: &'a Catalog,
    cycle: &'a [VarId],
    chords: Vec<Chord>,
    triangles: Vec<Triangle>,
}

impl<'a> PolyCtx<'a> {
    /// Query edge connecting two adjacent cycle vars (smallest idx wins when
    /// parallel edges exist).
    fn cycle_edge(&self, u: VarId, v: VarId) -> SideInfo {
        let e = self
            .q
            .edges
            .iter()
            .find(|e| {
                matches!(
                    (e.src.var(), e.dst.var()),
                    (Some(a), Some(b)) if (a == u && b == v) || (a == v && b == u)
                )
            })
            .expect("cycle edge exists in query");
        let p = self.store.pred(&e.label);
        SideInfo {
            side: Side::Edge(e.idx),
            est: p
                .and_then(|p| self.cat.onegram(p))
                .map_or(0.0, |g| g.count as f64),
            pred: p,
            src_at_low: e.src.var() == Some(u),
        }
    }

    /// Chords created inside interval (i, j), for tie-breaking: sorted list
    /// of normalized endpoint pairs.
    fn chord_list(
        &self,
        i: usize,
        j: usize,
        memo: &[Vec<Option<(f64, usize)>>],
    ) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        self.collect_chords(i, j, memo, &mut out);
        out.sort_unstable();
        out
    }

    fn collect_chords(
        &self,
        i: usize,
        j: usize,
        memo: &[Vec<Option<(f64, usize)>>],
        out: &mut Vec<(VarId, VarId)>,
    ) {
        if j <= i + 1 {
            return;
        }
        if j > i + 1 && !(i == 0 && j == self.cycle.len() - 1) {
            let (u, v) = (self.cycle[i], self.cycle[j]);
            out.push((u.min(v), u.max(v)));
        }
        let k = memo[i][j].expect("solved interval").1;
        self.collect_chords(i, k, memo, out);
        self.collect_chords(k, j, memo, out);
    }
}

/// Cost of one explicit triangulation of `cycle`, given as `(i, k, j)`
/// polygon splits in dependency order. Exposed so brute-force enumeration in
/// the test suites prices alternatives with the exact same side estimates
/// the DP uses.
pub fn triangulation_cost_of_splits(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    cat: &Catalog,
    cycle: &[VarId],
    splits: &[(usize, usize, usize)],
) -> f64 {
    let ctx = PolyCtx {
        q,
        store,
        cat,
        cycle,
        chords: Vec::new(),
        triangles: Vec::new(),
    };
    let n = cycle.len();
    let mut sides: BTreeMap<(usize, usize), SideInfo> = BTreeMap::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        sides.insert((lo, hi), ctx.cycle_edge(cycle[lo], cycle[hi]));
    }
    let mut total = 0.0;
    for &(i, k, j) in splits {
        let left = sides[&(i, k)];
        let right = sides[&(k, j)];
        let tri = join_estimate(cat, &left, &right);
        total += tri;
        sides.entry((i, j)).or_insert(SideInfo {
            side: Side::Chord(usize::MAX),
            est: tri,
            pred: None,
            src_at_low: true,
        });
    }
    total
}

/// Triangulates every basis cycle of length > 3 with a DP over polygon
/// triangulations minimizing the summed triangle join estimates.
pub fn plan_triangulation(
    q: &ConjunctiveQuery,
    shape: &QueryShape,
    store: &TripleStore,
    cat: &Catalog,
) -> TriangulationPlan {
    let mut plan = TriangulationPlan {
        chords: Vec::new(),
        triangles: Vec::new(),
        est_cost: 0.0,
    };
    for cycle in &shape.cycles {
        triangulate_cycle(q, store, cat, cycle, &mut plan);
    }
    plan
}

fn triangulate_cycle(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    cat: &Catalog,
    cycle: &[VarId],
    plan: &mut TriangulationPlan,
) {
    let n = cycle.len();
    let mut ctx = PolyCtx {
        q,
        store,
        cat,
        cycle,
        chords: Vec::new(),
        triangles: Vec::new(),
    };
    if n == 3 {
        let s0 = ctx.cycle_edge(cycle[0], cycle[1]);
        let s1 = ctx.cycle_edge(cycle[1], cycle[2]);
        let s2 = ctx.cycle_edge(cycle[2], cycle[0]);
        plan.triangles.push(Triangle {
            vars: [cycle[0], cycle[1], cycle[2]],
            sides: [s0.side, s1.side, s2.side],
            chord: None,
        });
        plan.est_cost += join_estimate(cat, &s0, &s1);
        return;
    }

    type BestSplit = (f64, Vec<(VarId, VarId)>, usize);

    // memo[i][j] = (min cost of triangulating the sub-polygon i..j, split k).
    let mut memo: Vec<Vec<Option<(f64, usize)>>> = vec![vec![None; n]; n];
    for span in 2..n {
        for i in 0..n - span {
            let j = i + span;
            // (cost, created chord set, split position)
            let mut best: Option<BestSplit> = None;
            for k in i + 1..j {
                let (cl, sl) = solved(&memo, &ctx, i, k);
                let (cr, sr) = solved(&memo, &ctx, k, j);
                let tri = join_estimate(cat, &sl, &sr);
                let total = cl + cr + tri;
                // Splits tie on cost surprisingly often; prefer the one
                // whose created chord set is lexicographically smallest.
                let mut chords = ctx.chord_list(i, k, &memo);
                chords.extend(ctx.chord_list(k, j, &memo));
                chords.sort_unstable();
                let better = match &best {
                    None => true,
                    Some((t, c, _)) => total < *t || (total == *t && chords < *c),
                };
                if better {
                    best = Some((total, chords, k));
                }
            }
            let (total, _, k) = best.expect("interval has a split");
            memo[i][j] = Some((total, k));
        }
    }

    // Emit triangles in post-order of the chosen splits.
    let outer_cost = memo[0][n - 1].unwrap().0;
    emit(&mut ctx, &memo, 0, n - 1, true);
    plan.est_cost += outer_cost;
    let chord_base = plan.chords.len();
    plan.chords.extend(ctx.chords.iter().copied());
    for mut t in ctx.triangles {
        for s in t.sides.iter_mut() {
            if let Side::Chord(c) = s {
                *c += chord_base;
            }
        }
        if let Some(c) = t.chord.as_mut() {
            *c += chord_base;
        }
        plan.triangles.push(t);
    }
}

/// Side info for interval (i, j): a cycle edge when adjacent or closing,
/// otherwise the chord with its DP estimate.
fn solved(
    memo: &[Vec<Option<(f64, usize)>>],
    ctx: &PolyCtx<'_>,
    i: usize,
    j: usize,
) -> (f64, SideInfo) {
    let n = ctx.cycle.len();
    if j == i + 1 || (i == 0 && j == n - 1) {
        return (0.0, ctx.cycle_edge(ctx.cycle[i], ctx.cycle[j]));
    }
    let (c, k) = memo[i][j].expect("inner intervals solved before outer");
    let (_, sl) = solved(memo, ctx, i, k);
    let (_, sr) = solved(memo, ctx, k, j);
    let est = join_estimate(ctx.cat, &sl, &sr);
    (
        c,
        SideInfo {
            side: Side::Chord(usize::MAX), // patched during emission
            est,
            pred: None,
            src_at_low: true,
        },
    )
}

/// Walks the DP tree in post-order, assigning chord ids and listing
/// triangles so producers precede consumers.
fn emit(
    ctx: &mut PolyCtx<'_>,
    memo: &[Vec<Option<(f64, usize)>>],
    i: usize,
    j: usize,
    outermost: bool,
) -> Side {
    if j == i + 1 {
        return ctx.cycle_edge(ctx.cycle[i], ctx.cycle[j]).side;
    }
    let k = memo[i][j].expect("solved").1;
    let left = emit(ctx, memo, i, k, false);
    let right = emit(ctx, memo, k, j, false);
    let closing = if outermost {
        // The polygon's own closing edge.
        ctx.cycle_edge(ctx.cycle[i], ctx.cycle[j]).side
    } else {
        let (u, v) = (ctx.cycle[i], ctx.cycle[j]);
        ctx.chords.push(Chord {
            u: u.min(v),
            v: u.max(v),
        });
        Side::Chord(ctx.chords.len() - 1)
    };
    let chord_id = match closing {
        Side::Chord(c) => Some(c),
        Side::Edge(_) => None,
    };
    ctx.triangles.push(Triangle {
        vars: [ctx.cycle[i], ctx.cycle[k], ctx.cycle[j]],
        sides: [left, right, closing],
        chord: chord_id,
    });
    closing
}

/// Greedy phase-2 order: start at the smallest answer-edge set, then keep
/// appending the smallest connected one. Ties break on edge idx.
pub fn plan_defactorization(q: &ConjunctiveQuery, ag: &AnswerGraph) -> DefacPlan {
    let n = q.edges.len();
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    while order.len() < n {
        let mut pick: Option<(usize, usize)> = None; // (size, idx)
        for (e, &used_e) in used.iter().enumerate() {
            if used_e {
                continue;
            }
            let connected = order.is_empty()
                || q.edge_vars(&q.edges[e]).iter().any(|v| {
                    order
                        .iter()
                        .any(|&o: &usize| q.edge_vars(&q.edges[o]).contains(v))
                });
            if !connected {
                continue;
            }
            let key = (ag.edge_len(e), e);
            if pick.is_none_or(|p| key < p) {
                pick = Some(key);
            }
        }
        let (_, e) = pick.expect("connected query");
        used[e] = true;
        order.push(e);
    }
    DefacPlan { order }
}
