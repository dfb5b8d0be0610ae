//! Independent oracles, shared fixtures, exhaustive planner checks, the
//! query miner, and seeded random-instance generation.
//!
//! The oracle evaluates queries by naive backtracking straight over the
//! full triple set, with no answer graph, no burnback, and no planning
//! beyond parse order. It deliberately shares no traversal code with the
//! engine's join path.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::Catalog;
use crate::engine::{self, EngineOpts};
use crate::planner::{self, cost};
use crate::query::{ConjunctiveQuery, Endpoint, Template};
use crate::store::{NodeId, TripleStore, TripleStoreBuilder};

pub mod fixtures {
    //! The two hand-built data graphs used throughout the test suites.

    use super::*;

    /// Chain data graph: three A-edges fan in to x1, one B-edge, four
    /// C-edges fan out of y1. 8 triples, 9 nodes, 3 predicates;
    /// 12 embeddings of the chain query over an 8-pair answer graph.
    pub const G_CHAIN_TEXT: &str = "\
w1 A x1 .
w2 A x1 .
w3 A x1 .
x1 B y1 .
y1 C z1 .
y1 C z2 .
y1 C z3 .
y1 C z4 .
";

    /// Arc-consistent everywhere yet embedding-free: the two P/Q and R/S
    /// paths from a-nodes to d-nodes never agree, so all 8 pairs are
    /// spurious for the diamond query.
    pub const G_SPURIOUS_TEXT: &str = "\
a1 P b1
a2 P b2
b1 Q d1
b2 Q d2
a1 R c1
a2 R c2
c1 S d2
c2 S d1
";

    pub fn g_chain() -> TripleStore {
        TripleStore::load_ntriples(G_CHAIN_TEXT).unwrap()
    }

    pub fn g_spurious() -> TripleStore {
        TripleStore::load_ntriples(G_SPURIOUS_TEXT).unwrap()
    }

    pub fn chain_query() -> ConjunctiveQuery {
        ConjunctiveQuery::parse("?w A ?x\n?x B ?y\n?y C ?z").unwrap()
    }

    pub fn diamond_query() -> ConjunctiveQuery {
        ConjunctiveQuery::parse("?a P ?b\n?b Q ?d\n?a R ?c\n?c S ?d").unwrap()
    }
}

/// A binding tuple in [`crate::query::VarId`] order.
pub type Binding = Vec<NodeId>;

/// Exact embedding set by naive nested-loop backtracking over the store.
pub fn oracle_evaluate(q: &ConjunctiveQuery, store: &TripleStore) -> BTreeSet<Binding> {
    let mut out = BTreeSet::new();
    let mut binding: Vec<Option<NodeId>> = vec![None; q.var_count()];
    oracle_descend(q, store, &q.parse_order(), 0, &mut binding, &mut out);
    out
}

/// Same search with a caller-chosen edge order; the `--no-factorize`
/// baseline runs this with the planner's order.
pub fn direct_evaluate(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    order: &[usize],
) -> BTreeSet<Binding> {
    let mut out = BTreeSet::new();
    let mut binding: Vec<Option<NodeId>> = vec![None; q.var_count()];
    oracle_descend(q, store, order, 0, &mut binding, &mut out);
    out
}

impl ConjunctiveQuery {
    fn parse_order(&self) -> Vec<usize> {
        (0..self.edges.len()).collect()
    }
}

fn oracle_descend(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    order: &[usize],
    step: usize,
    binding: &mut Vec<Option<NodeId>>,
    out: &mut BTreeSet<Binding>,
) {
    if step == order.len() {
        out.insert(binding.iter().map(|b| b.unwrap()).collect());
        return;
    }
    let edge = &q.edges[order[step]];
    let want = |ep: &Endpoint, binding: &[Option<NodeId>]| -> Option<Option<NodeId>> {
        match ep {
            Endpoint::Var(v) => binding[*v].map(Some),
            Endpoint::Const(c) => Some(store.node(c)),
        }
    };
    // Plain filter over the whole triple set; no index shortcuts.
    for t in store.triples() {
        if store.pred_text(t.p) != edge.label {
            continue;
        }
        match want(&edge.src, binding) {
            Some(Some(a)) if a == t.s => {}
            None => {}
            _ => continue,
        }
        match want(&edge.dst, binding) {
            Some(Some(b)) if b == t.o => {}
            None => {}
            _ => continue,
        }
        // Self-loop edges need both endpoints equal.
        if edge.src == edge.dst && t.s != t.o {
            continue;
        }
        let mut undo = Vec::new();
        for (ep, val) in [(&edge.src, t.s), (&edge.dst, t.o)] {
            if let Endpoint::Var(v) = ep {
                if binding[*v].is_none() {
                    binding[*v] = Some(val);
                    undo.push(*v);
                }
            }
        }
        oracle_descend(q, store, order, step + 1, binding, out);
        for v in undo {
            binding[v] = None;
        }
    }
}

/// The ideal answer graph by definition: oracle embeddings projected onto
/// each query edge.
pub fn oracle_ideal_ag(
    q: &ConjunctiveQuery,
    store: &TripleStore,
) -> Vec<BTreeSet<(NodeId, NodeId)>> {
    let embeddings = oracle_evaluate(q, store);
    let mut per_edge = vec![BTreeSet::new(); q.edges.len()];
    for emb in &embeddings {
        for (i, edge) in q.edges.iter().enumerate() {
            let val = |ep: &Endpoint| match ep {
                Endpoint::Var(v) => emb[*v],
                Endpoint::Const(c) => store.node(c).unwrap(),
            };
            per_edge[i].insert((val(&edge.src), val(&edge.dst)));
        }
    }
    per_edge
}

/// Exhaustive minimum over all connected left-deep orders, under the same
/// cost model the DP uses.
pub fn exhaustive_min_plan_cost(q: &ConjunctiveQuery, store: &TripleStore, cat: &Catalog) -> f64 {
    // Minimum cost of completing the plan from `mask`, summed suffix-first
    // so the float association order matches the DP's exactly.
    fn completion(q: &ConjunctiveQuery, store: &TripleStore, cat: &Catalog, mask: u64) -> f64 {
        let n = q.edges.len();
        if mask == (1 << n) - 1 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for e in 0..n {
            if mask & (1 << e) != 0 || !cost::connected(q, mask, e) {
                continue;
            }
            let total = cost::step_cost(q, store, cat, mask, e)
                + completion(q, store, cat, mask | (1 << e));
            if total < best {
                best = total;
            }
        }
        best
    }
    completion(q, store, cat, 0)
}

/// All triangulation costs of one cycle, by brute-force enumeration of the
/// split trees the DP searches over (Catalan-many for an n-gon).
pub fn enumerate_triangulation_costs(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    cat: &Catalog,
    cycle: &[crate::query::VarId],
) -> Vec<f64> {
    // Every possible split tree, enumerated recursively.
    fn splits(i: usize, j: usize) -> Vec<Vec<(usize, usize, usize)>> {
        // Lists of (i, k, j) triangles for interval i..j.
        if j == i + 1 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for k in i + 1..j {
            for left in splits(i, k) {
                for right in splits(k, j) {
                    let mut tris = left.clone();
                    tris.extend(right.iter().copied());
                    tris.push((i, k, j));
                    out.push(tris);
                }
            }
        }
        out
    }
    let n = cycle.len();
    splits(0, n - 1)
        .into_iter()
        .map(|tris| planner::triangulation_cost_of_splits(q, store, cat, cycle, &tris))
        .collect()
}

/// One non-empty instantiation found by the miner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedQuery {
    pub template: String,
    pub labels: Vec<String>,
    pub embedding_count: u64,
    pub ag_size: usize,
}

/// Depth-first search over label assignments in catalog-frequency order,
/// pruning assignments with a provably empty adjacent join, verifying
/// survivors by full evaluation.
pub fn mine_queries(
    tmpl: &Template,
    store: &TripleStore,
    cat: &Catalog,
    limit: usize,
) -> Vec<MinedQuery> {
    let mut preds: Vec<&str> = store.pred_dict().terms().collect();
    preds.sort_by_key(|t| {
        let count = store
            .pred(t)
            .and_then(|p| cat.onegram(p))
            .map_or(0, |g| g.count);
        (core::cmp::Reverse(count), store.pred(t).map(|p| p.0))
    });

    // Template edge pairs sharing a variable, with the join type at it.
    let probe = tmpl
        .instantiate(&vec!["_"; tmpl.arity()])
        .expect("template ok");
    let mut adjacent: Vec<(usize, usize, crate::catalog::JoinType)> = Vec::new();
    for i in 0..probe.edges.len() {
        for j in 0..i {
            for v in probe.edge_vars(&probe.edges[i]) {
                if probe.edge_vars(&probe.edges[j]).contains(&v) {
                    for r1 in cost::roles_at(&probe, j, v) {
                        for r2 in cost::roles_at(&probe, i, v) {
                            adjacent.push((j, i, cost::join_type(r1, r2)));
                        }
                    }
                }
            }
        }
    }

    let mut out = Vec::new();
    let mut assignment: Vec<&str> = Vec::new();
    dfs_assign(
        tmpl,
        store,
        cat,
        &preds,
        &adjacent,
        limit,
        &mut assignment,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs_assign<'a>(
    tmpl: &Template,
    store: &TripleStore,
    cat: &Catalog,
    preds: &[&'a str],
    adjacent: &[(usize, usize, crate::catalog::JoinType)],
    limit: usize,
    assignment: &mut Vec<&'a str>,
    out: &mut Vec<MinedQuery>,
) {
    if out.len() >= limit {
        return;
    }
    let slot = assignment.len();
    if slot == tmpl.arity() {
        let labels: Vec<&str> = assignment.clone();
        let q = tmpl.instantiate(&labels).expect("arity matches");
        let plan = planner::plan_edgifier(&q, store, cat);
        let shape = q.analyze_shape();
        let tplan = (!shape.acyclic).then(|| planner::plan_triangulation(&q, &shape, store, cat));
        let mut ag =
            engine::generate_answer_graph(&q, &plan, tplan.as_ref(), store, EngineOpts::default());
        let dplan = planner::plan_defactorization(&q, &ag);
        let embeddings = engine::generate_embeddings(&q, &mut ag, &dplan);
        if !embeddings.is_empty() {
            out.push(MinedQuery {
                template: String::from(tmpl.name),
                labels: labels.iter().map(|l| String::from(*l)).collect(),
                embedding_count: embeddings.len() as u64,
                ag_size: ag.total_pairs(),
            });
        }
        return;
    }
    'candidates: for &p in preds {
        let Some(pid) = store.pred(p) else { continue };
        if cat.onegram(pid).map_or(0, |g| g.count) == 0 {
            continue;
        }
        // Prune on any adjacent pair with a provably empty join.
        for &(j, i, jt) in adjacent {
            if i == slot && j < slot {
                let pj = store.pred(assignment[j]).expect("assigned label exists");
                if cat.key_count(pj, pid, jt) == 0 {
                    continue 'candidates;
                }
            }
        }
        assignment.push(p);
        dfs_assign(tmpl, store, cat, preds, adjacent, limit, assignment, out);
        assignment.pop();
        if out.len() >= limit {
            return;
        }
    }
}

/// Exhaustive-assignment check used to show pruning is lossless: the set of
/// non-empty assignments with pruning equals the set without.
pub fn mine_queries_unpruned(
    tmpl: &Template,
    store: &TripleStore,
    limit: usize,
) -> Vec<Vec<String>> {
    let preds: Vec<&str> = store.pred_dict().terms().collect();
    let mut out = Vec::new();
    let arity = tmpl.arity();
    let mut idxs = vec![0usize; arity];
    loop {
        let labels: Vec<&str> = idxs.iter().map(|&i| preds[i]).collect();
        let q = tmpl.instantiate(&labels).expect("arity matches");
        if !oracle_evaluate(&q, store).is_empty() {
            out.push(labels.iter().map(|l| String::from(*l)).collect());
            if out.len() >= limit {
                break;
            }
        }
        // Odometer increment.
        let mut pos = arity;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idxs[pos] += 1;
            if idxs[pos] < preds.len() {
                break;
            }
            idxs[pos] = 0;
        }
    }
    out
}

/// Generator parameters for reproducible random instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenParams {
    pub nodes: u32,
    pub preds: u32,
    pub triples: u32,
    pub query_edges: u32,
    pub shape: GenShape,
    /// Fan-in/out skew: node draws take the minimum of this many uniform
    /// picks, biasing toward low ids. 1 = uniform.
    pub skew: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenShape {
    Acyclic,
    Triangle,
    Diamond,
    FiveCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenError {
    Infeasible(String),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::Infeasible(why) => write!(f, "infeasible generator parameters: {why}"),
        }
    }
}

/// Seeded, reproducible store + query generation.
pub fn random_instance(
    seed: u64,
    params: &GenParams,
) -> Result<(TripleStore, ConjunctiveQuery), GenError> {
    use alloc::format;
    if params.nodes == 0 || params.preds == 0 {
        return Err(GenError::Infeasible(String::from(
            "need nodes and predicates",
        )));
    }
    let capacity = params.nodes as u64 * params.nodes as u64 * params.preds as u64;
    if params.triples as u64 > capacity {
        return Err(GenError::Infeasible(String::from(
            "more triples than distinct slots",
        )));
    }
    if params.skew == 0 {
        return Err(GenError::Infeasible(String::from("skew must be >= 1")));
    }
    let edges = params.query_edges;
    match params.shape {
        GenShape::Acyclic if edges == 0 => {
            return Err(GenError::Infeasible(String::from("query needs edges")))
        }
        GenShape::Triangle if edges != 3 => {
            return Err(GenError::Infeasible(String::from("triangle takes 3 edges")))
        }
        GenShape::Diamond if edges != 4 => {
            return Err(GenError::Infeasible(String::from("diamond takes 4 edges")))
        }
        GenShape::FiveCycle if edges != 5 => {
            return Err(GenError::Infeasible(String::from(
                "five-cycle takes 5 edges",
            )))
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = TripleStoreBuilder::new();
    // Pre-intern every predicate so query labels always resolve.
    for p in 0..params.preds {
        builder.intern_pred(&format!("p{p}"));
    }
    let skewed = |rng: &mut ChaCha8Rng| {
        (0..params.skew)
            .map(|_| rng.gen_range(0..params.nodes))
            .min()
            .unwrap()
    };
    let mut have = BTreeSet::new();
    let mut attempts = 0u64;
    while (have.len() as u32) < params.triples {
        attempts += 1;
        if attempts > 200 * params.triples as u64 + 10_000 {
            return Err(GenError::Infeasible(String::from("sampling stalled")));
        }
        let s = skewed(&mut rng);
        let p = rng.gen_range(0..params.preds);
        let o = skewed(&mut rng);
        if have.insert((s, p, o)) {
            builder.add(&format!("n{s}"), &format!("p{p}"), &format!("n{o}"));
        }
    }
    let store = builder.finish();

    let label = |rng: &mut ChaCha8Rng| format!("p{}", rng.gen_range(0..params.preds));
    let mut text = String::new();
    match params.shape {
        GenShape::Acyclic => {
            // Random tree over edges+1 variables, random edge directions.
            let mut lines = BTreeSet::new();
            let mut tries = 0;
            while lines.len() < edges as usize {
                tries += 1;
                if tries > 10_000 {
                    return Err(GenError::Infeasible(String::from(
                        "could not build a duplicate-free tree query",
                    )));
                }
                let next = lines.len() + 1;
                let anchor = rng.gen_range(0..next);
                let l = label(&mut rng);
                let line = if rng.gen_bool(0.5) {
                    (next, l, anchor)
                } else {
                    (anchor, l, next)
                };
                lines.insert(line);
            }
            for (a, l, b) in lines {
                use core::fmt::Write as _;
                let _ = writeln!(text, "?v{a} {l} ?v{b}");
            }
        }
        GenShape::Triangle => {
            use core::fmt::Write as _;
            let _ = writeln!(text, "?v0 {} ?v1", label(&mut rng));
            let _ = writeln!(text, "?v1 {} ?v2", label(&mut rng));
            let _ = writeln!(text, "?v0 {} ?v2", label(&mut rng));
        }
        GenShape::Diamond => {
            use core::fmt::Write as _;
            let _ = writeln!(text, "?v0 {} ?v1", label(&mut rng));
            let _ = writeln!(text, "?v1 {} ?v3", label(&mut rng));
            let _ = writeln!(text, "?v0 {} ?v2", label(&mut rng));
            let _ = writeln!(text, "?v2 {} ?v3", label(&mut rng));
        }
        GenShape::FiveCycle => {
            use core::fmt::Write as _;
            let _ = writeln!(text, "?v0 {} ?v1", label(&mut rng));
            let _ = writeln!(text, "?v1 {} ?v2", label(&mut rng));
            let _ = writeln!(text, "?v2 {} ?v3", label(&mut rng));
            let _ = writeln!(text, "?v3 {} ?v4", label(&mut rng));
            let _ = writeln!(text, "?v0 {} ?v4", label(&mut rng));
        }
    }
    let q = match ConjunctiveQuery::parse(&text) {
        Ok(q) => q,
        Err(_) => {
            // Duplicate labels can collide on cyclic templates; retry with
            // the follow-on seed. Bounded because labels eventually differ.
            return random_instance(seed.wrapping_add(0x9e3779b97f4a7c15), params);
        }
    };
    Ok((store, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Template;

    #[test]
    fn oracle_chain_counts() {
        let st = fixtures::g_chain();
        let q = fixtures::chain_query();
        assert_eq!(oracle_evaluate(&q, &st).len(), 12);
        let single = ConjunctiveQuery::parse("?x A ?y").unwrap();
        assert_eq!(oracle_evaluate(&single, &st).len(), 3);
    }

    #[test]
    fn oracle_spurious_diamond_empty() {
        let st = fixtures::g_spurious();
        let q = fixtures::diamond_query();
        assert!(oracle_evaluate(&q, &st).is_empty());
        assert!(oracle_ideal_ag(&q, &st).iter().all(|s| s.is_empty()));
    }

    #[test]
    fn oracle_ideal_ag_chain() {
        let st = fixtures::g_chain();
        let q = fixtures::chain_query();
        let iag = oracle_ideal_ag(&q, &st);
        let total: usize = iag.iter().map(|s| s.len()).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn miner_finds_completing_diamond() {
        let mut text = String::from(fixtures::G_SPURIOUS_TEXT);
        text.push_str("a3 P b3\nb3 Q d3\na3 R c3\nc3 S d3\n");
        let st = TripleStore::load_ntriples(&text).unwrap();
        let cat = Catalog::build(&st);
        let mined = mine_queries(&Template::diamond4(), &st, &cat, 10);
        assert!(!mined.is_empty());
        assert!(mined.iter().any(|m| m.labels == ["P", "Q", "R", "S"]));
        for m in &mined {
            assert!(m.embedding_count >= 1);
        }
    }

    #[test]
    fn miner_empty_without_two_step_paths() {
        // No node has both in- and out-edges, so no diamond can embed.
        let st = TripleStore::load_ntriples("a P b\nc Q d").unwrap();
        let cat = Catalog::build(&st);
        let mined = mine_queries(&Template::diamond4(), &st, &cat, 10);
        assert!(mined.is_empty());
    }

    #[test]
    fn miner_limit_zero() {
        let st = fixtures::g_spurious();
        let cat = Catalog::build(&st);
        assert!(mine_queries(&Template::diamond4(), &st, &cat, 0).is_empty());
    }

    #[test]
    fn miner_pruning_is_lossless_small() {
        let mut text = String::from(fixtures::G_SPURIOUS_TEXT);
        text.push_str("a3 P b3\nb3 Q d3\na3 R c3\nc3 S d3\n");
        let st = TripleStore::load_ntriples(&text).unwrap();
        let cat = Catalog::build(&st);
        let pruned: BTreeSet<Vec<String>> = mine_queries(&Template::diamond4(), &st, &cat, 10_000)
            .into_iter()
            .map(|m| m.labels)
            .collect();
        let unpruned: BTreeSet<Vec<String>> =
            mine_queries_unpruned(&Template::diamond4(), &st, 10_000)
                .into_iter()
                .collect();
        assert_eq!(pruned, unpruned);
    }

    #[test]
    fn generator_is_deterministic() {
        let params = GenParams {
            nodes: 30,
            preds: 5,
            triples: 100,
            query_edges: 4,
            shape: GenShape::Acyclic,
            skew: 2,
        };
        let (s1, q1) = random_instance(1, &params).unwrap();
        let (s2, q2) = random_instance(1, &params).unwrap();
        assert_eq!(s1.triple_count(), 100);
        assert_eq!(
            s1.triples().collect::<Vec<_>>(),
            s2.triples().collect::<Vec<_>>()
        );
        assert_eq!(q1, q2);
        assert!(q1.analyze_shape().acyclic);
    }

    #[test]
    fn generator_shapes() {
        let mut params = GenParams {
            nodes: 30,
            preds: 4,
            triples: 80,
            query_edges: 4,
            shape: GenShape::Diamond,
            skew: 1,
        };
        let (_, q) = random_instance(7, &params).unwrap();
        let shape = q.analyze_shape();
        assert!(!shape.acyclic);
        assert_eq!(shape.cycles[0].len(), 4);

        params.shape = GenShape::FiveCycle;
        params.query_edges = 5;
        let (_, q) = random_instance(7, &params).unwrap();
        assert_eq!(q.analyze_shape().cycles[0].len(), 5);

        params.shape = GenShape::Triangle;
        params.query_edges = 3;
        let (_, q) = random_instance(7, &params).unwrap();
        assert_eq!(q.analyze_shape().cycles[0].len(), 3);
    }

    #[test]
    fn generator_rejects_infeasible() {
        let params = GenParams {
            nodes: 2,
            preds: 1,
            triples: 100,
            query_edges: 3,
            shape: GenShape::Acyclic,
            skew: 1,
        };
        assert!(random_instance(0, &params).is_err());
    }
}
