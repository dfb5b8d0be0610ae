//! Std companion to `agq-core`: file formats, timing, and the report
//! shapes the CLI prints. The evaluation logic itself lives in the core
//! crate; this one only moves bytes and clocks.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use agq_core::{
    plan_defactorization, plan_edgifier, plan_triangulation, AnswerGraph, Catalog,
    ConjunctiveQuery, Embedding, EngineOpts, NodeId, TriangulationPlan, TripleStore,
    TripleStoreBuilder,
};

pub const SNAPSHOT_MAGIC: &str = "AGQ-SNAPSHOT v1";

/// Serializes the dictionary plus the sorted triple dump. The original
/// triple text stays canonical; this exists for fast reload.
pub fn snapshot_to_string(store: &TripleStore) -> String {
    let mut out = String::with_capacity(64 + store.triple_count() * 12);
    out.push_str(SNAPSHOT_MAGIC);
    out.push('\n');
    for term in store.node_dict().terms() {
        out.push_str("N ");
        out.push_str(term);
        out.push('\n');
    }
    for term in store.pred_dict().terms() {
        out.push_str("P ");
        out.push_str(term);
        out.push('\n');
    }
    for t in store.triples() {
        out.push_str(&format!("T {} {} {}\n", t.s.0, t.p.0, t.o.0));
    }
    out
}

pub fn snapshot_from_string(text: &str) -> Result<TripleStore> {
    let mut lines = text.lines();
    if lines.next() != Some(SNAPSHOT_MAGIC) {
        bail!("not a store snapshot (missing `{SNAPSHOT_MAGIC}` header)");
    }
    let mut b = TripleStoreBuilder::new();
    for (no, line) in lines.enumerate() {
        let n = no + 2;
        let Some((kind, rest)) = line.split_once(' ') else {
            bail!("snapshot line {n}: expected `N|P|T ...`");
        };
        match kind {
            "N" => {
                b.intern_node(rest);
            }
            "P" => {
                b.intern_pred(rest);
            }
            "T" => {
                let ids: Vec<u32> = rest
                    .split(' ')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("snapshot line {n}: bad triple ids"))?;
                if ids.len() != 3 {
                    bail!("snapshot line {n}: triple needs 3 ids");
                }
                b.add_ids(ids[0], ids[1], ids[2]);
            }
            _ => bail!("snapshot line {n}: unknown record `{kind}`"),
        }
    }
    Ok(b.finish())
}

/// Loads either a snapshot (sniffed by magic line) or raw triple text.
pub fn load_store(path: &Path) -> Result<TripleStore> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read store from {}", path.display()))?;
    if text.starts_with(SNAPSHOT_MAGIC) {
        snapshot_from_string(&text)
    } else {
        TripleStore::load_ntriples(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }
}

pub fn load_catalog(path: &Path, store: &TripleStore) -> Result<Catalog> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read catalog from {}", path.display()))?;
    Catalog::from_tsv(&text, store).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Everything one evaluation produces, plus wall-clock phase timings.
pub struct RunOutcome {
    pub plan: agq_core::EdgePlan,
    pub tplan: Option<TriangulationPlan>,
    pub ag_pairs_per_edge: Vec<usize>,
    pub ag_total: usize,
    pub stats: agq_core::EngineStats,
    pub embeddings: Vec<Embedding>,
    pub phase1_ms: f64,
    pub phase2_ms: f64,
}

pub fn evaluate(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    cat: &Catalog,
    opts: EngineOpts,
) -> RunOutcome {
    let plan = plan_edgifier(q, store, cat);
    let shape = q.analyze_shape();
    let tplan = (!shape.acyclic).then(|| plan_triangulation(q, &shape, store, cat));
    let t0 = Instant::now();
    let mut ag = agq_core::generate_answer_graph(q, &plan, tplan.as_ref(), store, opts);
    let phase1_ms = t0.elapsed().as_secs_f64() * 1e3;
    let ag_pairs_per_edge: Vec<usize> = (0..q.edges.len()).map(|e| ag.edge_len(e)).collect();
    let ag_total = ag.total_pairs();
    let dplan = plan_defactorization(q, &ag);
    let t1 = Instant::now();
    let embeddings = agq_core::generate_embeddings(q, &mut ag, &dplan);
    let phase2_ms = t1.elapsed().as_secs_f64() * 1e3;
    RunOutcome {
        plan,
        tplan,
        ag_pairs_per_edge,
        ag_total,
        stats: ag.stats,
        embeddings,
        phase1_ms,
        phase2_ms,
    }
}

/// Answer graph only, for callers that inspect it before phase 2.
pub fn materialize(
    q: &ConjunctiveQuery,
    store: &TripleStore,
    cat: &Catalog,
    opts: EngineOpts,
) -> AnswerGraph {
    let plan = plan_edgifier(q, store, cat);
    let shape = q.analyze_shape();
    let tplan = (!shape.acyclic).then(|| plan_triangulation(q, &shape, store, cat));
    agq_core::generate_answer_graph(q, &plan, tplan.as_ref(), store, opts)
}

/// Stats in the documented JSON shape.
pub fn stats_json(out: &RunOutcome) -> serde_json::Value {
    serde_json::json!({
        "edgeWalks": out.stats.edge_walks,
        "agPairsPerEdge": out.ag_pairs_per_edge,
        "agTotal": out.ag_total,
        "burnedNodes": out.stats.burned_nodes,
        "burnedPairs": out.stats.burned_pairs,
        "embeddings": out.embeddings.len(),
        "phase1Ms": out.phase1_ms,
        "phase2Ms": out.phase2_ms,
    })
}

pub fn plan_json(q: &ConjunctiveQuery, out: &RunOutcome) -> serde_json::Value {
    let edges: Vec<String> = out
        .plan
        .order
        .iter()
        .map(|&e| {
            let edge = &q.edges[e];
            format!(
                "{} {} {}",
                q.endpoint_text(&edge.src),
                edge.label,
                q.endpoint_text(&edge.dst)
            )
        })
        .collect();
    let chords: Vec<serde_json::Value> = out
        .tplan
        .iter()
        .flat_map(|t| t.chords.iter())
        .map(|c| serde_json::json!([q.var_names[c.u].as_str(), q.var_names[c.v].as_str()]))
        .collect();
    serde_json::json!({
        "order": out.plan.order,
        "steps": edges,
        "estCost": out.plan.est_cost,
        "missingPreds": out.plan.missing_preds,
        "chords": chords,
    })
}

/// One embedding as a tab-separated line, variables in first-appearance
/// order, node ids decoded back to terms.
pub fn embedding_line(store: &TripleStore, emb: &Embedding) -> String {
    emb.binding
        .iter()
        .map(|&n: &NodeId| store.node_text(n))
        .collect::<Vec<_>>()
        .join("\t")
}

#[cfg(test)]
mod tests {
    use super::*;
    use agq_core::testkit::fixtures;

    #[test]
    fn snapshot_round_trips() {
        let st = fixtures::g_chain();
        let text = snapshot_to_string(&st);
        let back = snapshot_from_string(&text).unwrap();
        assert_eq!(
            st.triples().collect::<Vec<_>>(),
            back.triples().collect::<Vec<_>>()
        );
        assert_eq!(st.node_count(), back.node_count());
        assert_eq!(
            st.node_dict().terms().collect::<Vec<_>>(),
            back.node_dict().terms().collect::<Vec<_>>()
        );
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(snapshot_from_string("nonsense").is_err());
        assert!(snapshot_from_string("AGQ-SNAPSHOT v1\nX oops").is_err());
        assert!(snapshot_from_string("AGQ-SNAPSHOT v1\nT 1 2").is_err());
    }

    #[test]
    fn evaluate_reports_chain_counts() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let q = fixtures::chain_query();
        let out = evaluate(&q, &st, &cat, EngineOpts::default());
        assert_eq!(out.ag_total, 8);
        assert_eq!(out.embeddings.len(), 12);
        let js = stats_json(&out);
        assert_eq!(js["agTotal"], 8);
        assert_eq!(js["embeddings"], 12);
        for key in [
            "edgeWalks",
            "agPairsPerEdge",
            "agTotal",
            "burnedNodes",
            "burnedPairs",
            "embeddings",
            "phase1Ms",
            "phase2Ms",
        ] {
            assert!(js.get(key).is_some(), "missing stats key {key}");
        }
    }

    #[test]
    fn embedding_lines_decode_terms() {
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let q = ConjunctiveQuery::parse("?x B ?y").unwrap();
        let out = evaluate(&q, &st, &cat, EngineOpts::default());
        let lines: Vec<String> = out
            .embeddings
            .iter()
            .map(|e| embedding_line(&st, e))
            .collect();
        assert_eq!(lines, ["x1\ty1"]);
    }
}
