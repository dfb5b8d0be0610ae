//! Acceptance gate. Each test covers one numbered criterion and prints a
//! single `ACCEPTANCE <n> ...: PASS|FAIL` line (visible with
//! `cargo test -- --nocapture`).

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use agq_core::testkit::{
    self, enumerate_triangulation_costs, exhaustive_min_plan_cost, fixtures, oracle_evaluate,
    oracle_ideal_ag, random_instance, GenParams, GenShape,
};
use agq_core::{
    plan_edgifier, plan_triangulation, Catalog, ConjunctiveQuery, EngineOpts, NodeId, TripleStore,
    TripleStoreBuilder,
};

fn criterion(n: u32, name: &str, check: impl FnOnce() -> Result<(), String>) {
    let t0 = Instant::now();
    let result = check();
    let elapsed = t0.elapsed().as_secs_f64();
    match &result {
        Ok(()) => println!("ACCEPTANCE {n} {name}: PASS ({elapsed:.2}s)"),
        Err(why) => println!("ACCEPTANCE {n} {name}: FAIL ({elapsed:.2}s) — {why}"),
    }
    if let Err(why) = result {
        panic!("criterion {n} failed: {why}");
    }
}

struct Instance {
    store: TripleStore,
    query: ConjunctiveQuery,
    shape: GenShape,
}

/// The shared seeded suite for criteria 2, 3, 4, 5, and 7: 210 instances,
/// stores ≤ 500 triples, acyclic queries ≤ 6 edges, cyclic queries from
/// {triangle, diamond, 5-cycle}.
fn suite() -> Vec<Instance> {
    let mut out = Vec::new();
    for i in 0u64..210 {
        let (shape, edges) = match i % 4 {
            0 | 1 => (GenShape::Acyclic, (i / 4 % 6) as u32 + 1),
            2 => {
                if i % 8 == 2 {
                    (GenShape::Triangle, 3)
                } else {
                    (GenShape::Diamond, 4)
                }
            }
            _ => (GenShape::FiveCycle, 5),
        };
        let params = GenParams {
            nodes: 20 + (i % 10) as u32,
            preds: 3 + (i % 3) as u32,
            triples: (20 + i * 37 % 330) as u32,
            query_edges: edges,
            shape,
            skew: 1 + (i % 2) as u32,
        };
        let (store, query) = random_instance(i, &params).expect("suite parameters are feasible");
        out.push(Instance {
            store,
            query,
            shape,
        });
    }
    out
}

fn two_phase(
    inst: &Instance,
    edge_burnback: bool,
) -> (agq_core::AnswerGraph, BTreeSet<Vec<NodeId>>) {
    let cat = Catalog::build(&inst.store);
    let mut ag = agq::materialize(&inst.query, &inst.store, &cat, EngineOpts { edge_burnback });
    let dplan = agq_core::plan_defactorization(&inst.query, &ag);
    let rows = agq_core::generate_embeddings(&inst.query, &mut ag, &dplan)
        .into_iter()
        .map(|e| e.binding)
        .collect();
    (ag, rows)
}

#[test]
fn criterion_1_chain_fixture_counts() {
    criterion(1, "chain fixture counts", || {
        let t0 = Instant::now();
        let st = fixtures::g_chain();
        let cat = Catalog::build(&st);
        let q = fixtures::chain_query();
        let out = agq::evaluate(&q, &st, &cat, EngineOpts::default());
        if out.embeddings.len() != 12 {
            return Err(format!(
                "expected 12 embeddings, got {}",
                out.embeddings.len()
            ));
        }
        if out.ag_total != 8 {
            return Err(format!(
                "expected 8 answer-graph pairs, got {}",
                out.ag_total
            ));
        }
        let secs = t0.elapsed().as_secs_f64();
        if secs >= 1.0 {
            return Err(format!("took {secs:.2}s, budget is 1s"));
        }
        Ok(())
    });
}

#[test]
fn criterion_2_oracle_equivalence() {
    criterion(2, "oracle equivalence over 210 seeded instances", || {
        let t0 = Instant::now();
        let suite = suite();
        if suite.len() < 200 {
            return Err(format!("only {} instances", suite.len()));
        }
        for (i, inst) in suite.iter().enumerate() {
            let want = oracle_evaluate(&inst.query, &inst.store);
            for edge_burnback in [false, true] {
                let (_, got) = two_phase(inst, edge_burnback);
                if got != want {
                    return Err(format!(
                        "instance {i} ({:?}, burnback={edge_burnback}): engine {} rows vs oracle {}",
                        inst.shape,
                        got.len(),
                        want.len()
                    ));
                }
            }
        }
        let secs = t0.elapsed().as_secs_f64();
        if secs >= 60.0 {
            return Err(format!("suite took {secs:.1}s, budget is 60s"));
        }
        Ok(())
    });
}

/// A uniformly random connected left-deep order.
fn random_connected_order(q: &ConjunctiveQuery, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = q.edges.len();
    let mut order = Vec::new();
    let mut mask: u64 = 0;
    while order.len() < n {
        let choices: Vec<usize> = (0..n)
            .filter(|&e| mask & (1 << e) == 0 && agq_core::planner::cost::connected(q, mask, e))
            .collect();
        let &e = choices.choose(rng).expect("connected query always extends");
        order.push(e);
        mask |= 1 << e;
    }
    order
}

fn ag_edge_sets(ag: &agq_core::AnswerGraph, edges: usize) -> Vec<BTreeSet<(NodeId, NodeId)>> {
    (0..edges).map(|e| ag.edge_pairs(e).collect()).collect()
}

#[test]
fn criterion_3_acyclic_idealness_and_order_independence() {
    criterion(3, "acyclic idealness, order-independent AG", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (i, inst) in suite().iter().enumerate() {
            if inst.shape != GenShape::Acyclic {
                continue;
            }
            let (ag, _) = two_phase(inst, false);
            let got = ag_edge_sets(&ag, inst.query.edges.len());
            let ideal = oracle_ideal_ag(&inst.query, &inst.store);
            if got != ideal {
                return Err(format!("instance {i}: AG is not the ideal answer graph"));
            }
            let cat = Catalog::build(&inst.store);
            for _ in 0..5 {
                let order = random_connected_order(&inst.query, &mut rng);
                let plan = agq_core::EdgePlan {
                    order,
                    est_cost: 0.0,
                    est_cards: Vec::new(),
                    missing_preds: false,
                };
                let _ = &cat;
                let alt = agq_core::generate_answer_graph(
                    &inst.query,
                    &plan,
                    None,
                    &inst.store,
                    EngineOpts::default(),
                );
                if ag_edge_sets(&alt, inst.query.edges.len()) != got {
                    return Err(format!(
                        "instance {i}: AG differs under extension order {:?}",
                        plan.order
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_4_cyclic_soundness_and_spurious_edges() {
    criterion(4, "cyclic soundness, spurious-edge demonstration", || {
        // The fixture: arc-consistent but embedding-free.
        let sp = Instance {
            store: fixtures::g_spurious(),
            query: fixtures::diamond_query(),
            shape: GenShape::Diamond,
        };
        let (ag, rows) = two_phase(&sp, false);
        if ag.total_pairs() != 8 || !rows.is_empty() {
            return Err(format!(
                "node-only: expected 8 pairs / 0 embeddings, got {} / {}",
                ag.total_pairs(),
                rows.len()
            ));
        }
        let (ag, rows) = two_phase(&sp, true);
        if ag.total_pairs() != 0 || !rows.is_empty() {
            return Err(format!(
                "edge burnback: expected empty AG, got {} pairs / {} embeddings",
                ag.total_pairs(),
                rows.len()
            ));
        }
        for (i, inst) in suite().iter().enumerate() {
            if inst.shape == GenShape::Acyclic {
                continue;
            }
            let ideal = oracle_ideal_ag(&inst.query, &inst.store);
            let (ag, _) = two_phase(inst, false);
            let got = ag_edge_sets(&ag, inst.query.edges.len());
            for (e, ideal_pairs) in ideal.iter().enumerate() {
                if !got[e].is_superset(ideal_pairs) {
                    return Err(format!("instance {i}: AG lost ideal pairs on edge {e}"));
                }
            }
            if inst.shape == GenShape::Diamond {
                let (ag, _) = two_phase(inst, true);
                if ag_edge_sets(&ag, inst.query.edges.len()) != ideal {
                    return Err(format!(
                        "instance {i}: diamond with edge burnback is not ideal"
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_5_planner_optimality() {
    criterion(5, "planner DP optimality, pentagon triangulation", || {
        for (i, inst) in suite().iter().enumerate() {
            if inst.query.edges.len() > 6 {
                continue;
            }
            let cat = Catalog::build(&inst.store);
            let plan = plan_edgifier(&inst.query, &inst.store, &cat);
            let min = exhaustive_min_plan_cost(&inst.query, &inst.store, &cat);
            if plan.est_cost != min {
                return Err(format!(
                    "instance {i}: DP cost {} vs exhaustive minimum {}",
                    plan.est_cost, min
                ));
            }
            if inst.shape == GenShape::FiveCycle {
                let shape = inst.query.analyze_shape();
                let tplan = plan_triangulation(&inst.query, &shape, &inst.store, &cat);
                let all =
                    enumerate_triangulation_costs(&inst.query, &inst.store, &cat, &shape.cycles[0]);
                if all.len() != 5 {
                    return Err(format!(
                        "instance {i}: pentagon should have 5 triangulations, got {}",
                        all.len()
                    ));
                }
                let best = all.iter().cloned().fold(f64::INFINITY, f64::min);
                if tplan.est_cost != best {
                    return Err(format!(
                        "instance {i}: triangulation DP {} vs enumerated minimum {}",
                        tplan.est_cost, best
                    ));
                }
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_6_factorization_benefit() {
    criterion(6, "factorization benefit on the fan graph", || {
        let t0 = Instant::now();
        let (k, m) = (50u32, 50u32);
        let mut b = TripleStoreBuilder::new();
        for i in 0..k {
            b.add(&format!("w{i}"), "A", "x");
        }
        b.add("x", "B", "y");
        for j in 0..m {
            b.add("y", "C", &format!("z{j}"));
        }
        let st = b.finish();
        let cat = Catalog::build(&st);
        let q = fixtures::chain_query();
        let out = agq::evaluate(&q, &st, &cat, EngineOpts::default());
        let ag_expected = (k + 1 + m) as usize;
        if out.ag_total != ag_expected {
            return Err(format!("|AG| = {}, expected {ag_expected}", out.ag_total));
        }
        let emb_expected = (k * m) as usize;
        if out.embeddings.len() != emb_expected {
            return Err(format!(
                "{} embeddings, expected {emb_expected}",
                out.embeddings.len()
            ));
        }
        let budget = (k + 1 + m + k * m) as u64;
        if out.stats.tuple_extensions > budget {
            return Err(format!(
                "{} tuple extensions exceed the {budget} budget",
                out.stats.tuple_extensions
            ));
        }
        let secs = t0.elapsed().as_secs_f64();
        if secs >= 5.0 {
            return Err(format!("took {secs:.2}s, budget is 5s"));
        }
        Ok(())
    });
}

#[test]
fn criterion_7_no_dead_ends() {
    criterion(7, "no dead ends on ideal answer graphs", || {
        for (i, inst) in suite().iter().enumerate() {
            if inst.shape != GenShape::Acyclic {
                continue;
            }
            let cat = Catalog::build(&inst.store);
            let out = agq::evaluate(&inst.query, &inst.store, &cat, EngineOpts::default());
            if out.stats.failed_extensions != 0 {
                return Err(format!(
                    "instance {i}: {} failed extensions",
                    out.stats.failed_extensions
                ));
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_8_miner_validity() {
    criterion(8, "miner validity on a 10k-triple store", || {
        let params = GenParams {
            nodes: 400,
            preds: 20,
            triples: 10_000,
            query_edges: 1,
            shape: GenShape::Acyclic,
            skew: 2,
        };
        let (st, _) = random_instance(8, &params).map_err(|e| e.to_string())?;
        if st.triple_count() != 10_000 {
            return Err(format!("store has {} triples", st.triple_count()));
        }
        let cat = Catalog::build(&st);
        let mined = testkit::mine_queries(&agq_core::Template::diamond4(), &st, &cat, 10);
        if mined.is_empty() {
            return Err("miner found nothing on a dense store".into());
        }
        for m in &mined {
            if m.embedding_count == 0 {
                return Err(format!("false emission: {:?}", m.labels));
            }
            let labels: Vec<&str> = m.labels.iter().map(|l| l.as_str()).collect();
            let q = agq_core::Template::diamond4()
                .instantiate(&labels)
                .map_err(|e| e.to_string())?;
            let inst = Instance {
                store: st.clone(),
                query: q,
                shape: GenShape::Diamond,
            };
            let (_, rows) = two_phase(&inst, false);
            if rows.len() as u64 != m.embedding_count {
                return Err(format!(
                    "{:?}: reported {} embeddings, re-evaluation found {}",
                    m.labels,
                    m.embedding_count,
                    rows.len()
                ));
            }
        }
        // Spot-check the first few against the independent oracle.
        for m in mined.iter().take(2) {
            let labels: Vec<&str> = m.labels.iter().map(|l| l.as_str()).collect();
            let q = agq_core::Template::diamond4().instantiate(&labels).unwrap();
            let count = oracle_evaluate(&q, &st).len() as u64;
            if count != m.embedding_count {
                return Err(format!(
                    "{:?}: oracle found {count}, miner reported {}",
                    m.labels, m.embedding_count
                ));
            }
        }
        Ok(())
    });
}
