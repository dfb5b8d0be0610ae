use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use agq_core::testkit;
use agq_core::{Catalog, ConjunctiveQuery, EngineOpts, Template, TripleStore};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "agq",
    about = "Two-phase conjunctive-query evaluation over triple stores"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ingest triple text (or an existing snapshot) and write a store snapshot.
    Load { data: PathBuf, store_out: PathBuf },
    /// Build predicate statistics from a store and write them as TSV.
    Catalog { store: PathBuf, cat_out: PathBuf },
    /// Print the evaluation plan for a query without running it.
    Plan {
        store: PathBuf,
        cat: PathBuf,
        query: PathBuf,
    },
    /// Evaluate a query and report counts, stats, and optionally results.
    Run {
        store: PathBuf,
        cat: PathBuf,
        query: PathBuf,
        /// Enforce triangle consistency on cyclic queries (culls spurious pairs).
        #[arg(long)]
        edge_burnback: bool,
        /// Direct-join baseline: no answer graph, planned order only.
        #[arg(long)]
        no_factorize: bool,
        /// Print each embedding as a tab-separated line.
        #[arg(long)]
        emit_results: bool,
        /// Print engine statistics as one JSON object.
        #[arg(long)]
        stats_json: bool,
    },
    /// Instantiate a template's labels so the query is non-empty; JSON lines.
    Mine {
        store: PathBuf,
        cat: PathBuf,
        template: String,
        limit: usize,
    },
    /// Evaluate both the two-phase pipeline and the naive oracle and compare.
    Verify {
        store: PathBuf,
        query: PathBuf,
        #[arg(long)]
        edge_burnback: bool,
        /// Drop one answer-graph pair before phase 2 (negative-control hook).
        #[arg(long, hide = true)]
        corrupt_ag: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Load { data, store_out } => {
            let st = agq::load_store(&data)?;
            fs::write(&store_out, agq::snapshot_to_string(&st))
                .with_context(|| format!("cannot write {}", store_out.display()))?;
            println!(
                "{} triples, {} nodes, {} predicates",
                st.triple_count(),
                st.node_count(),
                st.pred_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Catalog { store, cat_out } => {
            let st = agq::load_store(&store)?;
            let cat = Catalog::build(&st);
            fs::write(&cat_out, cat.to_tsv(&st))
                .with_context(|| format!("cannot write {}", cat_out.display()))?;
            println!(
                "{} 1-grams, {} 2-grams",
                cat.onegrams().count(),
                cat.twograms().count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Plan { store, cat, query } => {
            let (st, cat, q) = load_inputs(&store, &cat, &query)?;
            let out = agq::evaluate(&q, &st, &cat, EngineOpts::default());
            println!("{}", agq::plan_json(&q, &out));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run {
            store,
            cat,
            query,
            edge_burnback,
            no_factorize,
            emit_results,
            stats_json,
        } => {
            let (st, cat, q) = load_inputs(&store, &cat, &query)?;
            if no_factorize {
                run_direct(&st, &cat, &q, emit_results)
            } else {
                run_two_phase(&st, &cat, &q, edge_burnback, emit_results, stats_json)
            }
        }
        Cmd::Mine {
            store,
            cat,
            template,
            limit,
        } => {
            let st = agq::load_store(&store)?;
            let cat = agq::load_catalog(&cat, &st)?;
            let tmpl = Template::by_name(&template).map_err(|e| anyhow::anyhow!("{e}"))?;
            for m in testkit::mine_queries(&tmpl, &st, &cat, limit) {
                println!(
                    "{}",
                    serde_json::json!({
                        "template": m.template,
                        "labels": m.labels,
                        "embeddings": m.embedding_count,
                        "agTotal": m.ag_size,
                    })
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            store,
            query,
            edge_burnback,
            corrupt_ag,
        } => {
            let st = agq::load_store(&store)?;
            let q = load_query(&query)?;
            verify(&st, &q, edge_burnback, corrupt_ag)
        }
    }
}

fn load_inputs(
    store: &Path,
    cat: &Path,
    query: &Path,
) -> Result<(TripleStore, Catalog, ConjunctiveQuery)> {
    let st = agq::load_store(store)?;
    let cat = agq::load_catalog(cat, &st)?;
    let q = load_query(query)?;
    Ok((st, cat, q))
}

fn load_query(path: &Path) -> Result<ConjunctiveQuery> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read query from {}", path.display()))?;
    ConjunctiveQuery::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn run_two_phase(
    st: &TripleStore,
    cat: &Catalog,
    q: &ConjunctiveQuery,
    edge_burnback: bool,
    emit_results: bool,
    stats_json: bool,
) -> Result<ExitCode> {
    let out = agq::evaluate(q, st, cat, EngineOpts { edge_burnback });
    println!("plan {}", agq::plan_json(q, &out));
    println!(
        "agTotal {} embeddings {} ({:.3} ms + {:.3} ms)",
        out.ag_total,
        out.embeddings.len(),
        out.phase1_ms,
        out.phase2_ms
    );
    if stats_json {
        println!("{}", agq::stats_json(&out));
    }
    if emit_results {
        for emb in &out.embeddings {
            println!("{}", agq::embedding_line(st, emb));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_direct(
    st: &TripleStore,
    cat: &Catalog,
    q: &ConjunctiveQuery,
    emit_results: bool,
) -> Result<ExitCode> {
    let plan = agq_core::plan_edgifier(q, st, cat);
    let t0 = std::time::Instant::now();
    let rows = testkit::direct_evaluate(q, st, &plan.order);
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    println!("embeddings {} ({:.3} ms, direct join)", rows.len(), ms);
    if emit_results {
        for row in &rows {
            let line: Vec<&str> = row.iter().map(|&n| st.node_text(n)).collect();
            println!("{}", line.join("\t"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(
    st: &TripleStore,
    q: &ConjunctiveQuery,
    edge_burnback: bool,
    corrupt_ag: bool,
) -> Result<ExitCode> {
    let cat = Catalog::build(st);
    let mut ag = agq::materialize(q, st, &cat, EngineOpts { edge_burnback });
    if corrupt_ag {
        ag.corrupt_drop_pair();
    }
    let dplan = agq_core::plan_defactorization(q, &ag);
    let got: std::collections::BTreeSet<Vec<agq_core::NodeId>> =
        agq_core::generate_embeddings(q, &mut ag, &dplan)
            .into_iter()
            .map(|e| e.binding)
            .collect();
    let want = testkit::oracle_evaluate(q, st);
    if got == want {
        println!("MATCH {} = {}", got.len(), want.len());
        return Ok(ExitCode::SUCCESS);
    }
    println!("MISMATCH {} vs {} (oracle)", got.len(), want.len());
    for row in want.symmetric_difference(&got) {
        let side = if want.contains(row) {
            "missing"
        } else {
            "extra"
        };
        let line: Vec<&str> = row.iter().map(|&n| st.node_text(n)).collect();
        println!("{side}\t{}", line.join("\t"));
    }
    Ok(ExitCode::from(EXIT_MISMATCH))
}
