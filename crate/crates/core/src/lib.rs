//! Two-phase conjunctive-query evaluation over directed, edge-labeled
//! multigraphs.
//!
//! Phase one materializes an *answer graph*: per query edge, the set of data
//! node pairs that survive edge extension and cascading burnback. Phase two
//! (*defactorization*) joins those pair sets to enumerate the embedding
//! tuples. For acyclic queries node burnback alone yields the ideal answer
//! graph; cyclic queries are triangulated with chords and can additionally
//! run edge burnback to cull spurious pairs.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the CLI
//! live in the companion `agq` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod catalog;
pub mod engine;
pub mod planner;
pub mod query;
pub mod store;
pub mod testkit;

pub use catalog::{BoundSide, Catalog, JoinType, OneGram, TwoGram};
pub use engine::{
    generate_answer_graph, generate_embeddings, AnswerGraph, Embedding, EngineOpts, EngineStats,
};
pub use planner::{
    plan_defactorization, plan_edgifier, plan_triangulation, DefacPlan, EdgePlan, TriangulationPlan,
};
pub use query::{ConjunctiveQuery, Endpoint, QueryEdge, QueryShape, Template, VarId};
pub use store::{NodeId, PredId, Triple, TripleStore, TripleStoreBuilder};
