//! Reliability-aware document selection for retrieval pipelines.
//!
//! Retrieval systems rank documents by reliability, and attackers find it
//! harder to corrupt high-ranked slots than low-ranked ones. This crate
//! implements a defense that exploits that signal:
//!
//! - [`document`] — ranked documents, reliability weight schemes, and the
//!   pre-graph relevance filter.
//! - [`judge`] — pairwise contradiction judgments, either from a seeded
//!   stochastic error model or from a precomputed trace matrix, thresholded
//!   into contradiction-graph edges.
//! - [`mis`] — exact rank-aware maximum-independent-set search with a
//!   lexicographic tie-break preferring higher-ranked documents, plus an
//!   independent brute-force oracle.
//! - [`sampling`] — weighted sample-and-aggregate: draw small contexts with
//!   replacement by reliability weight, answer each in isolation, aggregate
//!   with MIS selection over the contexts.
//! - [`bounds`] — analytic calculators for the failure probability of both
//!   pipelines (union-bound machinery for direct MIS, a Hoeffding bound for
//!   sample-and-aggregate).
//! - [`sim`] — a seeded Monte Carlo engine measuring how often malicious
//!   documents survive selection under configurable attack scenarios.
//! - [`trace`] — file formats for carrying offline model outputs
//!   (contradiction probabilities, answer tokens) into the pipeline.
//!
//! All randomness flows from explicit 64-bit seeds through keyed substreams
//! ([`rng`]), so every result is reproducible bit-for-bit regardless of
//! iteration order or worker count.

pub mod bounds;
pub mod document;
pub mod judge;
pub mod mis;
pub mod rng;
pub mod sampling;
pub mod sim;
pub mod trace;

pub use document::{make_weights, relevance_filter, Document, RetrievalSet, Role, WeightScheme};
pub use judge::{build_graph, judge_pair, JudgeModel, JudgmentRecord};
pub use mis::{lex_key, mis_oracle, select_mis, ContradictionGraph, SelectionResult};
pub use sampling::{
    aggregate_mis, answer_for_roles, rank_contexts, sample_contexts, AggregateAnswer, Answer,
    Context, SamplingPlan,
};
pub use sim::{run_scenario, sweep, Attack, Pipeline, RobustnessEstimate, SimScenario};

/// Errors shared across the selection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A weight scheme produced (or was given) scores that cannot form a
    /// reliability distribution.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// The relevance filter removed every document; the pipeline abstains.
    #[error("no documents survived the relevance filter")]
    EmptyAfterFilter,

    /// A trace file lacks an entry the pipeline needs.
    #[error("trace incomplete: {0}")]
    TraceIncomplete(String),

    /// A trace file is malformed (asymmetric matrix, out-of-range values,
    /// dimension mismatch).
    #[error("trace invalid: {0}")]
    TraceInvalid(String),

    /// The graph exceeds the exact-search cap; route through sampling instead.
    #[error("graph too large for exact search: {n} vertices (cap {cap})")]
    GraphTooLarge { n: usize, cap: usize },

    /// A bound target is unreachable for the given parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A scenario or plan failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
