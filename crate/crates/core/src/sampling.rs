//! Weighted sample-and-aggregate over ranked documents.
//!
//! Exact MIS search is exponential in the retrieval size, so large sets are
//! handled by sampling: draw `T` contexts of `m` documents each, with
//! replacement, where a document's draw probability is its reliability
//! weight; answer each context in isolation; then aggregate the intermediate
//! answers with the same rank-aware MIS selection, this time over a graph
//! whose vertices are the contexts. Context rank is the lexicographic order
//! of the sorted draw indices, so contexts built from higher-ranked
//! documents win tie-breaks.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::document::{RetrievalSet, Role, WeightScheme};
use crate::judge::{stochastic_edge, JudgeKind, JudgeModel};
use crate::mis::{select_mis, ContradictionGraph, SelectionResult};
use crate::rng::{substream, DOMAIN_CONTEXT_PAIR, DOMAIN_ROUND};
use crate::{Error, Result};

/// Configuration of one sample-and-aggregate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Number of sampling rounds `T`; also the aggregation graph size.
    pub rounds: u32,
    /// Documents drawn per context.
    pub context_size: u32,
    /// Weight scheme used to (re)derive draw probabilities.
    pub scheme: WeightScheme,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(rounds: u32, context_size: u32, scheme: WeightScheme, seed: u64) -> Result<Self> {
        if rounds == 0 || context_size == 0 {
            return Err(Error::Config(
                "rounds and context size must both be at least 1".into(),
            ));
        }
        Ok(Self {
            rounds,
            context_size,
            scheme,
            seed,
        })
    }
}

/// One sampled context: an ordered multiset of document indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    /// Sampling round, `1..=T`.
    pub round: u32,
    /// Drawn document indices in draw order; duplicates allowed.
    pub draws: Vec<u32>,
    /// Sampling weights of the drawn documents (same order as `draws`).
    pub weights: Vec<f64>,
    /// Ascending sort of `draws`; the context's rank key.
    pub rank_key: Vec<u32>,
    /// True when no malicious document was drawn (simulation provenance).
    pub clean: bool,
}

/// An answer token. Simulation mode only ever produces the first three;
/// trace mode carries whatever string the offline model emitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Answer {
    Correct,
    Attack,
    Idk,
    Token(String),
}

impl Answer {
    pub fn as_str(&self) -> &str {
        match self {
            Answer::Correct => "CORRECT",
            Answer::Attack => "ATTACK",
            Answer::Idk => "IDK",
            Answer::Token(s) => s,
        }
    }
}

impl From<String> for Answer {
    fn from(s: String) -> Self {
        match s.as_str() {
            "CORRECT" => Answer::Correct,
            "ATTACK" => Answer::Attack,
            "IDK" => Answer::Idk,
            _ => Answer::Token(s),
        }
    }
}

impl From<Answer> for String {
    fn from(a: Answer) -> Self {
        a.as_str().to_owned()
    }
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simulated answering oracle over ground-truth roles: the worst-case
/// attacker succeeds whenever any malicious document reaches the model.
pub fn answer_for_roles(roles: &[Role]) -> Answer {
    if roles.iter().any(|r| r.is_malicious()) {
        Answer::Attack
    } else if roles.contains(&Role::BenignRelevant) {
        Answer::Correct
    } else {
        Answer::Idk
    }
}

/// Draws `T` contexts of `m` documents each, with replacement, from the
/// set's weights renormalized to a distribution over the surviving
/// documents.
///
/// Round `t` draws from a substream keyed by `t` alone, so rounds can be
/// sampled in any order or in parallel.
pub fn sample_contexts(set: &RetrievalSet, plan: &SamplingPlan) -> Result<Vec<Context>> {
    let docs = set.documents();
    let total: f64 = docs.iter().map(|d| d.weight).sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(
            "all surviving documents have zero weight".into(),
        ));
    }
    let weights: Vec<f64> = docs.iter().map(|d| d.weight / total).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidWeights(format!("cannot sample from weights: {e}")))?;

    let mut contexts = Vec::with_capacity(plan.rounds as usize);
    for round in 1..=plan.rounds {
        let mut rng = substream(plan.seed, &[DOMAIN_ROUND, round as u64]);
        let mut draws = Vec::with_capacity(plan.context_size as usize);
        let mut drawn_weights = Vec::with_capacity(plan.context_size as usize);
        let mut clean = true;
        for _ in 0..plan.context_size {
            let pos = dist.sample(&mut rng);
            draws.push(docs[pos].index);
            drawn_weights.push(weights[pos]);
            clean &= !docs[pos].role.is_malicious();
        }
        let mut rank_key = draws.clone();
        rank_key.sort_unstable();
        contexts.push(Context {
            round,
            draws,
            weights: drawn_weights,
            rank_key,
            clean,
        });
    }
    Ok(contexts)
}

/// Total order over contexts: ascending rank key, element-wise, with exact
/// key ties broken by round number. Returns indices into `contexts` from
/// highest-ranked to lowest.
pub fn rank_contexts(contexts: &[Context]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..contexts.len()).collect();
    order.sort_by(|&a, &b| {
        contexts[a]
            .rank_key
            .cmp(&contexts[b].rank_key)
            .then(contexts[a].round.cmp(&contexts[b].round))
    });
    order
}

/// Aggregated output of one sample-and-aggregate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateAnswer {
    /// Final answer over the union of chosen documents.
    pub answer: Answer,
    /// Rounds whose contexts were selected; empty only on abstention.
    pub chosen_contexts: Vec<u32>,
    /// Union of document indices across chosen contexts, deduplicated and
    /// ordered by rank.
    pub chosen_documents: Vec<u32>,
    /// Intermediate answer per round, in round order.
    pub provenance: Vec<(u32, Answer)>,
}

/// Rank-aware MIS aggregation over sampled contexts.
///
/// Contexts become graph vertices labeled by their rank position (1 =
/// highest-ranked context); a stochastic judge contradicts context pairs by
/// their clean/poisoned provenance with the usual error rates, while a trace
/// judge treats two differing non-IDK answer tokens as a contradiction. MIS
/// selection then picks the largest mutually consistent context set,
/// preferring higher-ranked contexts, and the final answer is produced over
/// the union of the chosen contexts' documents.
pub fn aggregate_mis(
    contexts: &[Context],
    answers: &[Answer],
    model: &JudgeModel,
    set: &RetrievalSet,
    pair_root: u64,
) -> Result<AggregateAnswer> {
    let (aggregate, _, _) = aggregate_mis_detailed(contexts, answers, model, set, pair_root)?;
    Ok(aggregate)
}

/// [`aggregate_mis`] plus the context graph and the rank-order permutation,
/// for audit output and simulation metrics. `rank_order[p]` is the index of
/// the context at vertex label `p + 1`.
pub fn aggregate_mis_detailed(
    contexts: &[Context],
    answers: &[Answer],
    model: &JudgeModel,
    set: &RetrievalSet,
    pair_root: u64,
) -> Result<(AggregateAnswer, ContradictionGraph, Vec<usize>)> {
    if contexts.len() != answers.len() {
        return Err(Error::Config(format!(
            "{} contexts but {} intermediate answers",
            contexts.len(),
            answers.len()
        )));
    }
    let t = contexts.len();
    if t == 0 {
        let empty = ContradictionGraph::new(vec![], &[])?;
        let abstain = AggregateAnswer {
            answer: Answer::Idk,
            chosen_contexts: Vec::new(),
            chosen_documents: Vec::new(),
            provenance: Vec::new(),
        };
        return Ok((abstain, empty, Vec::new()));
    }

    let rank_order = rank_contexts(contexts);
    let labels: Vec<u32> = (1..=t as u32).collect();
    let mut edges = Vec::new();
    for a in 0..t {
        for b in a + 1..t {
            let (ctx_a, ctx_b) = (&contexts[rank_order[a]], &contexts[rank_order[b]]);
            let (label_a, label_b) = (a as u64 + 1, b as u64 + 1);
            let edge = match &model.kind {
                JudgeKind::Stochastic {
                    false_edge_rate,
                    missed_edge_rate,
                    flip_noise,
                } => {
                    let mut rng = substream(pair_root, &[DOMAIN_CONTEXT_PAIR, label_a, label_b]);
                    stochastic_edge(
                        *false_edge_rate,
                        *missed_edge_rate,
                        *flip_noise,
                        !ctx_a.clean,
                        !ctx_b.clean,
                        &mut rng,
                    )
                }
                // Recorded answers judge themselves: differing non-IDK
                // tokens contradict, IDK contradicts nothing.
                JudgeKind::Trace(_) => {
                    let (ans_a, ans_b) = (&answers[rank_order[a]], &answers[rank_order[b]]);
                    *ans_a != Answer::Idk && *ans_b != Answer::Idk && ans_a != ans_b
                }
            };
            if edge {
                edges.push((label_a as u32, label_b as u32));
            }
        }
    }
    let graph = ContradictionGraph::new(labels, &edges)?;
    let selection: SelectionResult = select_mis(&graph)?;

    let chosen_indices: Vec<usize> = selection
        .chosen
        .iter()
        .map(|&label| rank_order[label as usize - 1])
        .collect();
    let mut chosen_contexts: Vec<u32> = chosen_indices.iter().map(|&i| contexts[i].round).collect();
    chosen_contexts.sort_unstable();

    let union: BTreeSet<u32> = chosen_indices
        .iter()
        .flat_map(|&i| contexts[i].draws.iter().copied())
        .collect();
    let chosen_documents: Vec<u32> = union.into_iter().collect();
    let union_roles: Vec<Role> = chosen_documents
        .iter()
        .filter_map(|&idx| set.role_of(idx))
        .collect();

    let aggregate = AggregateAnswer {
        answer: answer_for_roles(&union_roles),
        chosen_contexts,
        chosen_documents,
        provenance: contexts
            .iter()
            .zip(answers)
            .map(|(c, a)| (c.round, a.clone()))
            .collect(),
    };
    Ok((aggregate, graph, rank_order))
}
