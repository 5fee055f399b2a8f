//! Pairwise contradiction judgments and contradiction-graph construction.
//!
//! Two judge models are supported. The stochastic model realizes the bounded
//! NLI error assumptions as exact rates: a benign pair is wrongly flagged
//! contradictory with probability `false_edge_rate`, a benign/malicious pair
//! escapes detection with probability `missed_edge_rate`, and a malicious
//! pair is never flagged (the adversarial worst case). The trace model
//! replays contradiction probabilities recorded offline by a real model and
//! thresholds them at `beta`.
//!
//! Judgments draw from substreams keyed by the canonical (lower, higher)
//! index pair, so the verdict for `(i, j)` and `(j, i)` is identical and
//! independent of judging order.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::document::{Document, RetrievalSet, Role};
use crate::mis::ContradictionGraph;
use crate::rng::{substream, DOMAIN_PAIR};
use crate::{Error, Result};

/// Default contradiction threshold.
pub const DEFAULT_BETA: f64 = 0.5;

/// A contradiction judge: an error model plus the edge threshold `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeModel {
    pub kind: JudgeKind,
    /// Edge threshold, strictly between 0 and 1. A pair is an edge when its
    /// contradiction probability is `>= beta` (closed at `beta`).
    pub beta: f64,
}

/// The source of contradiction probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum JudgeKind {
    /// Seeded error model over role pairs.
    Stochastic {
        /// Probability a benign pair is wrongly judged contradictory.
        false_edge_rate: f64,
        /// Probability a benign/malicious pair is not judged contradictory.
        missed_edge_rate: f64,
        /// Probability that any final edge decision is inverted, modelling
        /// degraded NLI output. Zero by default.
        flip_noise: f64,
    },
    /// Precomputed probabilities recorded from a real model.
    Trace(TraceMatrix),
}

impl JudgeModel {
    /// Stochastic judge with the default `beta` and no flip noise.
    pub fn stochastic(false_edge_rate: f64, missed_edge_rate: f64) -> Result<Self> {
        Self::build(false_edge_rate, missed_edge_rate, 0.0, DEFAULT_BETA)
    }

    /// Stochastic judge with explicit flip noise.
    pub fn stochastic_with_noise(
        false_edge_rate: f64,
        missed_edge_rate: f64,
        flip_noise: f64,
    ) -> Result<Self> {
        Self::build(false_edge_rate, missed_edge_rate, flip_noise, DEFAULT_BETA)
    }

    fn build(eps1: f64, eps2: f64, flip: f64, beta: f64) -> Result<Self> {
        for (name, p) in [
            ("false_edge_rate", eps1),
            ("missed_edge_rate", eps2),
            ("flip_noise", flip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let model = Self {
            kind: JudgeKind::Stochastic {
                false_edge_rate: eps1,
                missed_edge_rate: eps2,
                flip_noise: flip,
            },
            beta,
        };
        model.check_beta()?;
        Ok(model)
    }

    /// Trace judge replaying `matrix` with the threshold recorded alongside it.
    pub fn trace(matrix: TraceMatrix, beta: f64) -> Result<Self> {
        let model = Self {
            kind: JudgeKind::Trace(matrix),
            beta,
        };
        model.check_beta()?;
        Ok(model)
    }

    fn check_beta(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie strictly inside (0, 1), got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Symmetric matrix of recorded contradiction probabilities.
///
/// Entries may be sparse only when a default probability is declared.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    k: usize,
    entries: HashMap<(u32, u32), f64>,
    default_p: Option<f64>,
}

impl TraceMatrix {
    /// Builds a matrix from `(i, j, p)` pair records over documents `1..=k`.
    ///
    /// Records may list a pair in either orientation; listing both with
    /// different probabilities is an asymmetry error.
    pub fn from_pairs(k: usize, pairs: &[(u32, u32, f64)], default_p: Option<f64>) -> Result<Self> {
        if let Some(p) = default_p {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::TraceInvalid(format!(
                    "default probability {p} outside [0, 1]"
                )));
            }
        }
        let mut entries = HashMap::new();
        for &(i, j, p) in pairs {
            if i == j {
                return Err(Error::TraceInvalid(format!("self-pair ({i}, {j})")));
            }
            if i == 0 || j == 0 || i as usize > k || j as usize > k {
                return Err(Error::TraceInvalid(format!(
                    "pair ({i}, {j}) outside document range 1..={k}"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::TraceInvalid(format!(
                    "probability {p} for pair ({i}, {j}) outside [0, 1]"
                )));
            }
            let key = (i.min(j), i.max(j));
            if let Some(&prev) = entries.get(&key) {
                if prev != p {
                    return Err(Error::TraceInvalid(format!(
                        "asymmetric matrix: p({}, {}) recorded as both {prev} and {p}",
                        key.0, key.1
                    )));
                }
            }
            entries.insert(key, p);
        }
        Ok(Self {
            k,
            entries,
            default_p,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of explicitly recorded pairs.
    pub fn recorded_pairs(&self) -> usize {
        self.entries.len()
    }

    /// Probability for the unordered pair `(i, j)`.
    pub fn probability(&self, i: u32, j: u32) -> Result<f64> {
        let key = (i.min(j), i.max(j));
        self.entries
            .get(&key)
            .copied()
            .or(self.default_p)
            .ok_or_else(|| {
                Error::TraceIncomplete(format!(
                    "no probability recorded for pair ({}, {}) and no default declared",
                    key.0, key.1
                ))
            })
    }
}

/// Outcome of judging one unordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    /// Lower document index of the pair.
    pub i: u32,
    /// Higher document index of the pair.
    pub j: u32,
    /// Contradiction probability backing the decision. Stochastic judgments
    /// record the realized outcome as a degenerate 0/1 probability so that
    /// `is_edge == (probability >= beta)` holds for every record.
    pub probability: f64,
    pub is_edge: bool,
    /// Role pair in `(i, j)` order; simulation provenance.
    pub roles: (Role, Role),
}

/// Judges one document pair, drawing from `rng` for stochastic models.
///
/// The pair is canonicalized to `(lower, higher)` index order first, so the
/// verdict does not depend on argument order as long as the caller derives
/// `rng` from the canonical pair key (as [`build_graph`] does).
pub fn judge_pair<R: Rng>(
    model: &JudgeModel,
    a: &Document,
    b: &Document,
    rng: &mut R,
) -> Result<JudgmentRecord> {
    let (lo, hi) = if a.index <= b.index { (a, b) } else { (b, a) };
    let (probability, is_edge) = match &model.kind {
        JudgeKind::Stochastic {
            false_edge_rate,
            missed_edge_rate,
            flip_noise,
        } => {
            let edge = stochastic_edge(
                *false_edge_rate,
                *missed_edge_rate,
                *flip_noise,
                lo.role.is_malicious(),
                hi.role.is_malicious(),
                rng,
            );
            (if edge { 1.0 } else { 0.0 }, edge)
        }
        JudgeKind::Trace(matrix) => {
            let p = matrix.probability(lo.index, hi.index)?;
            (p, p >= model.beta)
        }
    };
    Ok(JudgmentRecord {
        i: lo.index,
        j: hi.index,
        probability,
        is_edge,
        roles: (lo.role, hi.role),
    })
}

/// One stochastic edge decision over a role pair. Errors are drawn
/// independently per pair; the flip is a second independent draw.
pub(crate) fn stochastic_edge<R: Rng>(
    false_edge_rate: f64,
    missed_edge_rate: f64,
    flip_noise: f64,
    a_malicious: bool,
    b_malicious: bool,
    rng: &mut R,
) -> bool {
    let edge_prob = match (a_malicious, b_malicious) {
        (false, false) => false_edge_rate,
        (true, true) => 0.0, // worst case: malicious documents never contradict each other
        _ => 1.0 - missed_edge_rate,
    };
    let mut edge = rng.gen::<f64>() < edge_prob;
    if flip_noise > 0.0 && rng.gen::<f64>() < flip_noise {
        edge = !edge;
    }
    edge
}

/// A contradiction graph together with the judgments that produced it.
#[derive(Debug, Clone)]
pub struct JudgedGraph {
    pub graph: ContradictionGraph,
    pub records: Vec<JudgmentRecord>,
}

/// Builds the contradiction graph over `set`, judging every unordered pair
/// exactly once.
///
/// `pair_root` seeds the per-pair substreams, keyed by the canonical
/// document index pair; callers running many trials derive one root per
/// trial. Pairs may therefore be judged in any order, or concurrently,
/// without changing the result.
pub fn build_graph(set: &RetrievalSet, model: &JudgeModel, pair_root: u64) -> Result<JudgedGraph> {
    let docs = set.documents();
    if docs.is_empty() {
        return Err(Error::Config(
            "cannot build a graph over an empty set".into(),
        ));
    }
    let labels: Vec<u32> = docs.iter().map(|d| d.index).collect();
    let mut edges = Vec::new();
    let mut records = Vec::with_capacity(docs.len() * (docs.len() - 1) / 2);
    for (a_pos, a) in docs.iter().enumerate() {
        for b in &docs[a_pos + 1..] {
            let mut rng = substream(pair_root, &[DOMAIN_PAIR, a.index as u64, b.index as u64]);
            let record = judge_pair(model, a, b, &mut rng)?;
            if record.is_edge {
                edges.push((record.i, record.j));
            }
            records.push(record);
        }
    }
    let graph = ContradictionGraph::new(labels, &edges)?;
    Ok(JudgedGraph { graph, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::WeightScheme;

    fn doc(index: u32, role: Role) -> Document {
        Document {
            index,
            weight: 0.0,
            role,
            payload: None,
        }
    }

    #[test]
    fn perfect_judge_flags_every_benign_malicious_pair() {
        let model = JudgeModel::stochastic(0.0, 0.0).unwrap();
        for seed in 0..200 {
            let mut rng = substream(seed, &[DOMAIN_PAIR, 1, 2]);
            let rec = judge_pair(
                &model,
                &doc(1, Role::BenignRelevant),
                &doc(2, Role::Malicious),
                &mut rng,
            )
            .unwrap();
            assert!(rec.is_edge);
        }
    }

    #[test]
    fn malicious_pairs_never_contradict() {
        let model = JudgeModel::stochastic(0.0, 0.0).unwrap();
        for seed in 0..200 {
            let mut rng = substream(seed, &[DOMAIN_PAIR, 1, 2]);
            let rec = judge_pair(
                &model,
                &doc(1, Role::Malicious),
                &doc(2, Role::Malicious),
                &mut rng,
            )
            .unwrap();
            assert!(!rec.is_edge);
        }
    }

    #[test]
    fn trace_thresholds_at_beta() {
        let matrix =
            TraceMatrix::from_pairs(3, &[(1, 2, 0.73), (1, 3, 0.5), (2, 3, 0.49)], None).unwrap();
        let model = JudgeModel::trace(matrix, 0.5).unwrap();
        let mut rng = substream(0, &[0]);
        let rec = judge_pair(
            &model,
            &doc(1, Role::BenignRelevant),
            &doc(2, Role::BenignRelevant),
            &mut rng,
        )
        .unwrap();
        assert!(rec.is_edge);
        // Closed at beta: p == beta is an edge.
        let rec = judge_pair(
            &model,
            &doc(1, Role::BenignRelevant),
            &doc(3, Role::BenignRelevant),
            &mut rng,
        )
        .unwrap();
        assert!(rec.is_edge);
        let rec = judge_pair(
            &model,
            &doc(2, Role::BenignRelevant),
            &doc(3, Role::BenignRelevant),
            &mut rng,
        )
        .unwrap();
        assert!(!rec.is_edge);
    }

    #[test]
    fn judgment_is_symmetric_in_argument_order() {
        let model = JudgeModel::stochastic(0.3, 0.3).unwrap();
        let a = doc(4, Role::BenignRelevant);
        let b = doc(7, Role::Malicious);
        for seed in 0..100 {
            let mut r1 = substream(seed, &[DOMAIN_PAIR, 4, 7]);
            let mut r2 = substream(seed, &[DOMAIN_PAIR, 4, 7]);
            let fwd = judge_pair(&model, &a, &b, &mut r1).unwrap();
            let rev = judge_pair(&model, &b, &a, &mut r2).unwrap();
            assert_eq!(fwd, rev);
        }
    }

    #[test]
    fn missing_trace_pair_without_default_is_incomplete() {
        let matrix = TraceMatrix::from_pairs(3, &[(1, 2, 0.9)], None).unwrap();
        let model = JudgeModel::trace(matrix, 0.5).unwrap();
        let mut rng = substream(0, &[0]);
        let out = judge_pair(
            &model,
            &doc(1, Role::BenignRelevant),
            &doc(3, Role::BenignRelevant),
            &mut rng,
        );
        assert!(matches!(out, Err(Error::TraceIncomplete(_))));
    }

    #[test]
    fn sparse_trace_with_default_fills_gaps() {
        let matrix = TraceMatrix::from_pairs(3, &[(1, 2, 0.9)], Some(0.0)).unwrap();
        assert_eq!(matrix.probability(1, 3).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_trace_rejected() {
        let out = TraceMatrix::from_pairs(3, &[(1, 2, 0.9), (2, 1, 0.2)], None);
        assert!(matches!(out, Err(Error::TraceInvalid(_))));
        // Same probability in both orientations is fine.
        assert!(TraceMatrix::from_pairs(3, &[(1, 2, 0.9), (2, 1, 0.9)], None).is_ok());
    }

    #[test]
    fn trace_range_checks() {
        assert!(TraceMatrix::from_pairs(3, &[(1, 2, 1.2)], None).is_err());
        assert!(TraceMatrix::from_pairs(3, &[(1, 4, 0.5)], None).is_err());
        assert!(TraceMatrix::from_pairs(3, &[(2, 2, 0.5)], None).is_err());
    }

    #[test]
    fn beta_must_be_interior() {
        let matrix = TraceMatrix::from_pairs(2, &[(1, 2, 0.5)], None).unwrap();
        assert!(JudgeModel::trace(matrix.clone(), 0.0).is_err());
        assert!(JudgeModel::trace(matrix, 1.0).is_err());
    }

    #[test]
    fn flip_noise_one_inverts_perfect_decisions() {
        let model = JudgeModel::stochastic_with_noise(0.0, 0.0, 1.0).unwrap();
        let mut rng = substream(9, &[DOMAIN_PAIR, 1, 2]);
        let rec = judge_pair(
            &model,
            &doc(1, Role::BenignRelevant),
            &doc(2, Role::Malicious),
            &mut rng,
        )
        .unwrap();
        assert!(!rec.is_edge);
        let mut rng = substream(9, &[DOMAIN_PAIR, 1, 2]);
        let rec = judge_pair(
            &model,
            &doc(1, Role::Malicious),
            &doc(2, Role::Malicious),
            &mut rng,
        )
        .unwrap();
        assert!(rec.is_edge);
    }

    #[test]
    fn perfect_graph_k3_forces_benign_malicious_edges() {
        let set = RetrievalSet::from_roles(
            &[Role::BenignRelevant, Role::BenignRelevant, Role::Malicious],
            &WeightScheme::Uniform,
        )
        .unwrap();
        let model = JudgeModel::stochastic(0.0, 0.0).unwrap();
        let judged = build_graph(&set, &model, 11).unwrap();
        assert!(judged.graph.has_edge_between(1, 3));
        assert!(judged.graph.has_edge_between(2, 3));
        assert!(!judged.graph.has_edge_between(1, 2));
        assert_eq!(judged.records.len(), 3);
    }

    #[test]
    fn single_document_graph_has_no_edges() {
        let set =
            RetrievalSet::from_roles(&[Role::BenignRelevant], &WeightScheme::Uniform).unwrap();
        let model = JudgeModel::stochastic(0.5, 0.5).unwrap();
        let judged = build_graph(&set, &model, 3).unwrap();
        assert_eq!(judged.graph.n(), 1);
        assert!(judged.records.is_empty());
    }

    #[test]
    fn identical_seed_reproduces_graph() {
        let set = RetrievalSet::from_roles(
            &[
                Role::BenignRelevant,
                Role::Malicious,
                Role::BenignRelevant,
                Role::Malicious,
            ],
            &WeightScheme::Uniform,
        )
        .unwrap();
        let model = JudgeModel::stochastic(0.3, 0.4).unwrap();
        let a = build_graph(&set, &model, 77).unwrap();
        let b = build_graph(&set, &model, 77).unwrap();
        assert_eq!(a.records, b.records);
        let c = build_graph(&set, &model, 78).unwrap();
        assert!(a.records != c.records || a.records.iter().all(|r| r.probability == 0.0));
    }

    #[test]
    fn empirical_rates_match_model() {
        // Benign-benign edges appear at the false-edge rate, benign-malicious
        // non-edges at the missed-edge rate, within 3 standard errors.
        let eps1 = 0.05;
        let eps2 = 0.2;
        let model = JudgeModel::stochastic(eps1, eps2).unwrap();
        let trials = 100_000u32;
        let mut bb_edges = 0u32;
        let mut bm_misses = 0u32;
        for t in 0..trials {
            let mut rng = substream(2024, &[DOMAIN_PAIR, t as u64, 1, 2]);
            let rec = judge_pair(
                &model,
                &doc(1, Role::BenignRelevant),
                &doc(2, Role::BenignRelevant),
                &mut rng,
            )
            .unwrap();
            bb_edges += rec.is_edge as u32;
            let mut rng = substream(2024, &[DOMAIN_PAIR, t as u64, 1, 3]);
            let rec = judge_pair(
                &model,
                &doc(1, Role::BenignRelevant),
                &doc(3, Role::Malicious),
                &mut rng,
            )
            .unwrap();
            bm_misses += (!rec.is_edge) as u32;
        }
        let n = trials as f64;
        let bb_rate = bb_edges as f64 / n;
        let bm_rate = bm_misses as f64 / n;
        let se1 = (eps1 * (1.0 - eps1) / n).sqrt();
        let se2 = (eps2 * (1.0 - eps2) / n).sqrt();
        assert!(
            (bb_rate - eps1).abs() <= 3.0 * se1,
            "benign edge rate {bb_rate}"
        );
        assert!(
            (bm_rate - eps2).abs() <= 3.0 * se2,
            "missed edge rate {bm_rate}"
        );
    }
}
