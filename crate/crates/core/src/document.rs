//! Ranked documents, reliability weight schemes, and the relevance filter.
//!
//! A retrieval set is an ordered list of documents where rank 1 is the most
//! reliable. Reliability can be ordinal (rank only) or cardinal (normalized
//! weights, non-increasing in rank). Role labels are simulation ground truth:
//! selection logic never reads them, only the scoring and judging layers do.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance for "weights sum to 1" checks. Retrieval sets stay small enough
/// (a few hundred documents) that accumulation error never approaches this.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Ground-truth role of a document in a simulated retrieval set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Uncorrupted and on-topic.
    BenignRelevant,
    /// Corrupted by the adversary.
    Malicious,
    /// Uncorrupted but useless for the query.
    Irrelevant,
}

impl Role {
    /// Malicious or not; the judge's error model only distinguishes this.
    pub fn is_malicious(self) -> bool {
        matches!(self, Role::Malicious)
    }
}

/// One retrieved document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    /// 1-based retrieval rank; 1 is the most reliable.
    pub index: u32,
    /// Normalized reliability weight in `[0, 1]`.
    pub weight: f64,
    /// Simulation ground truth, hidden from selection logic.
    pub role: Role,
    /// Opaque text carried along in trace mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

/// An ordered retrieval set.
///
/// Freshly constructed sets have contiguous indices `1..=k` and weights that
/// are non-increasing and sum to 1. A set returned by [`relevance_filter`]
/// keeps the surviving documents' original indices and weights, so it may
/// have index gaps and a weight sum below 1; operations needing a
/// distribution renormalize explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSet {
    documents: Vec<Document>,
}

impl RetrievalSet {
    /// Builds a full retrieval set, validating the construction invariants:
    /// indices are exactly `1..=k`, weights are non-negative, non-increasing
    /// in rank, and sum to 1 within [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::InvalidWeights("retrieval set is empty".into()));
        }
        for (pos, doc) in documents.iter().enumerate() {
            if doc.index as usize != pos + 1 {
                return Err(Error::Config(format!(
                    "document at position {} has index {}; indices must be 1..=k with no gaps",
                    pos + 1,
                    doc.index
                )));
            }
            if doc.weight.is_nan() || doc.weight < 0.0 {
                return Err(Error::InvalidWeights(format!(
                    "document {} has negative weight {}",
                    doc.index, doc.weight
                )));
            }
        }
        for pair in documents.windows(2) {
            if pair[0].weight < pair[1].weight {
                return Err(Error::InvalidWeights(format!(
                    "weights must be non-increasing in rank; w({}) < w({})",
                    pair[0].index, pair[1].index
                )));
            }
        }
        let total: f64 = documents.iter().map(|d| d.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { documents })
    }

    /// Builds a set from role labels, deriving weights from `scheme`.
    pub fn from_roles(roles: &[Role], scheme: &WeightScheme) -> Result<Self> {
        let weights = make_weights(scheme, roles.len())?;
        let documents = roles
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(pos, (&role, weight))| Document {
                index: pos as u32 + 1,
                weight,
                role,
                payload: None,
            })
            .collect();
        Ok(Self { documents })
    }

    /// Construction path for filtered subsets; skips full-set validation.
    fn from_survivors(documents: Vec<Document>) -> Self {
        Self { documents }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Number of documents currently in the set.
    pub fn k(&self) -> usize {
        self.documents.len()
    }

    /// Number of malicious documents (simulation ground truth).
    pub fn k_malicious(&self) -> usize {
        self.documents
            .iter()
            .filter(|d| d.role.is_malicious())
            .count()
    }

    /// Total weight of malicious documents, after renormalizing the current
    /// weights to a distribution. This is the quantity the sampling bound
    /// calls the malicious weight.
    pub fn malicious_weight(&self) -> f64 {
        let total: f64 = self.documents.iter().map(|d| d.weight).sum();
        if total <= 0.0 {
            return 0.0;
        }
        self.documents
            .iter()
            .filter(|d| d.role.is_malicious())
            .map(|d| d.weight / total)
            .sum()
    }

    pub fn role_of(&self, index: u32) -> Option<Role> {
        self.documents
            .iter()
            .find(|d| d.index == index)
            .map(|d| d.role)
    }

    /// Relevance verdicts as the simulated judge produces them: an
    /// [`Role::Irrelevant`] document is always dropped, everything else kept.
    pub fn simulated_verdicts(&self) -> Vec<RelevanceVerdict> {
        self.documents
            .iter()
            .map(|d| {
                if d.role == Role::Irrelevant {
                    RelevanceVerdict::Drop
                } else {
                    RelevanceVerdict::Keep
                }
            })
            .collect()
    }
}

/// Relevance verdict for one document, from the judge abstraction
/// (simulated from roles, or recorded in a trace file).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceVerdict {
    Keep,
    Drop,
}

/// How reliability weights are assigned from ranks (or explicit scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Every document weighted `1/k`.
    Uniform,
    /// Raw weight `1 - i/k` for rank `i`; the last document gets exactly
    /// zero weight, so it stays in ordinal pipelines but can never be
    /// sampled.
    Linear,
    /// Raw weight `gamma^(i-1)` for rank `i`, `gamma` in `(0, 1)`.
    Exponential { gamma: f64 },
    /// Caller-supplied raw scores, non-negative and non-increasing.
    Explicit { scores: Vec<f64> },
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightScheme::Uniform => write!(f, "uniform"),
            WeightScheme::Linear => write!(f, "linear"),
            WeightScheme::Exponential { gamma } => write!(f, "exp:{gamma}"),
            WeightScheme::Explicit { scores } => write!(f, "explicit:{}", scores.len()),
        }
    }
}

/// Produces the length-`k` normalized weight vector for `scheme`.
///
/// The output is a probability vector, non-increasing in rank.
pub fn make_weights(scheme: &WeightScheme, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidWeights("k must be at least 1".into()));
    }
    let raw: Vec<f64> = match scheme {
        WeightScheme::Uniform => vec![1.0; k],
        WeightScheme::Linear => (1..=k).map(|i| 1.0 - i as f64 / k as f64).collect(),
        WeightScheme::Exponential { gamma } => {
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(Error::InvalidWeights(format!(
                    "exponential decay factor must lie in (0, 1), got {gamma}"
                )));
            }
            (0..k).map(|i| gamma.powi(i as i32)).collect()
        }
        WeightScheme::Explicit { scores } => {
            if scores.len() != k {
                return Err(Error::InvalidWeights(format!(
                    "explicit scores have length {}, expected {k}",
                    scores.len()
                )));
            }
            if scores.iter().any(|s| s.is_nan() || *s < 0.0) {
                return Err(Error::InvalidWeights(
                    "explicit scores must be non-negative".into(),
                ));
            }
            if scores.windows(2).any(|p| p[0] < p[1]) {
                return Err(Error::InvalidWeights(
                    "explicit scores must be non-increasing in rank".into(),
                ));
            }
            scores.clone()
        }
    };
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(
            "total raw score is zero; no document can carry weight".into(),
        ));
    }
    Ok(raw.into_iter().map(|r| r / total).collect())
}

/// Drops documents judged irrelevant, keeping survivors' original indices,
/// weights, and roles untouched. Weights are deliberately not renormalized
/// here; renormalization happens only where an operation requires a
/// distribution.
pub fn relevance_filter(set: &RetrievalSet, verdicts: &[RelevanceVerdict]) -> Result<RetrievalSet> {
    if verdicts.len() != set.k() {
        return Err(Error::Config(format!(
            "{} verdicts for {} documents",
            verdicts.len(),
            set.k()
        )));
    }
    let survivors: Vec<Document> = set
        .documents()
        .iter()
        .zip(verdicts)
        .filter(|(_, v)| **v == RelevanceVerdict::Keep)
        .map(|(d, _)| d.clone())
        .collect();
    if survivors.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(RetrievalSet::from_survivors(survivors))
}
