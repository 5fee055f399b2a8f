//! Trace files: offline model outputs replayed through the pipeline.
//!
//! A trace bundles the retrieval set, the recorded pairwise contradiction
//! probabilities, and optionally the recorded answer tokens, so a selection
//! run needs no live model at all. Schema (JSON, `schema_version` 1):
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "documents": [{"index": 1, "weight": 0.4, "role": "benign_relevant", "payload": "..."}],
//!   "matrix": {"k": 5, "beta": 0.5, "default_p": 0.0,
//!              "pairs": [{"i": 1, "j": 4, "p": 1.0}]},
//!   "relevance": ["keep", "keep", "drop", "keep", "keep"],
//!   "isolated_answers": ["paris", "paris", "IDK", "london", "paris"],
//!   "context_answers": {"1-2": "paris", "1-2-4": "paris"}
//! }
//! ```
//!
//! Document weights may be omitted wholesale, in which case the caller
//! names a weight scheme to fill them. Matrix pairs may be sparse only when
//! `default_p` is declared. `context_answers` keys are ascending document
//! indices joined by `-`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::{Document, RelevanceVerdict, RetrievalSet, Role, WeightScheme};
use crate::judge::{JudgeModel, TraceMatrix};
use crate::sampling::Answer;
use crate::{make_weights, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One document entry in a trace or document file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

/// One recorded pair probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: u32,
    pub j: u32,
    pub p: f64,
}

/// The recorded contradiction matrix with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSection {
    pub k: u32,
    pub beta: f64,
    pub pairs: Vec<PairRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_p: Option<f64>,
}

/// On-disk trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub schema_version: u32,
    pub documents: Vec<DocumentRecord>,
    pub matrix: MatrixSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Vec<RelevanceVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolated_answers: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_answers: Option<BTreeMap<String, String>>,
}

/// A validated in-memory trace.
#[derive(Debug, Clone)]
pub struct TraceBundle {
    pub set: RetrievalSet,
    pub judge: JudgeModel,
    pub relevance: Option<Vec<RelevanceVerdict>>,
    pub isolated_answers: Option<Vec<Answer>>,
    pub context_answers: Option<BTreeMap<String, Answer>>,
}

impl TraceBundle {
    /// Recorded answer for a context key; see [`context_key`].
    pub fn context_answer(&self, key: &str) -> Result<Answer> {
        self.context_answers
            .as_ref()
            .and_then(|m| m.get(key).cloned())
            .ok_or_else(|| Error::TraceIncomplete(format!("no recorded answer for context {key}")))
    }

    /// Recorded isolated answer for a document index.
    pub fn isolated_answer(&self, index: u32) -> Result<Answer> {
        self.isolated_answers
            .as_ref()
            .and_then(|answers| answers.get(index as usize - 1).cloned())
            .ok_or_else(|| {
                Error::TraceIncomplete(format!("no isolated answer for document {index}"))
            })
    }

    /// Relevance verdicts: recorded ones if present, else derived from roles.
    pub fn verdicts(&self) -> Vec<RelevanceVerdict> {
        self.relevance
            .clone()
            .unwrap_or_else(|| self.set.simulated_verdicts())
    }
}

/// Canonical key for a set of document indices: ascending, `-`-joined.
pub fn context_key(indices: &[u32]) -> String {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Parses and validates a trace file.
///
/// `fill_scheme` supplies weights when the file omits them; a file must
/// either carry weights for every document or for none.
pub fn parse_trace(json: &str, fill_scheme: Option<&WeightScheme>) -> Result<TraceBundle> {
    let file: TraceFile =
        serde_json::from_str(json).map_err(|e| Error::TraceInvalid(format!("bad JSON: {e}")))?;
    validate_trace(&file, fill_scheme)
}

/// Loads a trace file from disk.
pub fn load_trace(path: &Path, fill_scheme: Option<&WeightScheme>) -> Result<TraceBundle> {
    let json = std::fs::read_to_string(path)?;
    parse_trace(&json, fill_scheme)
}

/// Parses a standalone document file: a bare JSON array of document
/// records, weights optional as in the trace schema.
pub fn parse_documents(json: &str, fill_scheme: Option<&WeightScheme>) -> Result<RetrievalSet> {
    let records: Vec<DocumentRecord> =
        serde_json::from_str(json).map_err(|e| Error::TraceInvalid(format!("bad JSON: {e}")))?;
    documents_from_records(&records, fill_scheme)
}

/// Loads a standalone document file from disk.
pub fn load_documents(path: &Path, fill_scheme: Option<&WeightScheme>) -> Result<RetrievalSet> {
    let json = std::fs::read_to_string(path)?;
    parse_documents(&json, fill_scheme)
}

/// Serializes a retrieval set as a standalone document file.
pub fn documents_to_json(set: &RetrievalSet) -> Result<String> {
    let records: Vec<DocumentRecord> = set
        .documents()
        .iter()
        .map(|d| DocumentRecord {
            index: d.index,
            weight: Some(d.weight),
            role: d.role,
            payload: d.payload.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&records).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn documents_from_records(
    records: &[DocumentRecord],
    fill_scheme: Option<&WeightScheme>,
) -> Result<RetrievalSet> {
    let k = records.len();
    let with_weight = records.iter().filter(|d| d.weight.is_some()).count();
    let weights: Vec<f64> = if with_weight == k {
        records.iter().map(|d| d.weight.unwrap()).collect()
    } else if with_weight == 0 {
        let scheme = fill_scheme.ok_or_else(|| {
            Error::Config("document file omits weights and no fill scheme was named".into())
        })?;
        make_weights(scheme, k)?
    } else {
        return Err(Error::TraceInvalid(
            "weights must be recorded for every document or for none".into(),
        ));
    };
    let documents: Vec<Document> = records
        .iter()
        .zip(weights)
        .map(|(record, weight)| Document {
            index: record.index,
            weight,
            role: record.role,
            payload: record.payload.clone(),
        })
        .collect();
    RetrievalSet::new(documents)
}

fn validate_trace(file: &TraceFile, fill_scheme: Option<&WeightScheme>) -> Result<TraceBundle> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::TraceInvalid(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let k = file.documents.len();
    if file.matrix.k as usize != k {
        return Err(Error::TraceInvalid(format!(
            "matrix is over {} documents but the file lists {k}",
            file.matrix.k
        )));
    }

    let set = documents_from_records(&file.documents, fill_scheme)?;

    let pairs: Vec<(u32, u32, f64)> = file.matrix.pairs.iter().map(|p| (p.i, p.j, p.p)).collect();
    let matrix = TraceMatrix::from_pairs(k, &pairs, file.matrix.default_p)?;
    let judge = JudgeModel::trace(matrix, file.matrix.beta)?;

    if let Some(relevance) = &file.relevance {
        if relevance.len() != k {
            return Err(Error::TraceInvalid(format!(
                "{} relevance verdicts for {k} documents",
                relevance.len()
            )));
        }
    }
    if let Some(answers) = &file.isolated_answers {
        if answers.len() != k {
            return Err(Error::TraceInvalid(format!(
                "{} isolated answers for {k} documents",
                answers.len()
            )));
        }
    }

    Ok(TraceBundle {
        set,
        judge,
        relevance: file.relevance.clone(),
        isolated_answers: file
            .isolated_answers
            .as_ref()
            .map(|v| v.iter().cloned().map(Answer::from).collect()),
        context_answers: file.context_answers.as_ref().map(|m| {
            m.iter()
                .map(|(k, v)| (k.clone(), Answer::from(v.clone())))
                .collect()
        }),
    })
}
