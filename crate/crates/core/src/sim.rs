//! Seeded Monte Carlo engine for robustness scenarios.
//!
//! A scenario fixes the retrieval size, judge error rates, an attack
//! placement, and a pipeline (direct MIS selection or sample-and-aggregate).
//! Each trial assigns ground-truth roles, runs the full selection pipeline
//! against a freshly judged contradiction graph, and scores the outcome
//! against the roles. Two malicious-survival frequencies are reported: how
//! often *any* maximum independent set contains a malicious vertex (the
//! quantity the analytic bound caps) and how often the *chosen* set does
//! (the deployed pipeline's risk); the chosen set is itself maximum, so the
//! former dominates the latter trial by trial.
//!
//! Trials are independent and keyed by `(seed, trial index)`, so the engine
//! may fan them out across any number of workers and still aggregate to
//! identical results.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::{relevance_filter, RetrievalSet, Role, WeightScheme};
use crate::judge::{build_graph, JudgeModel};
use crate::mis::{any_maximum_contains, select_mis, SELECT_CAP};
use crate::rng::{subseed, substream, DOMAIN_ROLES, DOMAIN_TRIAL};
use crate::sampling::{
    aggregate_mis_detailed, answer_for_roles, sample_contexts, Answer, SamplingPlan,
};
use crate::{Error, Result};

/// Where the adversary's documents sit in the ranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    /// No corruption.
    None,
    /// Malicious documents at the listed 1-based positions.
    Positions(Vec<u32>),
    /// Malicious documents at the `count` lowest-ranked positions.
    Suffix(u32),
}

impl std::fmt::Display for Attack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Attack::None => write!(f, "none"),
            Attack::Positions(p) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                write!(f, "positions:{}", parts.join("+"))
            }
            Attack::Suffix(n) => write!(f, "suffix:{n}"),
        }
    }
}

/// Which selection pipeline the scenario exercises.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pipeline {
    /// Exact MIS over the whole (filtered) retrieval set.
    #[serde(rename = "direct")]
    DirectMis,
    /// Sample-and-aggregate with MIS over the sampled contexts.
    #[serde(rename = "sampling")]
    SamplingMis { rounds: u32, context_size: u32 },
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pipeline::DirectMis => write!(f, "direct"),
            Pipeline::SamplingMis {
                rounds,
                context_size,
            } => {
                write!(f, "sampling:{rounds}x{context_size}")
            }
        }
    }
}

/// Default trial count for scenarios.
pub const DEFAULT_TRIALS: u32 = 5000;

/// One Monte Carlo scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub k: u32,
    /// Probability a benign pair is wrongly judged contradictory.
    pub false_edge_rate: f64,
    /// Probability a benign/malicious pair escapes detection.
    pub missed_edge_rate: f64,
    /// Probability each final edge decision is inverted.
    #[serde(default)]
    pub flip_noise: f64,
    /// Probability a non-attacked position holds an irrelevant document,
    /// modelling corpus noise. Zero keeps the attack effect isolated.
    #[serde(default)]
    pub irrelevant_rate: f64,
    pub trials: u32,
    pub attack: Attack,
    pub pipeline: Pipeline,
    pub scheme: WeightScheme,
    pub seed: u64,
}

impl SimScenario {
    /// The named simulation preset: direct MIS over `k` documents with the
    /// `k_malicious` lowest-ranked positions corrupted, 5000 trials.
    pub fn mis_malicious_preset(
        k: u32,
        k_malicious: u32,
        false_edge_rate: f64,
        missed_edge_rate: f64,
        seed: u64,
    ) -> Self {
        SimScenario {
            k,
            false_edge_rate,
            missed_edge_rate,
            flip_noise: 0.0,
            irrelevant_rate: 0.0,
            trials: DEFAULT_TRIALS,
            attack: Attack::Suffix(k_malicious),
            pipeline: Pipeline::DirectMis,
            scheme: WeightScheme::Uniform,
            seed,
        }
    }

    /// The preset swept over every malicious count up to `k / 2`, one cell
    /// per count, each with its own derived seed.
    pub fn mis_malicious_grid(
        k: u32,
        false_edge_rate: f64,
        missed_edge_rate: f64,
        trials: u32,
        root_seed: u64,
    ) -> Vec<Self> {
        (0..=k / 2)
            .map(|k_malicious| {
                let mut cell = Self::mis_malicious_preset(
                    k,
                    k_malicious,
                    false_edge_rate,
                    missed_edge_rate,
                    subseed(root_seed, &[k as u64, k_malicious as u64]),
                );
                cell.trials = trials;
                cell
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        for (name, p) in [
            ("false_edge_rate", self.false_edge_rate),
            ("missed_edge_rate", self.missed_edge_rate),
            ("flip_noise", self.flip_noise),
            ("irrelevant_rate", self.irrelevant_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        match &self.attack {
            Attack::None => {}
            Attack::Positions(positions) => {
                let mut seen = HashSet::new();
                for &p in positions {
                    if p == 0 || p > self.k {
                        return Err(Error::Config(format!(
                            "attack position {p} outside 1..={}",
                            self.k
                        )));
                    }
                    if !seen.insert(p) {
                        return Err(Error::Config(format!("attack position {p} repeated")));
                    }
                }
            }
            Attack::Suffix(count) => {
                if *count > self.k {
                    return Err(Error::Config(format!(
                        "suffix attack of {count} documents exceeds k={}",
                        self.k
                    )));
                }
            }
        }
        match &self.pipeline {
            Pipeline::DirectMis => {
                if self.k as usize > SELECT_CAP {
                    return Err(Error::GraphTooLarge {
                        n: self.k as usize,
                        cap: SELECT_CAP,
                    });
                }
            }
            Pipeline::SamplingMis {
                rounds,
                context_size,
            } => {
                if *rounds == 0 || *context_size == 0 {
                    return Err(Error::Config(
                        "sampling pipeline needs at least one round and one document per context"
                            .into(),
                    ));
                }
                if *rounds as usize > SELECT_CAP {
                    return Err(Error::GraphTooLarge {
                        n: *rounds as usize,
                        cap: SELECT_CAP,
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of malicious documents this attack plants.
    pub fn k_malicious(&self) -> u32 {
        match &self.attack {
            Attack::None => 0,
            Attack::Positions(p) => p.len() as u32,
            Attack::Suffix(count) => *count,
        }
    }

    fn malicious_positions(&self) -> Vec<u32> {
        match &self.attack {
            Attack::None => Vec::new(),
            Attack::Positions(p) => p.clone(),
            Attack::Suffix(count) => (self.k - count + 1..=self.k).collect(),
        }
    }

    /// Stable identifier of this cell for resumable sweeps.
    pub fn cell_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.k,
            self.false_edge_rate,
            self.missed_edge_rate,
            self.flip_noise,
            self.irrelevant_rate,
            self.trials,
            self.attack,
            self.pipeline,
            self.scheme,
            self.seed,
        )
    }
}

/// A frequency with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqEstimate {
    pub successes: u32,
    pub trials: u32,
    /// Raw frequency `successes / trials`.
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl FreqEstimate {
    fn from_counts(successes: u32, trials: u32) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        FreqEstimate {
            successes,
            trials,
            p: successes as f64 / trials as f64,
            ci_low,
            ci_high,
        }
    }

    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    /// Standard error of the raw frequency.
    pub fn standard_error(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval; preferred over the normal approximation because
/// the interesting frequencies here sit near 0.
fn wilson_interval(successes: u32, trials: u32) -> (f64, f64) {
    const Z: f64 = 1.959963984540054; // 97.5th percentile of the standard normal
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Aggregated Monte Carlo output of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEstimate {
    pub trials: u32,
    /// Frequency that any maximum independent set contains a malicious
    /// vertex.
    pub malicious_in_mis: FreqEstimate,
    /// Frequency that the chosen set contains a malicious vertex.
    pub malicious_in_chosen: FreqEstimate,
    /// Frequency of a correct final answer.
    pub accuracy: FreqEstimate,
    /// Attack success rate: frequency of the attacker's target answer.
    pub asr: FreqEstimate,
    pub seed: u64,
}

/// Per-trial audit record, streamed as JSONL when requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAudit {
    pub trial: u32,
    pub roles: Vec<Role>,
    pub survivors: Vec<u32>,
    pub chosen_documents: Vec<u32>,
    /// Chosen context rounds; only for the sampling pipeline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_contexts: Option<Vec<u32>>,
    pub answer: Answer,
    pub malicious_in_mis: bool,
    pub malicious_in_chosen: bool,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    malicious_in_mis: u32,
    malicious_in_chosen: u32,
    correct: u32,
    attack: u32,
}

impl Counts {
    fn add(self, other: Counts) -> Counts {
        Counts {
            malicious_in_mis: self.malicious_in_mis + other.malicious_in_mis,
            malicious_in_chosen: self.malicious_in_chosen + other.malicious_in_chosen,
            correct: self.correct + other.correct,
            attack: self.attack + other.attack,
        }
    }

    fn of(audit: &TrialAudit) -> Counts {
        Counts {
            malicious_in_mis: audit.malicious_in_mis as u32,
            malicious_in_chosen: audit.malicious_in_chosen as u32,
            correct: (audit.answer == Answer::Correct) as u32,
            attack: (audit.answer == Answer::Attack) as u32,
        }
    }
}

fn run_trial(scenario: &SimScenario, trial: u32) -> Result<TrialAudit> {
    let mut roles = vec![Role::BenignRelevant; scenario.k as usize];
    for position in scenario.malicious_positions() {
        roles[position as usize - 1] = Role::Malicious;
    }
    if scenario.irrelevant_rate > 0.0 {
        use rand::Rng;
        let mut rng = substream(scenario.seed, &[DOMAIN_ROLES, trial as u64]);
        for role in roles.iter_mut() {
            // Attacked positions stay malicious; only benign slots can be noisy.
            if *role == Role::BenignRelevant && rng.gen::<f64>() < scenario.irrelevant_rate {
                *role = Role::Irrelevant;
            }
        }
    }
    let set = RetrievalSet::from_roles(&roles, &scenario.scheme)?;

    let survivors = match relevance_filter(&set, &set.simulated_verdicts()) {
        Ok(survivors) => survivors,
        Err(Error::EmptyAfterFilter) => {
            // Everything judged irrelevant: the pipeline abstains.
            return Ok(TrialAudit {
                trial,
                roles,
                survivors: Vec::new(),
                chosen_documents: Vec::new(),
                chosen_contexts: None,
                answer: Answer::Idk,
                malicious_in_mis: false,
                malicious_in_chosen: false,
            });
        }
        Err(e) => return Err(e),
    };

    let judge = JudgeModel::stochastic_with_noise(
        scenario.false_edge_rate,
        scenario.missed_edge_rate,
        scenario.flip_noise,
    )?;
    let trial_root = subseed(scenario.seed, &[DOMAIN_TRIAL, trial as u64]);
    let malicious_labels: Vec<u32> = survivors
        .documents()
        .iter()
        .filter(|d| d.role.is_malicious())
        .map(|d| d.index)
        .collect();

    match &scenario.pipeline {
        Pipeline::DirectMis => {
            let judged = build_graph(&survivors, &judge, trial_root)?;
            let selection = select_mis(&judged.graph)?;
            let malicious_in_chosen = selection
                .chosen
                .iter()
                .any(|idx| malicious_labels.contains(idx));
            let malicious_in_mis = any_maximum_contains(&judged.graph, &malicious_labels)?;
            let chosen_roles: Vec<Role> = selection
                .chosen
                .iter()
                .filter_map(|&idx| survivors.role_of(idx))
                .collect();
            Ok(TrialAudit {
                trial,
                roles,
                survivors: survivors.documents().iter().map(|d| d.index).collect(),
                chosen_documents: selection.chosen,
                chosen_contexts: None,
                answer: answer_for_roles(&chosen_roles),
                malicious_in_mis,
                malicious_in_chosen,
            })
        }
        Pipeline::SamplingMis {
            rounds,
            context_size,
        } => {
            let plan =
                SamplingPlan::new(*rounds, *context_size, scenario.scheme.clone(), trial_root)?;
            let contexts = sample_contexts(&survivors, &plan)?;
            let answers: Vec<Answer> = contexts
                .iter()
                .map(|ctx| {
                    let draw_roles: Vec<Role> = ctx
                        .draws
                        .iter()
                        .filter_map(|&idx| survivors.role_of(idx))
                        .collect();
                    answer_for_roles(&draw_roles)
                })
                .collect();
            let (aggregate, context_graph, rank_order) =
                aggregate_mis_detailed(&contexts, &answers, &judge, &survivors, trial_root)?;
            let poisoned_labels: Vec<u32> = rank_order
                .iter()
                .enumerate()
                .filter(|&(_, &ctx_idx)| !contexts[ctx_idx].clean)
                .map(|(rank_pos, _)| rank_pos as u32 + 1)
                .collect();
            let malicious_in_mis = any_maximum_contains(&context_graph, &poisoned_labels)?;
            let malicious_in_chosen = aggregate
                .chosen_documents
                .iter()
                .any(|idx| malicious_labels.contains(idx));
            Ok(TrialAudit {
                trial,
                roles,
                survivors: survivors.documents().iter().map(|d| d.index).collect(),
                chosen_documents: aggregate.chosen_documents,
                chosen_contexts: Some(aggregate.chosen_contexts),
                answer: aggregate.answer,
                malicious_in_mis,
                malicious_in_chosen,
            })
        }
    }
}

fn estimate_from(scenario: &SimScenario, counts: Counts) -> RobustnessEstimate {
    let n = scenario.trials;
    RobustnessEstimate {
        trials: n,
        malicious_in_mis: FreqEstimate::from_counts(counts.malicious_in_mis, n),
        malicious_in_chosen: FreqEstimate::from_counts(counts.malicious_in_chosen, n),
        accuracy: FreqEstimate::from_counts(counts.correct, n),
        asr: FreqEstimate::from_counts(counts.attack, n),
        seed: scenario.seed,
    }
}

/// Runs every trial of `scenario` and aggregates the frequencies.
///
/// Trials execute in parallel; aggregation sums integer counts, so the
/// result is identical for any worker count.
pub fn run_scenario(scenario: &SimScenario) -> Result<RobustnessEstimate> {
    scenario.validate()?;
    let counts = (0..scenario.trials)
        .into_par_iter()
        .map(|trial| run_trial(scenario, trial).map(|audit| Counts::of(&audit)))
        .try_reduce(Counts::default, |a, b| Ok(a.add(b)))?;
    Ok(estimate_from(scenario, counts))
}

/// [`run_scenario`] that also returns the per-trial audit records, in trial
/// order.
pub fn run_scenario_with_audit(
    scenario: &SimScenario,
) -> Result<(RobustnessEstimate, Vec<TrialAudit>)> {
    scenario.validate()?;
    let audits: Vec<TrialAudit> = (0..scenario.trials)
        .into_par_iter()
        .map(|trial| run_trial(scenario, trial))
        .collect::<Result<Vec<_>>>()?;
    let counts = audits
        .iter()
        .map(Counts::of)
        .fold(Counts::default(), Counts::add);
    Ok((estimate_from(scenario, counts), audits))
}

/// CSV header for sweep output.
pub const CSV_HEADER: [&str; 19] = [
    "k",
    "k_malicious",
    "false_edge_rate",
    "missed_edge_rate",
    "flip_noise",
    "irrelevant_rate",
    "attack",
    "pipeline",
    "scheme",
    "trials",
    "p_malicious_in_mis",
    "ci_malicious_in_mis",
    "p_malicious_in_chosen",
    "ci_malicious_in_chosen",
    "accuracy",
    "ci_accuracy",
    "asr",
    "ci_asr",
    "seed",
];

/// One CSV record for a completed cell.
pub fn csv_record(scenario: &SimScenario, estimate: &RobustnessEstimate) -> Vec<String> {
    vec![
        scenario.k.to_string(),
        scenario.k_malicious().to_string(),
        scenario.false_edge_rate.to_string(),
        scenario.missed_edge_rate.to_string(),
        scenario.flip_noise.to_string(),
        scenario.irrelevant_rate.to_string(),
        scenario.attack.to_string(),
        scenario.pipeline.to_string(),
        scenario.scheme.to_string(),
        scenario.trials.to_string(),
        estimate.malicious_in_mis.p.to_string(),
        estimate.malicious_in_mis.ci_half_width().to_string(),
        estimate.malicious_in_chosen.p.to_string(),
        estimate.malicious_in_chosen.ci_half_width().to_string(),
        estimate.accuracy.p.to_string(),
        estimate.accuracy.ci_half_width().to_string(),
        estimate.asr.p.to_string(),
        estimate.asr.ci_half_width().to_string(),
        scenario.seed.to_string(),
    ]
}

/// Streaming CSV sink for sweeps, resumable by cell key.
///
/// Opening an existing file reads back the keys of completed cells and
/// appends; a sweep then skips those cells instead of recomputing them.
pub struct CsvSweepSink {
    writer: csv::Writer<std::fs::File>,
    completed: HashSet<String>,
}

impl CsvSweepSink {
    pub fn open(path: &Path) -> Result<Self> {
        let mut completed = HashSet::new();
        let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
        if exists {
            let mut reader =
                csv::Reader::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
            for record in reader.records() {
                let record = record.map_err(|e| Error::Io(std::io::Error::other(e)))?;
                completed.insert(key_of_record(&record));
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(file);
        if !exists {
            writer
                .write_record(CSV_HEADER)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        Ok(Self { writer, completed })
    }

    pub fn completed(&self, key: &str) -> bool {
        self.completed.contains(key)
    }

    pub fn write(&mut self, scenario: &SimScenario, estimate: &RobustnessEstimate) -> Result<()> {
        self.writer
            .write_record(csv_record(scenario, estimate))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.writer.flush()?;
        self.completed.insert(scenario.cell_key());
        Ok(())
    }
}

/// Key columns of a written record, mirroring [`SimScenario::cell_key`].
fn key_of_record(record: &csv::StringRecord) -> String {
    let field = |i: usize| record.get(i).unwrap_or("");
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
        field(0),  // k
        field(2),  // false_edge_rate
        field(3),  // missed_edge_rate
        field(4),  // flip_noise
        field(5),  // irrelevant_rate
        field(9),  // trials
        field(6),  // attack
        field(7),  // pipeline
        field(8),  // scheme
        field(18), // seed
    )
}

/// Runs each grid cell not already present in the sink, streaming rows as
/// they complete. Returns the number of newly computed cells.
pub fn sweep(cells: &[SimScenario], sink: &mut CsvSweepSink) -> Result<usize> {
    let mut computed = 0;
    for cell in cells {
        if sink.completed(&cell.cell_key()) {
            continue;
        }
        let estimate = run_scenario(cell)?;
        sink.write(cell, &estimate)?;
        computed += 1;
    }
    Ok(computed)
}

/// Writes per-trial audit records as JSONL.
pub fn write_audit_jsonl<W: Write>(mut out: W, audits: &[TrialAudit]) -> Result<()> {
    for audit in audits {
        let line = serde_json::to_string(audit).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
