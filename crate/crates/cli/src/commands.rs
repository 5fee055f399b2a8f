//! Command implementations. Each executes one [`ResolvedCommand`] into an
//! output directory and returns the names of the files it wrote; results
//! are fully determined by the resolved config, never by worker count or
//! timing.

use std::path::Path;

use serde::Serialize;

use ragsift::bounds::{min_rounds, mis_failure_bound, regime_check, sampling_failure_prob};
use ragsift::document::{relevance_filter, RetrievalSet, Role, WeightScheme};
use ragsift::judge::{build_graph, JudgmentRecord};
use ragsift::mis::select_mis;
use ragsift::sampling::{aggregate_mis, answer_for_roles, sample_contexts, Answer, SamplingPlan};
use ragsift::sim::{
    csv_record, run_scenario, run_scenario_with_audit, sweep, CsvSweepSink, RobustnessEstimate,
    SimScenario, CSV_HEADER,
};
use ragsift::trace::{context_key, load_documents, load_trace, TraceBundle, SCHEMA_VERSION};
use ragsift::{Error, Result};

use crate::config::{ResolvedCommand, SelectionInput};

pub fn execute(command: &ResolvedCommand, out_dir: &Path) -> Result<Vec<String>> {
    match command {
        ResolvedCommand::Select {
            input,
            scheme,
            seed,
        } => run_select(input, scheme.as_ref(), *seed, out_dir),
        ResolvedCommand::Sample {
            input,
            rounds,
            context_size,
            scheme,
            seed,
        } => run_sample(
            input,
            *rounds,
            *context_size,
            scheme.as_ref(),
            *seed,
            out_dir,
        ),
        ResolvedCommand::BoundMis { params } => {
            params.validate()?;
            let regime = regime_check(params);
            let report = BoundMisReport {
                schema_version: SCHEMA_VERSION,
                params: *params,
                regime_ok: regime.ok,
                regime,
                bound: mis_failure_bound(params)?,
            };
            write_json_report(out_dir, "bound.json", &report)
        }
        ResolvedCommand::BoundSampling {
            params,
            target_delta,
        } => {
            let failure = sampling_failure_prob(params)?;
            let rounds_needed = match target_delta {
                Some(target) => Some(min_rounds(
                    params.malicious_weight,
                    params.context_size,
                    params.tolerance,
                    *target,
                )?),
                None => None,
            };
            let report = BoundSamplingReport {
                schema_version: SCHEMA_VERSION,
                params: *params,
                p_clean: failure.p_clean,
                margin: failure.margin,
                delta: failure.delta,
                warning: failure.warning,
                target_delta: *target_delta,
                min_rounds: rounds_needed,
            };
            write_json_report(out_dir, "bound.json", &report)
        }
        ResolvedCommand::Simulate { scenario, audit } => run_simulate(scenario, *audit, out_dir),
        ResolvedCommand::Sweep { csv_name, cells } => run_sweep(csv_name, cells, out_dir),
    }
}

#[derive(Serialize)]
struct BoundMisReport {
    schema_version: u32,
    params: ragsift::bounds::MisBoundParams,
    regime_ok: bool,
    /// Per-hypothesis margins behind `regime_ok`.
    regime: ragsift::bounds::RegimeReport,
    #[serde(flatten)]
    bound: ragsift::bounds::MisFailureBound,
}

#[derive(Serialize)]
struct BoundSamplingReport {
    schema_version: u32,
    params: ragsift::bounds::SamplingBoundParams,
    p_clean: f64,
    margin: f64,
    delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_rounds: Option<u64>,
}

#[derive(Serialize)]
struct SelectReport {
    schema_version: u32,
    abstained: bool,
    survivors: Vec<u32>,
    chosen: Vec<u32>,
    size: usize,
    all_maximum: Vec<Vec<u32>>,
    truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    answer: Option<Answer>,
    judgments: Vec<JudgmentRecord>,
}

fn abstained_select_report() -> SelectReport {
    SelectReport {
        schema_version: SCHEMA_VERSION,
        abstained: true,
        survivors: Vec::new(),
        chosen: Vec::new(),
        size: 0,
        all_maximum: Vec::new(),
        truncated: false,
        answer: Some(Answer::Idk),
        judgments: Vec::new(),
    }
}

/// A loaded selection input: the document set, the judge to run over it,
/// and the trace bundle when answers were recorded.
struct LoadedInput {
    set: RetrievalSet,
    judge: ragsift::judge::JudgeModel,
    bundle: Option<TraceBundle>,
}

impl LoadedInput {
    fn load(input: &SelectionInput, scheme: Option<&WeightScheme>) -> Result<Self> {
        match input {
            SelectionInput::Trace { path } => {
                let bundle = load_trace(path, scheme)?;
                Ok(LoadedInput {
                    set: bundle.set.clone(),
                    judge: bundle.judge.clone(),
                    bundle: Some(bundle),
                })
            }
            SelectionInput::Stochastic {
                docs,
                eps1,
                eps2,
                flip_noise,
            } => Ok(LoadedInput {
                set: load_documents(docs, scheme)?,
                judge: ragsift::judge::JudgeModel::stochastic_with_noise(
                    *eps1,
                    *eps2,
                    *flip_noise,
                )?,
                bundle: None,
            }),
        }
    }

    fn verdicts(&self) -> Vec<ragsift::document::RelevanceVerdict> {
        match &self.bundle {
            Some(bundle) => bundle.verdicts(),
            None => self.set.simulated_verdicts(),
        }
    }
}

fn run_select(
    input: &SelectionInput,
    scheme: Option<&WeightScheme>,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<String>> {
    let loaded = LoadedInput::load(input, scheme)?;
    let report = match relevance_filter(&loaded.set, &loaded.verdicts()) {
        Err(Error::EmptyAfterFilter) => abstained_select_report(),
        Err(e) => return Err(e),
        Ok(survivors) => {
            let judged = build_graph(&survivors, &loaded.judge, seed)?;
            let selection = select_mis(&judged.graph)?;
            // Final answer: the recorded token when the trace carries
            // answers, the role oracle for stochastic runs, otherwise
            // left out.
            let answer = match &loaded.bundle {
                Some(bundle) if bundle.context_answers.is_some() => {
                    Some(bundle.context_answer(&context_key(&selection.chosen))?)
                }
                Some(_) => None,
                None => {
                    let roles: Vec<Role> = selection
                        .chosen
                        .iter()
                        .filter_map(|&i| survivors.role_of(i))
                        .collect();
                    Some(answer_for_roles(&roles))
                }
            };
            SelectReport {
                schema_version: SCHEMA_VERSION,
                abstained: false,
                survivors: survivors.documents().iter().map(|d| d.index).collect(),
                chosen: selection.chosen,
                size: selection.size,
                all_maximum: selection.all_maximum,
                truncated: selection.truncated,
                answer,
                judgments: judged.records,
            }
        }
    };
    if report.abstained {
        println!("abstained: no documents survived the relevance filter");
    } else {
        println!("chosen: {:?}", report.chosen);
    }
    write_json_report(out_dir, "report.json", &report)
}

#[derive(Serialize)]
struct SampleContextReport {
    round: u32,
    draws: Vec<u32>,
    rank_key: Vec<u32>,
    answer: Answer,
}

#[derive(Serialize)]
struct SampleReport {
    schema_version: u32,
    abstained: bool,
    rounds: u32,
    context_size: u32,
    contexts: Vec<SampleContextReport>,
    chosen_contexts: Vec<u32>,
    chosen_documents: Vec<u32>,
    answer: Answer,
}

fn intermediate_answer(
    bundle: Option<&TraceBundle>,
    set: &RetrievalSet,
    draws: &[u32],
) -> Result<Answer> {
    match bundle {
        Some(bundle) if bundle.context_answers.is_some() => {
            bundle.context_answer(&context_key(draws))
        }
        _ => {
            let roles: Vec<Role> = draws.iter().filter_map(|&i| set.role_of(i)).collect();
            Ok(answer_for_roles(&roles))
        }
    }
}

fn run_sample(
    input: &SelectionInput,
    rounds: u32,
    context_size: u32,
    scheme: Option<&WeightScheme>,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<String>> {
    let loaded = LoadedInput::load(input, scheme)?;
    let survivors = match relevance_filter(&loaded.set, &loaded.verdicts()) {
        Err(Error::EmptyAfterFilter) => {
            let report = SampleReport {
                schema_version: SCHEMA_VERSION,
                abstained: true,
                rounds,
                context_size,
                contexts: Vec::new(),
                chosen_contexts: Vec::new(),
                chosen_documents: Vec::new(),
                answer: Answer::Idk,
            };
            println!("abstained: no documents survived the relevance filter");
            return write_json_report(out_dir, "report.json", &report);
        }
        other => other?,
    };

    // The draw distribution is the surviving documents' recorded weights;
    // echo them as an explicit scheme.
    let scores: Vec<f64> = survivors.documents().iter().map(|d| d.weight).collect();
    let plan = SamplingPlan::new(
        rounds,
        context_size,
        WeightScheme::Explicit { scores },
        seed,
    )?;
    let contexts = sample_contexts(&survivors, &plan)?;
    let answers: Vec<Answer> = contexts
        .iter()
        .map(|ctx| intermediate_answer(loaded.bundle.as_ref(), &survivors, &ctx.draws))
        .collect::<Result<_>>()?;
    let mut aggregate = aggregate_mis(&contexts, &answers, &loaded.judge, &survivors, seed)?;
    if let Some(bundle) = &loaded.bundle {
        if bundle.context_answers.is_some() && !aggregate.chosen_documents.is_empty() {
            aggregate.answer = bundle.context_answer(&context_key(&aggregate.chosen_documents))?;
        }
    }

    let report = SampleReport {
        schema_version: SCHEMA_VERSION,
        abstained: false,
        rounds,
        context_size,
        contexts: contexts
            .iter()
            .zip(&answers)
            .map(|(ctx, answer)| SampleContextReport {
                round: ctx.round,
                draws: ctx.draws.clone(),
                rank_key: ctx.rank_key.clone(),
                answer: answer.clone(),
            })
            .collect(),
        chosen_contexts: aggregate.chosen_contexts,
        chosen_documents: aggregate.chosen_documents,
        answer: aggregate.answer,
    };
    println!(
        "chosen contexts: {:?}; documents: {:?}; answer: {}",
        report.chosen_contexts, report.chosen_documents, report.answer
    );
    write_json_report(out_dir, "report.json", &report)
}

fn run_simulate(scenario: &SimScenario, audit: bool, out_dir: &Path) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let estimate = if audit {
        let (estimate, audits) = run_scenario_with_audit(scenario)?;
        let file = std::fs::File::create(out_dir.join("audit.jsonl"))?;
        ragsift::sim::write_audit_jsonl(std::io::BufWriter::new(file), &audits)?;
        outputs.push("audit.jsonl".to_string());
        estimate
    } else {
        run_scenario(scenario)?
    };

    let json = serde_json::to_string_pretty(&estimate).map_err(std::io::Error::other)?;
    std::fs::write(out_dir.join("estimate.json"), json + "\n")?;
    outputs.push("estimate.json".to_string());

    let mut writer = csv::Writer::from_path(out_dir.join("results.csv"))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_record(CSV_HEADER)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_record(csv_record(scenario, &estimate))
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer.flush()?;
    outputs.push("results.csv".to_string());

    print_estimate(scenario, &estimate);
    Ok(outputs)
}

fn run_sweep(csv_name: &str, cells: &[SimScenario], out_dir: &Path) -> Result<Vec<String>> {
    for cell in cells {
        cell.validate()?;
    }
    let path = out_dir.join(csv_name);
    let mut sink = CsvSweepSink::open(&path)?;
    let computed = sweep(cells, &mut sink)?;
    println!(
        "{}: {computed} cells computed, {} resumed",
        path.display(),
        cells.len() - computed
    );
    Ok(vec![csv_name.to_string()])
}

fn print_estimate(scenario: &SimScenario, estimate: &RobustnessEstimate) {
    println!(
        "k={} attack={} pipeline={} trials={}",
        scenario.k, scenario.attack, scenario.pipeline, estimate.trials
    );
    println!(
        "  p(malicious in any MIS) = {:.4} ± {:.4}",
        estimate.malicious_in_mis.p,
        estimate.malicious_in_mis.ci_half_width()
    );
    println!(
        "  p(malicious in chosen)  = {:.4} ± {:.4}",
        estimate.malicious_in_chosen.p,
        estimate.malicious_in_chosen.ci_half_width()
    );
    println!(
        "  accuracy = {:.4} ± {:.4}   asr = {:.4} ± {:.4}",
        estimate.accuracy.p,
        estimate.accuracy.ci_half_width(),
        estimate.asr.p,
        estimate.asr.ci_half_width()
    );
}

fn write_json_report<T: Serialize>(out_dir: &Path, name: &str, report: &T) -> Result<Vec<String>> {
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    // Bound reports are small enough to show inline.
    if name == "bound.json" {
        println!("{json}");
    }
    std::fs::write(out_dir.join(name), json + "\n")?;
    Ok(vec![name.to_string()])
}
