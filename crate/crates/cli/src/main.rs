//! Command-line surface tying the selection, sampling, bound, and
//! simulation modules into reproducible runs.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::{parse_scheme, ResolvedCommand, ScenarioConfig, ScenarioOverrides, SweepConfig};
use manifest::Manifest;
use ragsift::bounds::{MisBoundParams, SamplingBoundParams};
use ragsift::document::WeightScheme;
use ragsift::sim::{SimScenario, DEFAULT_TRIALS};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "RAGSIFT_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "ragsift",
    version,
    about = "Reliability-aware document selection: contradiction-graph MIS filtering, \
             weighted sample-and-aggregate, robustness bounds, and Monte Carlo scenarios"
)]
struct Cli {
    /// Output directory for results and the run manifest
    /// (default: $RAGSIFT_OUT_DIR or ./runs, one subdirectory per run).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for trial-level parallelism (default: all cores).
    /// Results are identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-aware MIS selection over a trace or document file.
    Select {
        #[command(flatten)]
        input: InputArgs,
        /// Weight scheme filling in weights the file omits
        /// (uniform, linear, or exp:<gamma>).
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<WeightScheme>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Weighted sample-and-aggregate over a trace or document file.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        /// Sampling rounds T.
        #[arg(long, short = 'T', default_value_t = 20)]
        rounds: u32,
        /// Documents per context m.
        #[arg(long, short = 'm', default_value_t = 2)]
        context_size: u32,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<WeightScheme>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Analytic failure-probability calculators.
    Bound {
        #[command(subcommand)]
        which: BoundCommand,
    },
    /// Monte Carlo robustness scenario (single cell or named preset).
    Simulate {
        /// Named preset; `mis-malicious` sweeps the malicious count at the
        /// ranking tail with 5000 trials per cell.
        #[arg(long)]
        preset: Option<String>,
        /// Scenario TOML file; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write a per-trial audit stream (audit.jsonl; large).
        #[arg(long)]
        audit: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a scenario grid from a sweep config, streaming CSV rows.
    /// Re-running with the same output resumes an unfinished grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-execute a persisted run manifest.
    Replay { manifest: PathBuf },
}

#[derive(Subcommand)]
enum BoundCommand {
    /// Bound on direct MIS selection admitting a malicious document.
    Mis {
        #[arg(long, short = 'k')]
        k: u32,
        #[arg(long)]
        k_malicious: u32,
        /// Benign-pair false contradiction rate.
        #[arg(long, default_value_t = 0.0)]
        eps1: f64,
        /// Benign/malicious missed contradiction rate.
        #[arg(long, default_value_t = 0.0)]
        eps2: f64,
        #[arg(long, default_value_t = 0.25)]
        mu: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// Hoeffding bound on the sample-and-aggregate pipeline.
    Sampling {
        /// Total malicious reliability weight.
        #[arg(long)]
        eta: f64,
        /// Documents per context.
        #[arg(long, short = 'm')]
        m: u32,
        /// Corrupted-context fraction the aggregator tolerates.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Sampling rounds T.
        #[arg(long, short = 'T')]
        rounds: u32,
        /// Also report the minimal T reaching this failure probability.
        #[arg(long)]
        target_delta: Option<f64>,
    },
}

#[derive(clap::Args, Clone)]
struct InputArgs {
    /// Trace file with documents and the recorded contradiction matrix.
    #[arg(long, conflicts_with = "docs", required_unless_present = "docs")]
    trace: Option<PathBuf>,
    /// Document file (JSON array) judged by the stochastic error model.
    #[arg(long)]
    docs: Option<PathBuf>,
    /// Benign-pair false contradiction rate (document-file input).
    #[arg(long, default_value_t = 0.0)]
    eps1: f64,
    /// Benign/malicious missed contradiction rate (document-file input).
    #[arg(long, default_value_t = 0.0)]
    eps2: f64,
    #[arg(long, default_value_t = 0.0)]
    flip_noise: f64,
}

impl InputArgs {
    fn resolve(&self) -> anyhow::Result<config::SelectionInput> {
        if let Some(trace) = &self.trace {
            anyhow::ensure!(
                trace.exists(),
                "trace file {} does not exist",
                trace.display()
            );
            Ok(config::SelectionInput::Trace {
                path: trace.clone(),
            })
        } else {
            let docs = self.docs.as_ref().expect("clap enforces trace xor docs");
            anyhow::ensure!(
                docs.exists(),
                "document file {} does not exist",
                docs.display()
            );
            Ok(config::SelectionInput::Stochastic {
                docs: docs.clone(),
                eps1: self.eps1,
                eps2: self.eps2,
                flip_noise: self.flip_noise,
            })
        }
    }
}

#[derive(clap::Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long, short = 'k')]
    k: Option<u32>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    flip_noise: Option<f64>,
    #[arg(long)]
    irrelevant_rate: Option<f64>,
    #[arg(long)]
    trials: Option<u32>,
    /// Suffix attack: corrupt this many lowest-ranked documents.
    #[arg(long, conflicts_with = "positions")]
    suffix: Option<u32>,
    /// Positional attack: corrupt these 1-based ranks (comma-separated).
    #[arg(long, value_delimiter = ',')]
    positions: Option<Vec<u32>>,
    /// Pipeline: direct or sampling.
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long, short = 'T')]
    rounds: Option<u32>,
    #[arg(long, short = 'm')]
    context_size: Option<u32>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<WeightScheme>,
    #[arg(long)]
    seed: Option<u64>,
}

impl From<OverrideArgs> for ScenarioOverrides {
    fn from(args: OverrideArgs) -> Self {
        ScenarioOverrides {
            k: args.k,
            eps1: args.eps1,
            eps2: args.eps2,
            flip_noise: args.flip_noise,
            irrelevant_rate: args.irrelevant_rate,
            trials: args.trials,
            suffix: args.suffix,
            positions: args.positions,
            rounds: args.rounds,
            context_size: args.context_size,
            pipeline: args.pipeline,
            scheme: args.scheme,
            seed: args.seed,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        // Best effort; only the first global-pool initialization wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let resolved = match resolve(&cli.command) {
        Ok(resolved) => resolved,
        Err(e) => return fail("config", 2, &format!("{e:#}")),
    };
    let out_dir = match prepare_out_dir(cli.out.clone(), resolved.name()) {
        Ok(dir) => dir,
        Err(e) => return fail("io", 1, &e.to_string()),
    };

    let started = Instant::now();
    let outputs = match commands::execute(&resolved, &out_dir) {
        Ok(outputs) => outputs,
        Err(e) => {
            let (kind, code) = classify(&e);
            return fail(kind, code, &e.to_string());
        }
    };

    let manifest = Manifest {
        schema_version: 1,
        tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        command: resolved.name().to_string(),
        seed: primary_seed(&resolved),
        workers: cli.workers,
        config: resolved,
        outputs,
        wall_time_ms: started.elapsed().as_millis() as u64,
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    };
    if let Err(e) = manifest.write(&out_dir) {
        return fail("io", 1, &format!("cannot write manifest: {e}"));
    }
    println!("run directory: {}", out_dir.display());
    0
}

/// Turns CLI arguments (plus any config file) into the replayable command.
fn resolve(command: &Command) -> anyhow::Result<ResolvedCommand> {
    Ok(match command {
        Command::Select {
            input,
            scheme,
            seed,
        } => ResolvedCommand::Select {
            input: input.resolve()?,
            scheme: scheme.clone(),
            seed: *seed,
        },
        Command::Sample {
            input,
            rounds,
            context_size,
            scheme,
            seed,
        } => ResolvedCommand::Sample {
            input: input.resolve()?,
            rounds: *rounds,
            context_size: *context_size,
            scheme: scheme.clone(),
            seed: *seed,
        },
        Command::Bound { which } => match which {
            BoundCommand::Mis {
                k,
                k_malicious,
                eps1,
                eps2,
                mu,
                delta,
            } => ResolvedCommand::BoundMis {
                params: MisBoundParams {
                    k: *k,
                    k_malicious: *k_malicious,
                    false_edge_rate: *eps1,
                    missed_edge_rate: *eps2,
                    mu: *mu,
                    delta: *delta,
                },
            },
            BoundCommand::Sampling {
                eta,
                m,
                alpha,
                rounds,
                target_delta,
            } => ResolvedCommand::BoundSampling {
                params: SamplingBoundParams {
                    malicious_weight: *eta,
                    context_size: *m,
                    tolerance: *alpha,
                    rounds: *rounds,
                },
                target_delta: *target_delta,
            },
        },
        Command::Simulate {
            preset,
            config,
            audit,
            overrides,
        } => {
            let overrides: ScenarioOverrides = overrides.clone().into();
            match preset.as_deref() {
                Some("mis-malicious") => {
                    let k = overrides
                        .k
                        .ok_or_else(|| anyhow::anyhow!("preset mis-malicious needs --k"))?;
                    let cells = SimScenario::mis_malicious_grid(
                        k,
                        overrides.eps1.unwrap_or(0.05),
                        overrides.eps2.unwrap_or(0.2),
                        overrides.trials.unwrap_or(DEFAULT_TRIALS),
                        overrides.seed.unwrap_or(0),
                    );
                    ResolvedCommand::Sweep {
                        csv_name: format!("mis_malicious_k{k}.csv"),
                        cells,
                    }
                }
                Some(other) => anyhow::bail!("unknown preset {other:?}"),
                None => {
                    let file = match config {
                        Some(path) => ScenarioConfig::load(path)?,
                        None => ScenarioConfig::default(),
                    };
                    ResolvedCommand::Simulate {
                        scenario: file.resolve(&overrides)?,
                        audit: *audit,
                    }
                }
            }
        }
        Command::Sweep { config, overrides } => {
            let file = SweepConfig::load(config)?;
            let cells = file.cells(&overrides.clone().into())?;
            ResolvedCommand::Sweep {
                csv_name: "sweep.csv".to_string(),
                cells,
            }
        }
        Command::Replay { manifest } => Manifest::load(manifest)?.config,
    })
}

fn primary_seed(resolved: &ResolvedCommand) -> Option<u64> {
    match resolved {
        ResolvedCommand::Select { seed, .. } | ResolvedCommand::Sample { seed, .. } => Some(*seed),
        ResolvedCommand::Simulate { scenario, .. } => Some(scenario.seed),
        ResolvedCommand::Sweep { cells, .. } => cells.first().map(|c| c.seed),
        ResolvedCommand::BoundMis { .. } | ResolvedCommand::BoundSampling { .. } => None,
    }
}

fn prepare_out_dir(explicit: Option<PathBuf>, command: &str) -> std::io::Result<PathBuf> {
    let dir = match explicit {
        Some(dir) => dir,
        None => {
            let base = std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"));
            let stamp = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0);
            base.join(format!("{}-{stamp}", command.replace(' ', "-")))
        }
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn classify(error: &ragsift::Error) -> (&'static str, i32) {
    use ragsift::Error::*;
    match error {
        Config(_) | InvalidWeights(_) | Infeasible(_) => ("config", 2),
        TraceIncomplete(_) => ("trace_incomplete", 3),
        TraceInvalid(_) => ("trace_invalid", 3),
        GraphTooLarge { .. } => ("cap_exceeded", 4),
        EmptyAfterFilter => ("abstention", 1),
        Io(_) => ("io", 1),
    }
}

/// Machine-readable error report on stderr.
fn fail(kind: &str, code: i32, message: &str) -> i32 {
    let report = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{report}");
    code
}
