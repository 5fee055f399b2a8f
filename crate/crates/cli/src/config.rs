//! Run configuration: TOML files, flag overrides, and the resolved command
//! echoed into every manifest.
//!
//! Config files are ordinary TOML; any flag given on the command line wins
//! over the file. The fully resolved command is what gets persisted, so a
//! manifest replay needs no access to the original file or flags.

use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use ragsift::bounds::{MisBoundParams, SamplingBoundParams};
use ragsift::document::WeightScheme;
use ragsift::sim::{Attack, Pipeline, SimScenario, DEFAULT_TRIALS};

/// Scenario file for `simulate`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub k: Option<u32>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub flip_noise: Option<f64>,
    pub irrelevant_rate: Option<f64>,
    pub trials: Option<u32>,
    pub attack: Option<Attack>,
    pub pipeline: Option<Pipeline>,
    pub scheme: Option<WeightScheme>,
    pub seed: Option<u64>,
}

/// Flag-level overrides shared by `simulate` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOverrides {
    pub k: Option<u32>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub flip_noise: Option<f64>,
    pub irrelevant_rate: Option<f64>,
    pub trials: Option<u32>,
    pub suffix: Option<u32>,
    pub positions: Option<Vec<u32>>,
    pub rounds: Option<u32>,
    pub context_size: Option<u32>,
    pub pipeline: Option<String>,
    pub scheme: Option<WeightScheme>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn load(path: &PathBuf) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }

    /// Applies flag overrides (flags win) and fills defaults.
    pub fn resolve(&self, overrides: &ScenarioOverrides) -> anyhow::Result<SimScenario> {
        let attack = if let Some(positions) = &overrides.positions {
            Attack::Positions(positions.clone())
        } else if let Some(suffix) = overrides.suffix {
            Attack::Suffix(suffix)
        } else {
            self.attack.clone().unwrap_or(Attack::None)
        };
        let pipeline = match overrides.pipeline.as_deref() {
            Some("direct") => Pipeline::DirectMis,
            Some("sampling") => Pipeline::SamplingMis {
                rounds: overrides.rounds.or(self.pipeline_rounds()).unwrap_or(20),
                context_size: overrides
                    .context_size
                    .or(self.pipeline_context_size())
                    .unwrap_or(2),
            },
            Some(other) => bail!("unknown pipeline {other:?}; expected direct or sampling"),
            None => {
                let mut pipeline = self.pipeline.clone().unwrap_or(Pipeline::DirectMis);
                if let Pipeline::SamplingMis {
                    rounds,
                    context_size,
                } = &mut pipeline
                {
                    if let Some(r) = overrides.rounds {
                        *rounds = r;
                    }
                    if let Some(m) = overrides.context_size {
                        *context_size = m;
                    }
                }
                pipeline
            }
        };
        let scenario = SimScenario {
            k: overrides
                .k
                .or(self.k)
                .context("k is required (flag --k or config)")?,
            false_edge_rate: overrides.eps1.or(self.eps1).unwrap_or(0.0),
            missed_edge_rate: overrides.eps2.or(self.eps2).unwrap_or(0.0),
            flip_noise: overrides.flip_noise.or(self.flip_noise).unwrap_or(0.0),
            irrelevant_rate: overrides
                .irrelevant_rate
                .or(self.irrelevant_rate)
                .unwrap_or(0.0),
            trials: overrides.trials.or(self.trials).unwrap_or(DEFAULT_TRIALS),
            attack,
            pipeline,
            scheme: overrides
                .scheme
                .clone()
                .or(self.scheme.clone())
                .unwrap_or(WeightScheme::Uniform),
            seed: overrides.seed.or(self.seed).unwrap_or(0),
        };
        Ok(scenario)
    }

    fn pipeline_rounds(&self) -> Option<u32> {
        match &self.pipeline {
            Some(Pipeline::SamplingMis { rounds, .. }) => Some(*rounds),
            _ => None,
        }
    }

    fn pipeline_context_size(&self) -> Option<u32> {
        match &self.pipeline {
            Some(Pipeline::SamplingMis { context_size, .. }) => Some(*context_size),
            _ => None,
        }
    }
}

/// Sweep file: a scenario template plus per-field value lists whose
/// cartesian product forms the grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub base: ScenarioConfig,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub k: Vec<u32>,
    #[serde(default)]
    pub eps1: Vec<f64>,
    #[serde(default)]
    pub eps2: Vec<f64>,
    /// Suffix-attack sizes; mutually exclusive with `positions`.
    #[serde(default)]
    pub k_malicious: Vec<u32>,
    /// Single-position attacks; mutually exclusive with `k_malicious`.
    #[serde(default)]
    pub positions: Vec<u32>,
    #[serde(default)]
    pub irrelevant_rate: Vec<f64>,
    #[serde(default)]
    pub flip_noise: Vec<f64>,
}

impl SweepConfig {
    pub fn load(path: &PathBuf) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read sweep config {}", path.display()))?;
        toml::from_str(&text)
            .with_context(|| format!("cannot parse sweep config {}", path.display()))
    }

    /// Expands the grid into concrete cells, overrides applied first.
    ///
    /// Every cell derives its own seed from the root seed and its grid
    /// coordinates, so single cells can be reproduced in isolation.
    pub fn cells(&self, overrides: &ScenarioOverrides) -> anyhow::Result<Vec<SimScenario>> {
        if !self.grid.k_malicious.is_empty() && !self.grid.positions.is_empty() {
            bail!("grid lists both k_malicious and positions; pick one attack axis");
        }
        let base = self.base.resolve(&ScenarioOverrides {
            k: overrides.k.or(self.grid.k.first().copied()),
            ..overrides.clone()
        })?;
        let one = |list: &[f64], fallback: f64| {
            if list.is_empty() {
                vec![fallback]
            } else {
                list.to_vec()
            }
        };
        let ks = if self.grid.k.is_empty() {
            vec![base.k]
        } else {
            self.grid.k.clone()
        };
        let eps1s = one(&self.grid.eps1, base.false_edge_rate);
        let eps2s = one(&self.grid.eps2, base.missed_edge_rate);
        let irrs = one(&self.grid.irrelevant_rate, base.irrelevant_rate);
        let flips = one(&self.grid.flip_noise, base.flip_noise);
        let attacks: Vec<Attack> = if !self.grid.positions.is_empty() {
            self.grid
                .positions
                .iter()
                .map(|&p| Attack::Positions(vec![p]))
                .collect()
        } else if !self.grid.k_malicious.is_empty() {
            self.grid
                .k_malicious
                .iter()
                .map(|&n| Attack::Suffix(n))
                .collect()
        } else {
            vec![base.attack.clone()]
        };

        let mut cells = Vec::new();
        for &k in &ks {
            for &eps1 in &eps1s {
                for &eps2 in &eps2s {
                    for &irr in &irrs {
                        for &flip in &flips {
                            for attack in &attacks {
                                if let Attack::Suffix(count) = attack {
                                    if *count > k / 2 {
                                        continue; // majority corruption: out of the defended regime
                                    }
                                }
                                if let Attack::Positions(p) = attack {
                                    if p.iter().any(|&pos| pos > k) {
                                        continue;
                                    }
                                }
                                let mut cell = base.clone();
                                cell.k = k;
                                cell.false_edge_rate = eps1;
                                cell.missed_edge_rate = eps2;
                                cell.irrelevant_rate = irr;
                                cell.flip_noise = flip;
                                cell.attack = attack.clone();
                                cell.seed = ragsift::rng::subseed(
                                    base.seed,
                                    &[
                                        k as u64,
                                        eps1.to_bits(),
                                        eps2.to_bits(),
                                        irr.to_bits(),
                                        flip.to_bits(),
                                        attack_key(attack),
                                    ],
                                );
                                cells.push(cell);
                            }
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            bail!("sweep grid expands to zero cells");
        }
        Ok(cells)
    }
}

fn attack_key(attack: &Attack) -> u64 {
    match attack {
        Attack::None => 0,
        Attack::Suffix(n) => 1 + *n as u64,
        Attack::Positions(p) => {
            0x8000_0000_0000_0000 | p.iter().fold(0u64, |acc, &x| acc.rotate_left(7) ^ x as u64)
        }
    }
}

/// Parses `--scheme` flags: `uniform`, `linear`, or `exp:<gamma>`.
pub fn parse_scheme(s: &str) -> Result<WeightScheme, String> {
    match s {
        "uniform" => Ok(WeightScheme::Uniform),
        "linear" => Ok(WeightScheme::Linear),
        _ => {
            if let Some(gamma) = s.strip_prefix("exp:") {
                let gamma: f64 = gamma
                    .parse()
                    .map_err(|_| format!("bad decay factor in {s:?}"))?;
                Ok(WeightScheme::Exponential { gamma })
            } else {
                Err(format!(
                    "unknown scheme {s:?}; expected uniform, linear, or exp:<gamma>"
                ))
            }
        }
    }
}

/// Input of a selection or sampling run: either a trace file (recorded
/// judge), or a document file judged by the stochastic error model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionInput {
    Trace {
        path: PathBuf,
    },
    Stochastic {
        docs: PathBuf,
        eps1: f64,
        eps2: f64,
        flip_noise: f64,
    },
}

/// The fully resolved command persisted in every manifest; replaying a
/// manifest re-executes exactly this.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ResolvedCommand {
    Select {
        input: SelectionInput,
        scheme: Option<WeightScheme>,
        seed: u64,
    },
    Sample {
        input: SelectionInput,
        rounds: u32,
        context_size: u32,
        scheme: Option<WeightScheme>,
        seed: u64,
    },
    BoundMis {
        params: MisBoundParams,
    },
    BoundSampling {
        params: SamplingBoundParams,
        target_delta: Option<f64>,
    },
    Simulate {
        scenario: SimScenario,
        audit: bool,
    },
    Sweep {
        csv_name: String,
        cells: Vec<SimScenario>,
    },
}

impl ResolvedCommand {
    pub fn name(&self) -> &'static str {
        match self {
            ResolvedCommand::Select { .. } => "select",
            ResolvedCommand::Sample { .. } => "sample",
            ResolvedCommand::BoundMis { .. } => "bound mis",
            ResolvedCommand::BoundSampling { .. } => "bound sampling",
            ResolvedCommand::Simulate { .. } => "simulate",
            ResolvedCommand::Sweep { .. } => "sweep",
        }
    }
}
