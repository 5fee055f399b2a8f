//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (visible with `--nocapture`).
//!
//! Several criteria freeze seeded Monte Carlo outputs as regression
//! fixtures under `tests/fixtures/`; those runs are deterministic, so the
//! comparison is byte-exact.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use ragsift::bounds::{mis_failure_bound, regime_check, MisBoundParams};
use ragsift::document::{RetrievalSet, Role, WeightScheme};
use ragsift::judge::{build_graph, JudgeModel};
use ragsift::mis::{mis_oracle, select_mis, ContradictionGraph};
use ragsift::rng::{subseed, substream};
use ragsift::sampling::{sample_contexts, SamplingPlan};
use ragsift::sim::{
    run_scenario, sweep, Attack, CsvSweepSink, Pipeline, RobustnessEstimate, SimScenario,
};
use ragsift::trace::load_trace;

fn pass(criterion: u32, name: &str, detail: &str) {
    println!("[acceptance] criterion {criterion} ({name}): PASS - {detail}");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ragsift"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Frozen regression fixtures live with the tests, not the shipped examples.
fn frozen_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

#[test]
fn criterion_1_rank_preferred_selection() {
    // The five-document trace whose only maximum independent sets are
    // {1,2,3} and {1,2,5}; rank preference must pick {1,2,3}, instantly.
    let bundle = load_trace(&fixture("fig1.json"), None).unwrap();
    let judged = build_graph(&bundle.set, &bundle.judge, 0).unwrap();
    assert_eq!(judged.graph.edge_count(), 3);

    let started = Instant::now();
    let selection = select_mis(&judged.graph).unwrap();
    let elapsed = started.elapsed();

    assert_eq!(selection.chosen, vec![1, 2, 3]);
    assert_eq!(selection.all_maximum, vec![vec![1, 2, 3], vec![1, 2, 5]]);
    assert!(elapsed.as_micros() < 1000, "selection took {elapsed:?}");

    // Exhaustive enumeration confirms these are the only maximum sets.
    assert_eq!(mis_oracle(&judged.graph).unwrap(), selection);

    // Same answer through the CLI.
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["select", "--trace"])
        .arg(fixture("fig1.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("chosen: [1, 2, 3]"));

    pass(
        1,
        "rank-preferred selection",
        &format!("chosen {{1,2,3}} in {elapsed:?}"),
    );
}

#[test]
fn criterion_2_perfect_judge_exactness() {
    // 10^4 random scenarios, k <= 16, strict minority corruption, perfect
    // judge: the chosen set equals the benign set every single time.
    let started = Instant::now();
    let judge = JudgeModel::stochastic(0.0, 0.0).unwrap();
    let mut rng = substream(0xACCE_0002, &[]);
    for trial in 0..10_000u64 {
        let k = rng.gen_range(2..=16u32);
        let max_malicious = (k - 1) / 2; // strict minority
        let k_malicious = rng.gen_range(0..=max_malicious);
        let mut positions: Vec<u32> = (1..=k).collect();
        for i in (1..positions.len()).rev() {
            let j = rng.gen_range(0..=i);
            positions.swap(i, j);
        }
        let malicious = &positions[..k_malicious as usize];

        let roles: Vec<Role> = (1..=k)
            .map(|i| {
                if malicious.contains(&i) {
                    Role::Malicious
                } else {
                    Role::BenignRelevant
                }
            })
            .collect();
        let set = RetrievalSet::from_roles(&roles, &WeightScheme::Uniform).unwrap();
        let judged = build_graph(&set, &judge, subseed(0xACCE_0002, &[trial])).unwrap();
        let selection = select_mis(&judged.graph).unwrap();

        let mut benign: Vec<u32> = (1..=k).filter(|i| !malicious.contains(i)).collect();
        benign.sort_unstable();
        assert_eq!(
            selection.chosen, benign,
            "trial {trial}: k={k} malicious={malicious:?}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30);
    pass(
        2,
        "perfect-judge exactness",
        &format!("10000/10000 exact in {elapsed:?}"),
    );
}

#[test]
fn criterion_3_oracle_equivalence() {
    // 10^4 random graphs with n <= 12: branch-and-bound selection agrees
    // with the unpruned full enumeration on every graph.
    let started = Instant::now();
    let mut rng = substream(0xACCE_0003, &[]);
    for trial in 0..10_000u32 {
        let n = rng.gen_range(1..=12u32);
        let density = rng.gen::<f64>();
        let mut edges = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                if rng.gen::<f64>() < density {
                    edges.push((a, b));
                }
            }
        }
        let graph = ContradictionGraph::new((1..=n).collect(), &edges).unwrap();
        let fast = select_mis(&graph).unwrap();
        let slow = mis_oracle(&graph).unwrap();
        assert_eq!(fast, slow, "trial {trial}: n={n} edges={edges:?}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60);
    pass(
        3,
        "oracle equivalence",
        &format!("10000/10000 agreements in {elapsed:?}"),
    );
}

/// Runs one preset grid into `dir` and returns (csv path, leak curve),
/// reading the curve back from the streamed rows.
fn preset_curve(dir: &Path, k: u32, eps2: f64) -> (PathBuf, Vec<f64>) {
    let cells = SimScenario::mis_malicious_grid(k, 0.05, eps2, 5000, 42);
    let name = format!(
        "mis_malicious_k{k}_eps2_{}.csv",
        eps2.to_string().replace('.', "_")
    );
    let path = dir.join(&name);
    let mut sink = CsvSweepSink::open(&path).unwrap();
    sweep(&cells, &mut sink).unwrap();
    drop(sink);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let curve = reader
        .records()
        .map(|record| record.unwrap().get(10).unwrap().parse::<f64>().unwrap())
        .collect();
    (path, curve)
}

#[test]
fn criterion_4_simulation_figure_reproduction() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // k = 10, eps2 = 0.2: leak probability stays under 0.05 through k' = 3,
    // then rises strictly to k' = 5.
    let (path10, curve10) = preset_curve(dir.path(), 10, 0.2);
    for (k_mal, p) in curve10.iter().enumerate().take(4) {
        assert!(*p <= 0.05, "k=10 k'={k_mal}: p={p}");
    }
    assert!(
        curve10[3] < curve10[4] && curve10[4] < curve10[5],
        "curve not rising: {curve10:?}"
    );

    // k = 20, eps2 in {0.2, 0.4}: under 0.05 through k' = 7.
    let (path20a, curve20a) = preset_curve(dir.path(), 20, 0.2);
    let (path20b, curve20b) = preset_curve(dir.path(), 20, 0.4);
    for curve in [&curve20a, &curve20b] {
        for (k_mal, p) in curve.iter().enumerate().take(8) {
            assert!(*p <= 0.05, "k=20 k'={k_mal}: p={p}");
        }
    }

    // Frozen regression fixtures: the seeded curves must not drift.
    for (path, frozen) in [
        (&path10, "mis_malicious_k10_eps2_0_2.csv"),
        (&path20a, "mis_malicious_k20_eps2_0_2.csv"),
        (&path20b, "mis_malicious_k20_eps2_0_4.csv"),
    ] {
        let produced = std::fs::read_to_string(path).unwrap();
        let expected = std::fs::read_to_string(frozen_fixture(frozen)).unwrap();
        assert_eq!(produced, expected, "{frozen} drifted");
    }

    // The CLI preset writes the identical k = 10 file.
    let cli_dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "simulate",
            "--preset",
            "mis-malicious",
            "-k",
            "10",
            "--eps2",
            "0.2",
            "--seed",
            "42",
        ])
        .arg("--out")
        .arg(cli_dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(
        std::fs::read_to_string(cli_dir.path().join("mis_malicious_k10.csv")).unwrap(),
        std::fs::read_to_string(&path10).unwrap(),
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300);
    pass(
        4,
        "simulation figure reproduction",
        &format!(
            "k=10 curve {:?}..; k=20 leak <= {:.4} through k'=7; {elapsed:?}",
            &curve10[..5],
            curve20a[..8]
                .iter()
                .chain(&curve20b[..8])
                .fold(0.0f64, |a, &b| a.max(b)),
        ),
    );
}

#[test]
fn criterion_5_hoeffding_instantiation_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "bound", "sampling", "--eta", "0.1", "-m", "2", "--alpha", "0.5", "-T", "20",
        ])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let json_part = stdout.split("run directory").next().unwrap();
    let report: serde_json::Value = serde_json::from_str(json_part.trim()).unwrap();
    let delta = report["delta"].as_f64().unwrap();
    assert!((delta - 0.0214).abs() <= 1e-4, "delta = {delta}");
    pass(5, "Hoeffding instantiation", &format!("delta = {delta:.6}"));
}

#[test]
fn criterion_6_clean_context_law() {
    // (T=20, m=2, eta=0.1): clean-context fraction within 3 SE of 0.81 over
    // 10^5 rounds, and the frequency of >= T/2 poisoned contexts stays
    // under the analytic delta = 0.0214 from criterion 5.
    let started = Instant::now();
    let roles: Vec<Role> = (0..10)
        .map(|i| {
            if i == 9 {
                Role::Malicious
            } else {
                Role::BenignRelevant
            }
        })
        .collect();
    let set = RetrievalSet::from_roles(&roles, &WeightScheme::Uniform).unwrap();

    let plans = 5000u32;
    let rounds = 20u32;
    let mut clean_total = 0u64;
    let mut failures = 0u64;
    for plan_idx in 0..plans {
        let plan = SamplingPlan::new(
            rounds,
            2,
            WeightScheme::Uniform,
            subseed(0xACCE_0006, &[plan_idx as u64]),
        )
        .unwrap();
        let contexts = sample_contexts(&set, &plan).unwrap();
        let clean = contexts.iter().filter(|c| c.clean).count() as u64;
        clean_total += clean;
        if (rounds as u64 - clean) * 2 >= rounds as u64 {
            failures += 1;
        }
    }
    let total_rounds = (plans * rounds) as f64;
    let clean_fraction = clean_total as f64 / total_rounds;
    let se = (0.81f64 * 0.19 / total_rounds).sqrt();
    assert!(
        (clean_fraction - 0.81).abs() <= 3.0 * se,
        "clean fraction {clean_fraction} vs 0.81 +- {}",
        3.0 * se
    );
    let failure_freq = failures as f64 / plans as f64;
    assert!(
        failure_freq <= 0.0214,
        "failure frequency {failure_freq} above delta"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120);
    pass(
        6,
        "clean-context law",
        &format!("fraction {clean_fraction:.4}, failure frequency {failure_freq:.5} <= 0.0214"),
    );
}

#[test]
fn criterion_7_bound_domination() {
    // A 20-cell grid inside the bound's regime: the analytic bound must
    // dominate the empirical leak frequency in every cell.
    let started = Instant::now();
    let mut checked = 0;
    for k in [15u32, 20] {
        for k_malicious in [1u32, 2] {
            for eps2 in [0.02, 0.05, 0.08, 0.11, 0.14] {
                let params = MisBoundParams {
                    k,
                    k_malicious,
                    false_edge_rate: 0.005,
                    missed_edge_rate: eps2,
                    mu: 0.25,
                    delta: 0.5,
                };
                let regime = regime_check(&params);
                assert!(
                    regime.ok,
                    "cell k={k} k'={k_malicious} eps2={eps2} outside regime"
                );
                let bound = mis_failure_bound(&params).unwrap();

                let scenario = SimScenario {
                    k,
                    false_edge_rate: 0.005,
                    missed_edge_rate: eps2,
                    flip_noise: 0.0,
                    irrelevant_rate: 0.0,
                    trials: 5000,
                    attack: Attack::Suffix(k_malicious),
                    pipeline: Pipeline::DirectMis,
                    scheme: WeightScheme::Uniform,
                    seed: subseed(0xACCE_0007, &[k as u64, k_malicious as u64, eps2.to_bits()]),
                };
                let estimate = run_scenario(&scenario).unwrap();
                let empirical = estimate.malicious_in_mis.p;
                let slack = 3.0 * estimate.malicious_in_mis.standard_error();
                assert!(
                    empirical <= bound.total + slack,
                    "cell k={k} k'={k_malicious} eps2={eps2}: empirical {empirical} \
                     exceeds bound {} + {slack}",
                    bound.total
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 20);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600);
    pass(
        7,
        "bound domination",
        &format!("20/20 cells dominated in {elapsed:?}"),
    );
}

fn position_estimate(position: u32) -> RobustnessEstimate {
    let scenario = SimScenario {
        k: 50,
        false_edge_rate: 0.05,
        missed_edge_rate: 0.2,
        flip_noise: 0.0,
        irrelevant_rate: 0.0,
        trials: 100_000,
        attack: Attack::Positions(vec![position]),
        pipeline: Pipeline::SamplingMis {
            rounds: 20,
            context_size: 2,
        },
        scheme: WeightScheme::Exponential { gamma: 0.9 },
        seed: subseed(0xACCE_0008, &[position as u64]),
    };
    run_scenario(&scenario).unwrap()
}

#[test]
fn criterion_8_reliability_awareness() {
    // Single attack at positions 1, 25, 50 of a 50-document ranking under
    // the sampling pipeline: leak probability and attack success rate are
    // non-increasing in position, separated by at least 2 SE between the
    // extremes.
    let started = Instant::now();
    let estimates: Vec<RobustnessEstimate> = [1u32, 25, 50]
        .iter()
        .map(|&p| position_estimate(p))
        .collect();

    for pair in estimates.windows(2) {
        let (hi, lo) = (&pair[0], &pair[1]);
        let slack = 2.0
            * (hi.malicious_in_chosen.standard_error() + lo.malicious_in_chosen.standard_error());
        assert!(
            lo.malicious_in_chosen.p <= hi.malicious_in_chosen.p + slack,
            "leak not non-increasing: {} then {}",
            hi.malicious_in_chosen.p,
            lo.malicious_in_chosen.p
        );
        let slack = 2.0 * (hi.asr.standard_error() + lo.asr.standard_error());
        assert!(lo.asr.p <= hi.asr.p + slack, "asr not non-increasing");
    }
    let (first, last) = (&estimates[0], &estimates[2]);
    let separation = 2.0
        * (first.malicious_in_chosen.standard_error() + last.malicious_in_chosen.standard_error());
    assert!(
        first.malicious_in_chosen.p - last.malicious_in_chosen.p >= separation,
        "positions 1 and 50 not separated: {} vs {}",
        first.malicious_in_chosen.p,
        last.malicious_in_chosen.p
    );
    let separation = 2.0 * (first.asr.standard_error() + last.asr.standard_error());
    assert!(
        first.asr.p - last.asr.p >= separation,
        "asr extremes not separated"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300);
    pass(
        8,
        "reliability awareness",
        &format!(
            "leak {:.5} -> {:.5} -> {:.5} across positions 1/25/50 in {elapsed:?}",
            estimates[0].malicious_in_chosen.p,
            estimates[1].malicious_in_chosen.p,
            estimates[2].malicious_in_chosen.p
        ),
    );
}

#[test]
fn criterion_9_manifest_replay_determinism() {
    // A scenario replayed from its manifest, under different worker counts,
    // produces bitwise-identical result files.
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let output = bin()
        .args([
            "simulate",
            "-k",
            "20",
            "--eps1",
            "0.05",
            "--eps2",
            "0.2",
            "--suffix",
            "4",
            "--pipeline",
            "sampling",
            "-T",
            "15",
            "-m",
            "2",
            "--scheme",
            "exp:0.9",
            "--trials",
            "2000",
            "--seed",
            "4242",
            "--audit",
            "--workers",
            "1",
        ])
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    let replayed = dir.path().join("replayed");
    let output = bin()
        .arg("replay")
        .arg(first.join("manifest.json"))
        .args(["--workers", "8"])
        .arg("--out")
        .arg(&replayed)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    for name in ["estimate.json", "results.csv", "audit.jsonl"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(replayed.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between worker counts");
    }
    pass(
        9,
        "manifest replay determinism",
        "results identical under 1 vs 8 workers",
    );
}
