//! Analytic failure-probability calculators for both pipelines.
//!
//! For direct MIS selection, the calculator evaluates the union-bound
//! machinery behind the robustness guarantee: `bad1` bounds the probability
//! that spurious edges shrink the all-benign independent set below the
//! target size `alpha = (1 - mu) * m`, and `bad2` bounds the probability
//! that an independent set of that size contains a malicious document. Both
//! hold only inside a parameter regime (error rates small relative to the
//! benign count, at most `k/5` corruptions); outside it the calculator
//! returns the vacuous bound 1 with a warning rather than erroring, so
//! parameter sweeps stay total.
//!
//! For sample-and-aggregate, a Hoeffding bound on the number of clean
//! contexts gives the failure probability `exp(-2 T margin^2)` where
//! `margin = p_clean - (1 - tolerance)`, together with the minimal round
//! count achieving a target failure probability.
//!
//! Combinatorial terms are evaluated in log space with `ln_gamma`; the
//! dominant term underflows double precision quickly otherwise.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Parameters of the direct-MIS failure bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisBoundParams {
    /// Retrieved document count (post-filter).
    pub k: u32,
    /// Number of adversary-controlled documents.
    pub k_malicious: u32,
    /// Probability a benign pair is wrongly judged contradictory.
    pub false_edge_rate: f64,
    /// Probability a benign/malicious pair escapes detection.
    pub missed_edge_rate: f64,
    /// Analysis constant in `(0, 1/2)`; trades the two bad events off.
    pub mu: f64,
    /// Analysis constant in `(0, 1)`; slack in the missed-edge condition.
    pub delta: f64,
}

impl MisBoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_malicious >= self.k {
            return Err(Error::Config(format!(
                "need at least one benign document: k={} k_malicious={}",
                self.k, self.k_malicious
            )));
        }
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(Error::Config(format!(
                "mu must lie in (0, 1/2), got {}",
                self.mu
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        for (name, p) in [
            ("false_edge_rate", self.false_edge_rate),
            ("missed_edge_rate", self.missed_edge_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Benign document count `m`.
    pub fn benign_count(&self) -> u32 {
        self.k - self.k_malicious
    }

    /// Target independent-set size `alpha = (1 - mu) * m`; may be fractional.
    pub fn alpha(&self) -> f64 {
        (1.0 - self.mu) * self.benign_count() as f64
    }
}

/// Outcome of checking the bound's hypotheses, with margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub ok: bool,
    /// `k_malicious <= k / 5`.
    pub corruption_ok: bool,
    /// Strict bound the false-edge rate must stay below: `mu / m`.
    pub false_edge_limit: f64,
    pub false_edge_margin: f64,
    pub false_edge_ok: bool,
    /// Strict bound the missed-edge rate must stay below:
    /// `((1 - mu) m - 1) / ((1 + delta) e m)`.
    pub missed_edge_limit: f64,
    pub missed_edge_margin: f64,
    pub missed_edge_ok: bool,
}

/// Checks the bound's hypotheses: both error-rate inequalities are strict,
/// and the adversary corrupts at most a fifth of the documents.
pub fn regime_check(params: &MisBoundParams) -> RegimeReport {
    let m = params.benign_count() as f64;
    let false_edge_limit = params.mu / m;
    let missed_edge_limit =
        ((1.0 - params.mu) * m - 1.0) / ((1.0 + params.delta) * std::f64::consts::E * m);
    let corruption_ok = 5 * params.k_malicious <= params.k;
    let false_edge_ok = params.false_edge_rate < false_edge_limit;
    let missed_edge_ok = params.missed_edge_rate < missed_edge_limit;
    RegimeReport {
        ok: corruption_ok && false_edge_ok && missed_edge_ok,
        corruption_ok,
        false_edge_limit,
        false_edge_margin: false_edge_limit - params.false_edge_rate,
        false_edge_ok,
        missed_edge_limit,
        missed_edge_margin: missed_edge_limit - params.missed_edge_rate,
        missed_edge_ok,
    }
}

/// Upper bound on the probability that the maximum independent set contains
/// a malicious document, decomposed into its two bad events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisFailureBound {
    /// Chernoff bound on losing the all-benign set of size `alpha`.
    pub bad1: f64,
    /// Geometric-series closure `(1 + 2v) * T_1` over the mixed-set terms.
    pub bad2: f64,
    /// `min(1, bad1 + bad2)`, forced to 1 outside the regime.
    pub total: f64,
    /// Ratio bound between consecutive mixed-set terms; the series closure
    /// requires `v < 1/2`.
    pub v: f64,
    pub regime: RegimeReport,
    pub warnings: Vec<String>,
}

/// `ln C(n, r)`, or `None` when the binomial is zero (`r` out of range).
fn ln_choose(n: u32, r: i64) -> Option<f64> {
    if r < 0 || r > n as i64 {
        return None;
    }
    let (n, r) = (n as f64, r as f64);
    Some(ln_gamma(n + 1.0) - ln_gamma(r + 1.0) - ln_gamma(n - r + 1.0))
}

/// Mixed-set term `T_r = C(k', r) C(m, a - r) eps2^(r (a - r))` where `a`
/// is the floored target size. Zero-rate and out-of-range cases collapse to
/// exact zeros instead of `0 * inf`.
fn mixed_term(k_malicious: u32, m: u32, alpha_floor: i64, eps2: f64, r: i64) -> f64 {
    let exponent = (r * (alpha_floor - r)) as f64;
    let (lc1, lc2) = match (ln_choose(k_malicious, r), ln_choose(m, alpha_floor - r)) {
        (Some(a), Some(b)) => (a, b),
        _ => return 0.0,
    };
    if eps2 == 0.0 {
        return if exponent > 0.0 {
            0.0
        } else {
            (lc1 + lc2).exp()
        };
    }
    (lc1 + lc2 + exponent * eps2.ln()).exp()
}

/// Evaluates the failure bound exactly as the union-bound argument states
/// it. Outside the regime, or when the series closure is invalid
/// (`v >= 1/2`), the affected component is the vacuous 1 and a warning is
/// attached; sweeps over mixed parameter grids therefore never error.
pub fn mis_failure_bound(params: &MisBoundParams) -> Result<MisFailureBound> {
    params.validate()?;
    let regime = regime_check(params);
    let m = params.benign_count();
    let alpha_floor = params.alpha().floor() as i64;
    let mut warnings = Vec::new();

    let bad1 = (-(params.mu * (m as f64 - 1.0)) / 6.0).exp().min(1.0);

    let v_exponent = (0.5 - params.mu) * m as f64 - 1.0;
    let v = (1.0 - params.mu) / (10.0 * params.mu)
        * params.k as f64
        * params.missed_edge_rate.powf(v_exponent);

    let t1 = mixed_term(
        params.k_malicious,
        m,
        alpha_floor,
        params.missed_edge_rate,
        1,
    );
    let bad2 = if v < 0.5 {
        ((1.0 + 2.0 * v) * t1).min(1.0)
    } else {
        warnings.push(format!(
            "series closure invalid: v = {v:.6} >= 1/2; mixed-set bound is vacuous"
        ));
        1.0
    };

    let total = if regime.ok {
        (bad1 + bad2).min(1.0)
    } else {
        warnings
            .push("parameters violate the bound's regime; returning the vacuous bound 1".into());
        1.0
    };

    Ok(MisFailureBound {
        bad1,
        bad2,
        total,
        v,
        regime,
        warnings,
    })
}

/// Parameters of the sample-and-aggregate failure bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBoundParams {
    /// Total reliability weight on malicious documents.
    pub malicious_weight: f64,
    /// Documents drawn per context.
    pub context_size: u32,
    /// Fraction of corrupted contexts the aggregator tolerates; MIS
    /// aggregation tolerates any minority, i.e. 1/2.
    pub tolerance: f64,
    /// Sampling rounds `T`.
    pub rounds: u32,
}

impl SamplingBoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.malicious_weight) {
            return Err(Error::Config(format!(
                "malicious weight must lie in [0, 1], got {}",
                self.malicious_weight
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1.0) {
            return Err(Error::Config(format!(
                "tolerance must lie in (0, 1], got {}",
                self.tolerance
            )));
        }
        if self.context_size == 0 {
            return Err(Error::Config("context size must be at least 1".into()));
        }
        Ok(())
    }

    /// Probability that one sampled context contains no malicious document.
    pub fn p_clean(&self) -> f64 {
        (1.0 - self.malicious_weight).powi(self.context_size as i32)
    }
}

/// Hoeffding bound on the sample-and-aggregate failure probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingFailureReport {
    pub p_clean: f64,
    /// `p_clean - (1 - tolerance)`; the bound needs this positive.
    pub margin: f64,
    /// `exp(-2 T margin^2)`, or 1 when the margin is not positive.
    pub delta: f64,
    pub warning: Option<String>,
}

/// Probability that fewer than `tolerance * T` contexts stay clean, i.e.
/// that the aggregator's robustness premise fails.
pub fn sampling_failure_prob(params: &SamplingBoundParams) -> Result<SamplingFailureReport> {
    params.validate()?;
    let p_clean = params.p_clean();
    let margin = p_clean - (1.0 - params.tolerance);
    if margin <= 0.0 {
        return Ok(SamplingFailureReport {
            p_clean,
            margin,
            delta: 1.0,
            warning: Some("p_clean does not exceed 1 - tolerance; the bound is vacuous".into()),
        });
    }
    let delta = (-2.0 * params.rounds as f64 * margin * margin).exp();
    Ok(SamplingFailureReport {
        p_clean,
        margin,
        delta,
        warning: None,
    })
}

/// Smallest round count `T` whose failure bound reaches `target_delta`.
///
/// Always at least 1: a vacuous target still requires running one round.
pub fn min_rounds(
    malicious_weight: f64,
    context_size: u32,
    tolerance: f64,
    target_delta: f64,
) -> Result<u64> {
    let params = SamplingBoundParams {
        malicious_weight,
        context_size,
        tolerance,
        rounds: 0,
    };
    params.validate()?;
    if !(target_delta > 0.0 && target_delta < 1.0) {
        return Err(Error::Config(format!(
            "target failure probability must lie in (0, 1), got {target_delta}"
        )));
    }
    let margin = params.p_clean() - (1.0 - tolerance);
    if margin <= 0.0 {
        return Err(Error::Infeasible(format!(
            "p_clean = {} does not exceed 1 - tolerance = {}; no round count helps",
            params.p_clean(),
            1.0 - tolerance
        )));
    }
    let raw = (1.0 / target_delta).ln() / (2.0 * margin * margin);
    // Absorb float noise so that min_rounds(failure_prob(T)) lands on T
    // exactly rather than T + 1.
    let rounds = (raw - 1e-9).ceil().max(1.0);
    Ok(rounds as u64)
}
