//! Monte Carlo experiment runner and report emission.
//!
//! An [`Experiment`] is a grid of cells — one per population size `n` — each
//! running a fixed number of seeded trials of one protocol. Trials are
//! independent work items spread across a worker pool; aggregation is a
//! commutative merge, so the report is a pure function of the configuration
//! regardless of worker count.
//!
//! Seed derivation, documented for reproducibility: trial `t` of cell `i`
//! uses `mix64(mix64(mix64(base_seed) ^ i) ^ t)` where `mix64` is the
//! SplitMix64 finalizer (see `rng`). Cell index is the position of `n` in
//! the experiment's population list.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterdist::{
    run_counter_simulation, CmProgram, CounterSetupError, InterpOutcome, MAX_COUNTERS,
};
use crate::election::{ElectProgram, ElectionParams, Lonely, ParamError, SubKind};
use crate::engine::{run_summary, NetworkSpec};
use crate::machine::FinalLabel;
use crate::rng::trial_seed;

/// Default round cutoff for a protocol: the state-optimal detector is
/// expected to take exponentially many rounds (that is its selling point in
/// reverse), everything else terminates in polylog rounds.
pub fn default_cutoff(sub: SubKind) -> u64 {
    match sub {
        SubKind::StateOptimal => 10_000_000,
        _ => 100_000,
    }
}

/// Per-counter initial value: a fixed count of set bits, or one bit on every
/// node (`all`), which tracks n across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterInit {
    Fixed(u64),
    All,
}

impl CounterInit {
    pub fn resolve(self, n: u64) -> u64 {
        match self {
            CounterInit::Fixed(v) => v,
            CounterInit::All => n,
        }
    }
}

/// What each trial runs.
#[derive(Debug, Clone)]
pub enum Protocol {
    /// Universal leader election with the given termination detector.
    Election(SubKind),
    /// Loneliness detection layered over an election with the given detector.
    Lonely(SubKind),
    /// Counter-machine simulation of a parsed program.
    Counter { name: String, program: CmProgram, init: [CounterInit; MAX_COUNTERS] },
}

impl Protocol {
    /// Canonical name used in the CSV `protocol` column.
    pub fn csv_name(&self) -> String {
        match self {
            Protocol::Election(k) => k.as_str().to_string(),
            Protocol::Lonely(k) => format!("lonely:{k}"),
            Protocol::Counter { name, .. } => format!("counter:{name}"),
        }
    }

    fn sub_kind(&self) -> SubKind {
        match self {
            Protocol::Election(k) | Protocol::Lonely(k) => *k,
            // The coordinator boot and every per-operation sub-election use
            // the double-safe detector.
            Protocol::Counter { .. } => SubKind::DoubleSafe,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub protocol: Protocol,
    pub q: u64,
    pub epsilon: (u64, u64),
    pub n_lower_bound: u64,
    /// State-optimal exponent knob.
    pub c: u32,
    /// Constant-state count bound knob.
    pub count_bound: u8,
    /// Population sizes, one cell each.
    pub ns: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub cutoff: u64,
    /// Worker threads; 0 picks the machine's available parallelism.
    pub workers: usize,
}

impl Experiment {
    pub fn params(&self) -> Result<ElectionParams, ParamError> {
        ElectionParams::with_options(
            self.protocol.sub_kind(),
            self.q,
            self.epsilon,
            self.n_lower_bound,
            self.c,
            self.count_bound,
        )
    }
}

/// JSON form of an experiment, accepted by the CLI via `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `state-optimal` | `fixed-error` | `constant-state` | `double-safe`
    /// | `lonely` | `counter`.
    pub protocol: String,
    /// Base detector for `lonely` (default `fixed-error`).
    #[serde(default)]
    pub base: Option<String>,
    /// Path to a `.cm` program for `counter`.
    #[serde(default)]
    pub program: Option<String>,
    /// Counter initialization for `counter`: e.g. `{"c1": "all", "c2": 3}`.
    #[serde(default)]
    pub init: Option<BTreeMap<String, serde_json::Value>>,
    /// Exact rational: `"1/10"`, `"0.1"`, etc.
    pub epsilon: String,
    #[serde(default = "default_q")]
    pub q: u64,
    #[serde(default = "default_one")]
    pub n_lower_bound: u64,
    #[serde(default = "default_c")]
    pub c: u32,
    #[serde(default = "default_count_bound")]
    pub count_bound: u8,
    pub n: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub cutoff: Option<u64>,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_q() -> u64 {
    2
}
fn default_one() -> u64 {
    1
}
fn default_c() -> u32 {
    5
}
fn default_count_bound() -> u8 {
    8
}

/// Parse an exact rational error bound in (0, 1) with u64 parts.
pub fn parse_epsilon(s: &str) -> Result<(u64, u64), String> {
    let r = crate::prob::parse_rational(s).map_err(|e| e.to_string())?;
    let (num, den) = (r.numer().clone(), r.denom().clone());
    let num: u64 = num.try_into().map_err(|_| format!("epsilon {s} out of range"))?;
    let den: u64 = den.try_into().map_err(|_| format!("epsilon {s} out of range"))?;
    if num == 0 || num >= den {
        return Err(format!("epsilon must be in (0, 1), got {s}"));
    }
    Ok((num, den))
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    CounterSetup(#[from] CounterSetupError),
    #[error("trials must be at least 1")]
    NoTrials,
}

/// One aggregated grid cell. Fields mirror the CSV schema plus extras that
/// live only in the text rendering (histogram, agreement, wall time).
#[derive(Debug, Clone)]
pub struct CellReport {
    pub protocol: String,
    pub n: u64,
    pub epsilon: (u64, u64),
    pub q: u64,
    pub n_lower_bound: u64,
    pub trials: u64,
    /// Elections: trials ending with ≥ 2 leaders. Lonely: wrong or split
    /// verdicts. Counter: terminated trials whose decision differs from the
    /// reference interpreter.
    pub violations: u64,
    /// Trials that hit the round cutoff before termination.
    pub liveness_failures: u64,
    pub rounds_p50: u64,
    pub rounds_p95: u64,
    pub rounds_p99: u64,
    pub rounds_max: u64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
    /// Leader-count histogram (elections only): k → number of trials ending
    /// with exactly k leaders. Totals the trial count.
    pub leader_histogram: BTreeMap<usize, u64>,
    /// Subroutine invocations with disagreeing return bits, summed over all
    /// trials. Any nonzero value is a protocol bug.
    pub agreement_violations: u64,
    pub wall_ms: u128,
}

impl CellReport {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialOutcome {
    rounds: u64,
    leaders: usize,
    violation: bool,
    liveness_failure: bool,
    agreement_violations: u32,
}

/// Wilson 95% score interval (z = 1.96) for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let z = 1.96f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Nearest-rank quantile of a sorted sample.
fn quantile(sorted: &[u64], p: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn worker_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

fn run_one(
    exp: &Experiment,
    params: ElectionParams,
    n: u64,
    seed: u64,
) -> Result<TrialOutcome, HarnessError> {
    match &exp.protocol {
        Protocol::Election(_) => {
            let spec = NetworkSpec::uniform(ElectProgram::new(params), n as usize);
            let s = run_summary(&spec, seed, exp.cutoff);
            let leaders = s.count(FinalLabel::Leader);
            Ok(TrialOutcome {
                rounds: s.rounds,
                leaders,
                violation: leaders >= 2,
                liveness_failure: !s.terminated,
                agreement_violations: s.agreement_violations,
            })
        }
        Protocol::Lonely(_) => {
            let spec =
                NetworkSpec::uniform(Lonely::new(ElectProgram::new(params)), n as usize);
            let s = run_summary(&spec, seed, exp.cutoff);
            let expected =
                if n == 1 { FinalLabel::Alone } else { FinalLabel::Crowd };
            let correct = s.terminated && s.count(expected) == n as usize;
            Ok(TrialOutcome {
                rounds: s.rounds,
                leaders: 0,
                violation: s.terminated && !correct,
                liveness_failure: !s.terminated,
                agreement_violations: s.agreement_violations,
            })
        }
        Protocol::Counter { program, init, .. } => {
            let mut resolved = [0u64; MAX_COUNTERS];
            for (i, v) in init.iter().enumerate() {
                resolved[i] = v.resolve(n);
            }
            let run =
                run_counter_simulation(program, n as usize, resolved, params, seed, exp.cutoff)?;
            let expected = match run.reference.outcome {
                InterpOutcome::Accept => Some(FinalLabel::Accept),
                InterpOutcome::Reject => Some(FinalLabel::Reject),
                _ => None,
            };
            Ok(TrialOutcome {
                rounds: run.rounds,
                leaders: 0,
                violation: run.terminated && (run.verdict != expected || expected.is_none()),
                liveness_failure: !run.terminated,
                agreement_violations: run.agreement_violations,
            })
        }
    }
}

/// Run one grid cell: `exp.trials` seeded trials at population `n`.
pub fn run_cell(exp: &Experiment, cell_index: u64, n: u64) -> Result<CellReport, HarnessError> {
    if exp.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let params = exp.params()?;
    let started = Instant::now();

    let workers = worker_count(exp.workers).min(exp.trials as usize).max(1);
    let chunk = exp.trials.div_ceil(workers as u64);
    let outcomes: Result<Vec<Vec<TrialOutcome>>, HarnessError> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers as u64 {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(exp.trials);
            let exp_ref = &*exp;
            handles.push(scope.spawn(move || {
                (lo..hi)
                    .map(|t| run_one(exp_ref, params, n, trial_seed(exp_ref.seed, cell_index, t)))
                    .collect::<Result<Vec<_>, _>>()
            }));
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let outcomes: Vec<TrialOutcome> = outcomes?.into_iter().flatten().collect();

    let mut rounds: Vec<u64> = outcomes.iter().map(|o| o.rounds).collect();
    rounds.sort_unstable();
    let violations = outcomes.iter().filter(|o| o.violation).count() as u64;
    let liveness_failures = outcomes.iter().filter(|o| o.liveness_failure).count() as u64;
    let mut leader_histogram = BTreeMap::new();
    if matches!(exp.protocol, Protocol::Election(_)) {
        for o in &outcomes {
            *leader_histogram.entry(o.leaders).or_insert(0u64) += 1;
        }
    }
    let (wilson_lo, wilson_hi) = wilson_interval(violations, exp.trials);

    Ok(CellReport {
        protocol: exp.protocol.csv_name(),
        n,
        epsilon: exp.epsilon,
        q: exp.q,
        n_lower_bound: exp.n_lower_bound,
        trials: exp.trials,
        violations,
        liveness_failures,
        rounds_p50: quantile(&rounds, 0.50),
        rounds_p95: quantile(&rounds, 0.95),
        rounds_p99: quantile(&rounds, 0.99),
        rounds_max: *rounds.last().unwrap(),
        wilson_lo,
        wilson_hi,
        seed: exp.seed,
        leader_histogram,
        agreement_violations: outcomes
            .iter()
            .map(|o| o.agreement_violations as u64)
            .sum(),
        wall_ms: started.elapsed().as_millis(),
    })
}

/// Run every cell of the grid, in population-list order.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<CellReport>, HarnessError> {
    exp.ns
        .iter()
        .enumerate()
        .map(|(i, &n)| run_cell(exp, i as u64, n))
        .collect()
}

pub const CSV_HEADER: &str = "protocol,n,epsilon,q,n_lower_bound,trials,violations,\
liveness_failures,rounds_p50,rounds_p95,rounds_p99,rounds_max,wilson_lo,wilson_hi,seed";

/// Fixed-schema CSV; a pure function of the report (wall time is deliberately
/// excluded so identical configs produce byte-identical files).
pub fn report_csv(cells: &[CellReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{}/{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{}\n",
            c.protocol,
            c.n,
            c.epsilon.0,
            c.epsilon.1,
            c.q,
            c.n_lower_bound,
            c.trials,
            c.violations,
            c.liveness_failures,
            c.rounds_p50,
            c.rounds_p95,
            c.rounds_p99,
            c.rounds_max,
            c.wilson_lo,
            c.wilson_hi,
            c.seed,
        ));
    }
    out
}

/// Human-readable rendering; includes rates, agreement counters, and wall
/// time (which the CSV omits).
pub fn report_text(cells: &[CellReport]) -> String {
    let mut out = String::new();
    for c in cells {
        out.push_str(&format!(
            "{} n={} eps={}/{} trials={}: violations={} ({:.4}%, wilson [{:.6}, {:.6}]), \
             liveness_failures={}, rounds p50/p95/p99/max = {}/{}/{}/{}, agreement_violations={}, \
             wall={}ms\n",
            c.protocol,
            c.n,
            c.epsilon.0,
            c.epsilon.1,
            c.trials,
            c.violations,
            100.0 * c.violation_rate(),
            c.wilson_lo,
            c.wilson_hi,
            c.liveness_failures,
            c.rounds_p50,
            c.rounds_p95,
            c.rounds_p99,
            c.rounds_max,
            c.agreement_violations,
            c.wall_ms,
        ));
        if !c.leader_histogram.is_empty() {
            let hist: Vec<String> =
                c.leader_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            out.push_str(&format!("  leader histogram {{{}}}\n", hist.join(", ")));
        }
    }
    out
}
