//! Command-line interface: experiment runners, the exact analyzer, state
//! audits, and trace export.
//!
//! Exit codes: 0 success, 2 invalid arguments (including bad config or
//! program files), 3 enumeration/configuration-space overflow, 4 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::json;

use beepsim::analysis::{
    absorb_exact, format_profile, AbsorbOptions, AnalysisError, Configuration,
};
use beepsim::counterdist::{parse_program, MAX_COUNTERS};
use beepsim::election::{ElectProgram, ElectionParams, SubKind};
use beepsim::engine::{run_execution, write_trace_jsonl, NetworkSpec};
use beepsim::harness::{
    default_cutoff, parse_epsilon, report_csv, report_text, run_experiment, CounterInit,
    Experiment, ExperimentConfig, HarnessError, Protocol,
};
use beepsim::machine::{audit_state_count, extract_machine, MachineError};
use beepsim::prob::{parse_rational, rational_to_f64};

const EXTRACTION_CAP: usize = 1_000_000;

#[derive(Parser)]
#[command(name = "beepsim", version, about = "Beeping-network protocol simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo leader-election experiments over a population grid.
    Elect(ElectArgs),
    /// Distributed counter-machine runs checked against the reference
    /// interpreter.
    Counter(CounterArgs),
    /// Loneliness-detection experiments (alone vs crowd).
    Lonely(LonelyArgs),
    /// Exact configuration-chain analysis of an election machine.
    Analyze(AnalyzeArgs),
    /// Print the reachable state count of an election program.
    Audit(AuditArgs),
    /// Export one full execution trace as JSON lines.
    Trace(TraceArgs),
}

#[derive(Args)]
struct ElectArgs {
    /// JSON experiment config; replaces the individual flags below.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// state-optimal | fixed-error | constant-state | double-safe
    #[arg(long, required_unless_present = "config")]
    algo: Option<String>,
    /// Population sizes, comma separated (e.g. 1,2,4,8).
    #[arg(long, value_delimiter = ',', required_unless_present = "config")]
    n: Vec<u64>,
    /// Error bound as an exact rational ("1/10" or "0.1").
    #[arg(long, required_unless_present = "config")]
    epsilon: Option<String>,
    #[arg(long, default_value_t = 2)]
    q: u64,
    /// Population lower bound Ñ (state-optimal only).
    #[arg(long, default_value_t = 1)]
    n_lower_bound: u64,
    /// State-optimal safety exponent.
    #[arg(long, default_value_t = 5)]
    c: u32,
    /// Constant-state silent-round quota.
    #[arg(long, default_value_t = 8)]
    count_bound: u8,
    #[arg(long, required_unless_present = "config")]
    trials: Option<u64>,
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    /// Round cutoff per trial (default 10^7 for state-optimal, 10^5 else).
    #[arg(long)]
    cutoff: Option<u64>,
    /// CSV output path.
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all available cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct CounterArgs {
    /// Counter assembly file (.cm).
    #[arg(long)]
    program: PathBuf,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    q: u64,
    /// Initial counter value, e.g. `--init c1=6` or `--init c1=all`
    /// (one bit per node). Unmentioned counters start at 0.
    #[arg(long, value_name = "cK=V")]
    init: Vec<String>,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    cutoff: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct LonelyArgs {
    /// Election detector the reduction is built over.
    #[arg(long, default_value = "fixed-error")]
    base_algo: String,
    #[arg(long, value_delimiter = ',')]
    n: Vec<u64>,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    q: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    cutoff: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    algo: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    q: u64,
    #[arg(long, default_value_t = 1)]
    n_lower_bound: u64,
    /// Maximum exact steps.
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    /// Stop when live mass drops below this rational.
    #[arg(long, default_value = "1/1000000000")]
    tail_bound: String,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    algo: String,
    #[arg(long)]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    q: u64,
    #[arg(long, default_value_t = 1)]
    n_lower_bound: u64,
    #[arg(long, default_value_t = 5)]
    c: u32,
    #[arg(long, default_value_t = 8)]
    count_bound: u8,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    algo: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "1/10")]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    q: u64,
    #[arg(long, default_value_t = 1)]
    n_lower_bound: u64,
    #[arg(long)]
    cutoff: Option<u64>,
    /// Keep per-node action vectors only for the first N rounds (events and
    /// channel bits are always kept).
    #[arg(long)]
    action_window: Option<u64>,
    /// JSONL output path.
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Args(String),
    Overflow(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Args(_) => 2,
            CliError::Overflow(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Args(m) | CliError::Overflow(m) | CliError::Io(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Args(e.to_string())
    }
}

impl From<MachineError> for CliError {
    fn from(e: MachineError) -> Self {
        match e {
            MachineError::EnumerationOverflow { .. } => CliError::Overflow(e.to_string()),
            other => CliError::Args(other.to_string()),
        }
    }
}

fn parse_algo(s: &str) -> Result<SubKind, CliError> {
    SubKind::parse(s).ok_or_else(|| {
        CliError::Args(format!(
            "unknown algorithm `{s}` (expected state-optimal, fixed-error, constant-state, \
             or double-safe)"
        ))
    })
}

fn eps(s: &str) -> Result<(u64, u64), CliError> {
    parse_epsilon(s).map_err(CliError::Args)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

/// Parse one `--init` item: `c3=17` or `c1=all`.
fn parse_init_item(s: &str) -> Result<(usize, CounterInit), CliError> {
    let bad = || CliError::Args(format!("bad --init `{s}` (expected cK=<int|all>, K in 1..=4)"));
    let (k, v) = s.split_once('=').ok_or_else(bad)?;
    let k = k.strip_prefix('c').ok_or_else(bad)?;
    let idx: usize = k.parse().map_err(|_| bad())?;
    if !(1..=MAX_COUNTERS).contains(&idx) {
        return Err(bad());
    }
    let init = if v == "all" {
        CounterInit::All
    } else {
        CounterInit::Fixed(v.parse().map_err(|_| bad())?)
    };
    Ok((idx - 1, init))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "program".into())
}

/// Turn a JSON experiment config into a runnable experiment (reading any
/// referenced program file) plus its output path.
fn experiment_from_config(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<(Experiment, Option<PathBuf>), CliError> {
    let protocol = match cfg.protocol.as_str() {
        "lonely" => {
            let base = cfg.base.as_deref().unwrap_or("fixed-error");
            Protocol::Lonely(parse_algo(base)?)
        }
        "counter" => {
            let path = cfg
                .program
                .as_deref()
                .ok_or_else(|| CliError::Args("counter config needs `program`".into()))?;
            let path = PathBuf::from(path);
            let source = read_file(&path)?;
            let program = parse_program(&source).map_err(|e| CliError::Args(e.to_string()))?;
            let mut init = [CounterInit::Fixed(0); MAX_COUNTERS];
            if let Some(map) = &cfg.init {
                for (key, value) in map {
                    let spec = match value {
                        serde_json::Value::String(s) => format!("{key}={s}"),
                        other => format!("{key}={other}"),
                    };
                    let (idx, v) = parse_init_item(&spec)?;
                    init[idx] = v;
                }
            }
            Protocol::Counter { name: file_stem(&path), program, init }
        }
        algo => Protocol::Election(parse_algo(algo)?),
    };
    let sub = match &protocol {
        Protocol::Election(k) | Protocol::Lonely(k) => *k,
        Protocol::Counter { .. } => SubKind::DoubleSafe,
    };
    let exp = Experiment {
        protocol,
        q: cfg.q,
        epsilon: eps(&cfg.epsilon)?,
        n_lower_bound: cfg.n_lower_bound,
        c: cfg.c,
        count_bound: cfg.count_bound,
        ns: cfg.n.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        cutoff: cfg.cutoff.unwrap_or_else(|| default_cutoff(sub)),
        workers,
    };
    Ok((exp, cfg.out.as_ref().map(PathBuf::from)))
}

fn run_and_emit(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let cells = run_experiment(exp)?;
    write_file(out, &report_csv(&cells))?;
    print!("{}", report_text(&cells));
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_elect(args: &ElectArgs) -> Result<(), CliError> {
    if let Some(config_path) = &args.config {
        let text = read_file(config_path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Args(format!("{}: {e}", config_path.display())))?;
        let (exp, out) = experiment_from_config(&cfg, args.workers)?;
        let out = out
            .or_else(|| args.out.clone())
            .ok_or_else(|| CliError::Args("config or flags must set an output path".into()))?;
        return run_and_emit(&exp, &out);
    }
    let sub = parse_algo(args.algo.as_deref().expect("required"))?;
    let exp = Experiment {
        protocol: Protocol::Election(sub),
        q: args.q,
        epsilon: eps(args.epsilon.as_deref().expect("required"))?,
        n_lower_bound: args.n_lower_bound,
        c: args.c,
        count_bound: args.count_bound,
        ns: args.n.clone(),
        trials: args.trials.expect("required"),
        seed: args.seed.expect("required"),
        cutoff: args.cutoff.unwrap_or_else(|| default_cutoff(sub)),
        workers: args.workers,
    };
    if exp.ns.is_empty() {
        return Err(CliError::Args("--n needs at least one population size".into()));
    }
    run_and_emit(&exp, args.out.as_deref().expect("required"))
}

fn cmd_counter(args: &CounterArgs) -> Result<(), CliError> {
    let source = read_file(&args.program)?;
    let program = parse_program(&source).map_err(|e| CliError::Args(e.to_string()))?;
    let mut init = [CounterInit::Fixed(0); MAX_COUNTERS];
    for item in &args.init {
        let (idx, v) = parse_init_item(item)?;
        init[idx] = v;
    }
    if args.n.is_empty() {
        return Err(CliError::Args("--n needs at least one population size".into()));
    }
    let exp = Experiment {
        protocol: Protocol::Counter { name: file_stem(&args.program), program, init },
        q: args.q,
        epsilon: eps(&args.epsilon)?,
        n_lower_bound: 1,
        c: 5,
        count_bound: 8,
        ns: args.n.clone(),
        trials: args.trials,
        seed: args.seed,
        cutoff: args.cutoff.unwrap_or_else(|| default_cutoff(SubKind::DoubleSafe)),
        workers: args.workers,
    };
    run_and_emit(&exp, &args.out)
}

fn cmd_lonely(args: &LonelyArgs) -> Result<(), CliError> {
    let base = parse_algo(&args.base_algo)?;
    if args.n.is_empty() {
        return Err(CliError::Args("--n needs at least one population size".into()));
    }
    let exp = Experiment {
        protocol: Protocol::Lonely(base),
        q: args.q,
        epsilon: eps(&args.epsilon)?,
        n_lower_bound: 1,
        c: 5,
        count_bound: 8,
        ns: args.n.clone(),
        trials: args.trials,
        seed: args.seed,
        cutoff: args.cutoff.unwrap_or_else(|| default_cutoff(base)),
        workers: args.workers,
    };
    run_and_emit(&exp, &args.out)
}

fn rational_field(r: &BigRational) -> serde_json::Value {
    json!({ "exact": r.to_string(), "float": rational_to_f64(r) })
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let sub = parse_algo(&args.algo)?;
    let epsilon = eps(&args.epsilon)?;
    if args.n == 0 {
        return Err(CliError::Args("--n must be at least 1".into()));
    }
    let params = ElectionParams::new(sub, args.q, epsilon, args.n_lower_bound)
        .map_err(|e| CliError::Args(e.to_string()))?;
    let tail = parse_rational(&args.tail_bound)
        .map_err(|e| CliError::Args(format!("--tail-bound: {e}")))?;
    let machine = extract_machine(&ElectProgram::new(params), EXTRACTION_CAP)?.machine;
    let opts = AbsorbOptions { tail, horizon: args.horizon, ..AbsorbOptions::default() };
    let start = Configuration::uniform(machine.start(), args.n);
    let report = absorb_exact(&machine, &start, &opts).map_err(|e| match e {
        AnalysisError::SpaceTooLarge { .. } => CliError::Overflow(e.to_string()),
    })?;

    let profiles: Vec<serde_json::Value> = report
        .profiles
        .iter()
        .map(|(p, mass)| {
            json!({
                "profile": format_profile(p),
                "exact": mass.to_string(),
                "float": rational_to_f64(mass),
            })
        })
        .collect();
    let doc = json!({
        "protocol": sub.as_str(),
        "n": args.n,
        "epsilon": format!("{}/{}", epsilon.0, epsilon.1),
        "q": args.q,
        "n_lower_bound": args.n_lower_bound,
        "machine_states": machine.state_count(),
        "rounds": report.rounds,
        "truncated": report.truncated,
        "violation": rational_field(&report.violation),
        "unresolved": rational_field(&report.unresolved),
        "profiles": profiles,
        "total": report.total().to_string(),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serialization");
    text.push('\n');
    write_file(&args.out, &text)?;
    println!(
        "P(violation) = {} ≈ {:.8}{}",
        report.violation,
        rational_to_f64(&report.violation),
        if report.truncated { " (truncated at horizon)" } else { "" },
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<(), CliError> {
    let sub = parse_algo(&args.algo)?;
    let params = ElectionParams::with_options(
        sub,
        args.q,
        eps(&args.epsilon)?,
        args.n_lower_bound,
        args.c,
        args.count_bound,
    )
    .map_err(|e| CliError::Args(e.to_string()))?;
    let count = audit_state_count(&ElectProgram::new(params), EXTRACTION_CAP)?;
    println!("{count}");
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let sub = parse_algo(&args.algo)?;
    if args.n == 0 {
        return Err(CliError::Args("--n must be at least 1".into()));
    }
    let params = ElectionParams::new(sub, args.q, eps(&args.epsilon)?, args.n_lower_bound)
        .map_err(|e| CliError::Args(e.to_string()))?;
    let spec = NetworkSpec::uniform(ElectProgram::new(params), args.n as usize);
    let cutoff = args.cutoff.unwrap_or_else(|| default_cutoff(sub));
    let trace = run_execution(&spec, args.seed, cutoff);
    let file = fs::File::create(&args.out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", args.out.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    write_trace_jsonl(&trace, &mut writer, args.action_window)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out.display())))?;
    println!(
        "{} rounds, terminated={}, wrote {}",
        trace.rounds_elapsed,
        trace.terminated,
        args.out.display()
    );
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Elect(a) => cmd_elect(a),
        Cmd::Counter(a) => cmd_counter(a),
        Cmd::Lonely(a) => cmd_lonely(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Audit(a) => cmd_audit(a),
        Cmd::Trace(a) => cmd_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
