//! Command-line front end. [`run`] parses arguments, executes one subcommand and
//! returns the process exit code.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 input error, 3 internal invariant
//! violation, 4 budget exhausted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::generate::{self, WeightMode};
use crate::gmref::{self, GmOutcome};
use crate::init;
use crate::instance::{Allocation, Instance};
use crate::io::{self, InstanceFile, IoError, Mode, ResultFile, RoundCounts, SolverConfig};
use crate::oracle::{self, OracleBudget, OracleError};
use crate::rational::{self, Rational};
use crate::realloc::{self, SolveOptions, SolveResult};
use crate::verify::{self, Criterion, VerifyReport};

pub const CHECK_ENV: &str = "FAIRDIV_CHECK_INVARIANTS";

/// Invariant checking is on by default when `n * m` is at most this.
pub const CHECK_SIZE_LIMIT: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "fairdiv", version, about = "WEFX/WEQX and fPO allocations of bivalued goods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random bivalued instance.
    Gen {
        #[arg(long)]
        agents: usize,
        #[arg(long)]
        goods: usize,
        #[arg(long, value_parser = parse_rational)]
        k: Rational,
        #[arg(long, default_value = "equal")]
        weights: WeightMode,
        /// Random when absent; the seed used is printed to stderr.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a WEFX or WEQX allocation with equilibrium prices.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "wefx")]
        mode: Mode,
        /// Force invariant checking on (otherwise FAIRDIV_CHECK_INVARIANTS or size decides).
        #[arg(long)]
        check_invariants: bool,
        /// Include the full round-by-round trace.
        #[arg(long)]
        trace: bool,
        /// Owner id of every good for the welfare-maximizing start, comma separated.
        #[arg(long, value_delimiter = ',')]
        initial_owner: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute verdicts for a result file.
    Verify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Comma separated; defaults to the result's mode, equilibrium and fpo-cert.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<Criterion>>,
    },
    /// Exhaustive ground truth on small instances.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        list: Option<Mode>,
        /// Result file whose allocation is tested for Pareto optimality.
        #[arg(long)]
        check_po: Option<PathBuf>,
        /// Result file whose allocation is tested for fractional Pareto optimality.
        #[arg(long)]
        check_fpo: Option<PathBuf>,
        /// Cap on the number of allocations enumerated.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Run the reference algorithm on the two-agent cycling instance.
    Counterexample {
        #[arg(long, default_value_t = 10)]
        max_rounds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve random instances in both modes and record round counts as CSV.
    Bench {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Inclusive, e.g. 1-6.
        #[arg(long, default_value = "1-6", value_parser = parse_range)]
        n_range: (usize, usize),
        #[arg(long, default_value = "1-12", value_parser = parse_range)]
        m_range: (usize, usize),
        #[arg(long, default_value = "2,3,5,7/2", value_delimiter = ',', value_parser = parse_rational)]
        k_set: Vec<Rational>,
        #[arg(long, default_value = "random")]
        weights: WeightMode,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").or_else(|| s.split_once('-')).unwrap_or((s, s));
    let a: usize = a.trim().parse().map_err(|_| format!("bad range {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range {s:?}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("verification failed")]
    VerifyFailed,
    #[error("internal invariant violation: {0}")]
    Invariant(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Input(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Budget(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            if !matches!(e, CliError::VerifyFailed) {
                eprintln!("error: {e}");
            }
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen {
            agents,
            goods,
            k,
            weights,
            seed,
            out,
        } => cmd_gen(agents, goods, &k, weights, seed, out.as_deref()),
        Command::Solve {
            input,
            mode,
            check_invariants,
            trace,
            initial_owner,
            out,
        } => cmd_solve(&input, mode, check_invariants, trace, initial_owner, out.as_deref()),
        Command::Verify {
            input,
            result,
            criteria,
        } => cmd_verify(&input, &result, criteria),
        Command::Oracle {
            input,
            list,
            check_po,
            check_fpo,
            budget,
        } => cmd_oracle(&input, list, check_po.as_deref(), check_fpo.as_deref(), budget),
        Command::Counterexample { max_rounds, out } => cmd_counterexample(max_rounds, out.as_deref()),
        Command::Bench {
            trials,
            n_range,
            m_range,
            k_set,
            weights,
            seed,
            csv,
        } => cmd_bench(trials, n_range, m_range, &k_set, weights, seed, csv.as_deref()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => io::write_text(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

/// `--check-invariants`, then the environment variable, then `n * m <= 200`.
pub fn invariant_checking(flag: bool, inst: &Instance) -> Result<bool, CliError> {
    if flag {
        return Ok(true);
    }
    match std::env::var(CHECK_ENV) {
        Ok(v) if v == "1" => Ok(true),
        Ok(v) if v == "0" => Ok(false),
        Ok(v) => Err(CliError::Input(format!("{CHECK_ENV} must be 0 or 1, got {v:?}"))),
        Err(_) => Ok(inst.n() * inst.m() <= CHECK_SIZE_LIMIT),
    }
}

fn cmd_gen(
    n: usize,
    m: usize,
    k: &Rational,
    weights: WeightMode,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Input("--agents must be at least 1".into()));
    }
    if k <= &rational::one() {
        return Err(CliError::Input(crate::instance::InstanceError::DegenerateK.to_string()));
    }
    let seed = seed_or_random(seed);
    let inst = generate::seeded_instance(seed, n, m, k, weights);
    emit(out, &InstanceFile::from_instance(&inst).to_json())
}

fn owner_override(inst: &Instance, ids: &[String]) -> Result<Vec<usize>, CliError> {
    ids.iter()
        .map(|id| {
            inst.agent_labels()
                .iter()
                .position(|a| a == id.trim())
                .ok_or_else(|| CliError::Input(format!("--initial-owner: unknown agent {id:?}")))
        })
        .collect()
}

/// Certificates attached to every solver result.
pub fn certificates(mode: Mode, res: &SolveResult) -> Vec<VerifyReport> {
    let inst = res.state.instance();
    let alloc = res.state.allocation();
    [mode.criterion(), Criterion::Equilibrium, Criterion::FpoCert]
        .into_iter()
        .map(|c| verify::evaluate(c, inst, &alloc, Some(&res.state)))
        .collect()
}

/// Runs the solver and packages the output as a result file.
pub fn solve_to_result(
    inst: Arc<Instance>,
    mode: Mode,
    opts: &SolveOptions,
    with_trace: bool,
) -> Result<ResultFile, CliError> {
    let res = realloc::solve(inst.clone(), mode.metric(), opts).map_err(|e| match e {
        crate::error::SolveError::InvalidOverride(msg) => CliError::Input(format!("--initial-owner: {msg}")),
        other => CliError::Invariant(other.to_string()),
    })?;
    let certs = certificates(mode, &res);
    if let Some(bad) = certs.iter().find(|c| c.failed()) {
        return Err(CliError::Invariant(format!(
            "solver output fails its {} certificate",
            bad.criterion
        )));
    }
    let labels = inst.agent_labels();
    Ok(ResultFile {
        mode,
        allocation: io::bundles_by_label(&inst, &res.state.allocation()),
        prices: res.state.prices().to_vec(),
        certificates: certs,
        trace: with_trace.then(|| serde_json::to_value(&res.trace).expect("serializable")),
        rounds: RoundCounts {
            init_transfer_rounds: res.init_transfer_rounds,
            price_rises: res.price_rises,
            realloc_transfer_rounds: res.realloc_transfer_rounds,
            init_bound: init::transfer_round_bound(&inst),
            realloc_bound: (inst.n() * inst.m()) as u64,
        },
        config: Some(SolverConfig {
            initial_owner: res.trace.initial_owner.iter().map(|&i| labels[i].clone()).collect(),
            tie_break: "lowest-index".into(),
            check_invariants: opts.check_invariants,
        }),
    })
}

fn cmd_solve(
    input: &Path,
    mode: Mode,
    check_flag: bool,
    trace: bool,
    initial_owner: Option<Vec<String>>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let inst = Arc::new(io::read_instance(input)?);
    let opts = SolveOptions {
        initial_owner: initial_owner.map(|ids| owner_override(&inst, &ids)).transpose()?,
        check_invariants: invariant_checking(check_flag, &inst)?,
        audit: false,
    };
    let result = solve_to_result(inst, mode, &opts, trace)?;
    emit(out, &result.to_json())
}

/// Verdicts for `criteria` on a parsed result.
pub fn verify_result(
    inst: Arc<Instance>,
    result: &ResultFile,
    criteria: &[Criterion],
) -> Result<Vec<VerifyReport>, IoError> {
    let alloc = result.allocation_for(&inst)?;
    let state = result.state_for(inst.clone())?;
    Ok(criteria
        .iter()
        .map(|&c| verify::evaluate(c, &inst, &alloc, state.as_ref()))
        .collect())
}

fn cmd_verify(input: &Path, result: &Path, criteria: Option<Vec<Criterion>>) -> Result<(), CliError> {
    let inst = Arc::new(io::read_instance(input)?);
    let res = ResultFile::from_json(&io::read_text(result)?)?;
    let criteria = criteria.unwrap_or_else(|| vec![res.mode.criterion(), Criterion::Equilibrium, Criterion::FpoCert]);
    let reports = verify_result(inst, &res, &criteria)?;
    emit(None, &to_json(&reports))?;
    if reports.iter().any(VerifyReport::failed) {
        return Err(CliError::VerifyFailed);
    }
    Ok(())
}

fn cmd_oracle(
    input: &Path,
    list: Option<Mode>,
    check_po: Option<&Path>,
    check_fpo: Option<&Path>,
    budget: Option<u64>,
) -> Result<(), CliError> {
    let inst = io::read_instance(input)?;
    let mut budget_cfg = OracleBudget::default();
    if let Some(b) = budget {
        budget_cfg.max_allocations = b;
    }
    let load = |p: &Path| -> Result<Allocation, CliError> {
        Ok(ResultFile::from_json(&io::read_text(p)?)?.allocation_for(&inst)?)
    };
    let mut report = serde_json::Map::new();
    let mut failed = false;
    if let Some(mode) = list {
        let set = match mode {
            Mode::Wefx => oracle::wefx_set(&inst, &budget_cfg)?,
            Mode::Weqx => oracle::weqx_set(&inst, &budget_cfg)?,
        };
        let entries: Vec<_> = set.iter().map(|a| io::bundles_by_label(&inst, a)).collect();
        report.insert("mode".into(), json!(mode));
        report.insert("count".into(), json!(entries.len()));
        report.insert("allocations".into(), json!(entries));
    }
    if let Some(p) = check_po {
        let v = oracle::is_po_bruteforce(&inst, &load(p)?, &budget_cfg)?;
        failed |= !v.passed();
        report.insert("po".into(), serde_json::to_value(v).expect("serializable"));
    }
    if let Some(p) = check_fpo {
        let v = oracle::is_fpo_lp(&inst, &load(p)?, &budget_cfg)?;
        failed |= !v.passed();
        report.insert("fpo".into(), serde_json::to_value(v).expect("serializable"));
    }
    if report.is_empty() {
        return Err(CliError::Input(
            "nothing to do: pass --list, --check-po or --check-fpo".into(),
        ));
    }
    emit(None, &to_json(&report))?;
    if failed {
        return Err(CliError::VerifyFailed);
    }
    Ok(())
}

fn cmd_counterexample(max_rounds: usize, out: Option<&Path>) -> Result<(), CliError> {
    if max_rounds == 0 {
        return Err(CliError::Input("--max-rounds must be at least 1".into()));
    }
    let inst = Arc::new(gmref::cycling_instance());
    let run =
        gmref::run_gm(inst, Some(&gmref::CYCLING_OWNER), max_rounds).map_err(|e| CliError::Invariant(e.to_string()))?;
    let summary = json!({ "result": run.outcome, "rounds": run.trace.len() - 1 });
    emit(None, &to_json(&summary))?;
    if let Some(p) = out {
        io::write_text(p, &to_json(&run.trace))?;
    }
    match run.outcome {
        GmOutcome::CycleDetected(_) => Ok(()),
        GmOutcome::BudgetExhausted { steps } => {
            Err(CliError::Budget(format!("no cycle detected within {steps} round(s)")))
        }
        other => Err(CliError::Invariant(format!(
            "the reference run ended unexpectedly: {other:?}"
        ))),
    }
}

/// One CSV row of `bench`.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: String,
    pub mode: Mode,
    pub init_rounds: usize,
    pub realloc_rounds: usize,
    pub bound_init: u64,
    pub bound_realloc: u64,
    /// Seconds.
    pub wallclock: f64,
}

/// Instance of bench trial `seed`: sizes and `k` are drawn from the same stream as
/// the valuations.
pub fn bench_instance(
    seed: u64,
    n_range: (usize, usize),
    m_range: (usize, usize),
    k_set: &[Rational],
    weights: WeightMode,
) -> Instance {
    let mut rng = generate::rng_from_seed(seed);
    let n = rng.gen_range(n_range.0.max(1)..=n_range.1.max(1));
    let m = rng.gen_range(m_range.0..=m_range.1);
    let k = k_set.choose(&mut rng).expect("non-empty k set").clone();
    generate::random_instance(&mut rng, n, m, &k, weights)
}

pub fn bench_rows(
    trials: usize,
    n_range: (usize, usize),
    m_range: (usize, usize),
    k_set: &[Rational],
    weights: WeightMode,
    seed: u64,
) -> Result<Vec<BenchRow>, CliError> {
    if k_set.iter().any(|k| k <= &rational::one()) {
        return Err(CliError::Input("every k must exceed 1".into()));
    }
    if k_set.is_empty() {
        return Err(CliError::Input("--k-set is empty".into()));
    }
    let mut rows = Vec::with_capacity(2 * trials);
    for t in 0..trials as u64 {
        let s = seed.wrapping_add(t);
        let inst = Arc::new(bench_instance(s, n_range, m_range, k_set, weights));
        for mode in [Mode::Wefx, Mode::Weqx] {
            let opts = SolveOptions {
                check_invariants: invariant_checking(false, &inst)?,
                ..Default::default()
            };
            let start = Instant::now();
            let res = realloc::solve(inst.clone(), mode.metric(), &opts)
                .map_err(|e| CliError::Invariant(format!("seed {s}, {mode}: {e}")))?;
            let wallclock = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                seed: s,
                n: inst.n(),
                m: inst.m(),
                k: rational::format(inst.k()),
                mode,
                init_rounds: res.init_transfer_rounds,
                realloc_rounds: res.realloc_transfer_rounds,
                bound_init: init::transfer_round_bound(&inst),
                bound_realloc: (inst.n() * inst.m()) as u64,
                wallclock,
            });
        }
    }
    Ok(rows)
}

fn cmd_bench(
    trials: usize,
    n_range: (usize, usize),
    m_range: (usize, usize),
    k_set: &[Rational],
    weights: WeightMode,
    seed: Option<u64>,
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    let seed = seed_or_random(seed);
    let rows = bench_rows(trials, n_range, m_range, k_set, weights, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    emit(csv_out, &String::from_utf8(bytes).expect("csv is utf-8"))?;
    if let Some(r) = rows
        .iter()
        .find(|r| r.init_rounds as u64 > r.bound_init || r.realloc_rounds as u64 > r.bound_realloc)
    {
        return Err(CliError::Invariant(format!("seed {} exceeds a round bound", r.seed)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("1-6"), Ok((1, 6)));
        assert_eq!(parse_range("2..5"), Ok((2, 5)));
        assert_eq!(parse_range("3"), Ok((3, 3)));
        assert!(parse_range("5-2").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(run(["fairdiv", "gen", "--agents", "2"]), 2);
        assert_eq!(run(["fairdiv", "frobnicate"]), 2);
        assert_eq!(
            run(["fairdiv", "gen", "--agents", "2", "--goods", "3", "--k", "1", "--seed", "1"]),
            2
        );
    }

    #[test]
    fn bench_rows_respect_bounds() {
        let ks = [rational::int(2), rational::ratio(7, 2)];
        let rows = bench_rows(20, (1, 4), (0, 8), &ks, WeightMode::Random, 9).unwrap();
        assert_eq!(rows.len(), 40);
        assert!(rows
            .iter()
            .all(|r| r.init_rounds as u64 <= r.bound_init && r.realloc_rounds as u64 <= r.bound_realloc));
    }

    #[test]
    fn counterexample_needs_two_rounds() {
        assert_eq!(run(["fairdiv", "counterexample", "--max-rounds", "1"]), 4);
        assert_eq!(run(["fairdiv", "counterexample", "--max-rounds", "2"]), 0);
    }
}
