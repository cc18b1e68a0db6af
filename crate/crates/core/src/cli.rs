//! Command-line front end. Every subcommand prints one JSON document.
//!
//! Exit status: 0 on success, 2 for invalid input, 3 when a budget ran out.

use std::ffi::OsString;
use std::io::{BufReader, Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cutting_plane::{solve, SolverConfig, ValidationPolicy};
use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, Dims};
use crate::io::{decomposition_json, read_density, to_json, DensityMatrixJson, VerdictJson, WitnessJson};
use crate::oracle::Backend;
use crate::partial_info::{read_measurements_into, subspace_solve, MeasurementSet, SubspaceVerdict};
use crate::states::{bell_state, isotropic, random_separable, random_state, werner};
use crate::verifiers::{frank_wolfe_nearest, ppt_test, ppt_witness, validate_witness};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sepwit", version, about = "Entanglement witnesses for bipartite density matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide separability of a density matrix.
    Solve(SolveArgs),
    /// Partial-transpose test, with a witness when the state is PPT-negative.
    Ppt(InputArgs),
    /// Check a witness against a state.
    WitnessCheck(WitnessCheckArgs),
    /// Witness search from expectation values (JSON lines).
    Partial(PartialArgs),
    /// Frank–Wolfe projection onto the separable set.
    NearestSep(NearestArgs),
    /// Emit a test state.
    Generate(GenerateArgs),
    /// Time the solver on a fixed set of instances.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Input file; `-` or absent reads standard input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleArg {
    Seesaw,
    Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ValidationArg {
    Accept,
    Confirm,
    Strict,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_oracle_calls: Option<usize>,
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    #[arg(long)]
    grid_h: Option<f64>,
    #[arg(long, value_enum)]
    validation: Option<ValidationArg>,
    /// Solver configuration as JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read_file(p)?)
                .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", p.display())))?,
            None => SolverConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.oracle.seed = s;
        }
        if let Some(c) = self.max_oracle_calls {
            cfg.max_oracle_calls = Some(c);
        }
        if let Some(o) = self.oracle {
            cfg.oracle.backend = match o {
                OracleArg::Seesaw => Backend::Seesaw,
                OracleArg::Grid => Backend::Grid,
            };
        }
        if let Some(h) = self.grid_h {
            cfg.oracle.grid_h = h;
        }
        if let Some(v) = self.validation {
            cfg.validation = match v {
                ValidationArg::Accept => ValidationPolicy::Accept,
                ValidationArg::Confirm => ValidationPolicy::Confirm,
                ValidationArg::Strict => ValidationPolicy::Strict,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct WitnessCheckArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Witness JSON with `M`, `N` and canonical `coefficients`.
    #[arg(long)]
    witness: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct PartialArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(short = 'M', long = "m", default_value_t = 2)]
    m: usize,
    #[arg(short = 'N', long = "n", default_value_t = 2)]
    n: usize,
    /// Reject observables that are not tensor products
    #[arg(long)]
    separable_basis: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct NearestArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Werner,
    Isotropic,
    Bell,
    Mixed,
    Random,
    RandomSeparable,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Werner weight or isotropic fidelity.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Local dimension for isotropic states.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(short = 'M', long = "m", default_value_t = 2)]
    m: usize,
    #[arg(short = 'N', long = "n", default_value_t = 2)]
    n: usize,
    /// Number of product terms for random separable states.
    #[arg(long, default_value_t = 4)]
    terms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read_file(p: &PathBuf) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))
}

fn read_input(path: &Option<PathBuf>, stdin: &mut dyn Read) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => read_file(p),
        _ => {
            let mut s = String::new();
            stdin.read_to_string(&mut s).map_err(|e| Error::InvalidParameter(format!("stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn emit<T: Serialize>(value: &T, output: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    let mut text = to_json(value)?;
    text.push('\n');
    let write_err = |e: std::io::Error| Error::InvalidParameter(format!("write: {e}"));
    match output {
        Some(p) => std::fs::write(p, text).map_err(write_err),
        None => stdout.write_all(text.as_bytes()).map_err(write_err),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExhausted { .. } | Error::OracleBudget { .. } | Error::GridTooFine { .. } => EXIT_BUDGET,
        _ => EXIT_INPUT,
    }
}

fn solve_cmd(a: &SolveArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<()> {
    let rho = read_density(&read_input(&a.io.input, stdin)?)?;
    let cfg = a.solver.config()?;
    let verdict = solve(&rho, a.solver.delta, &cfg)?;
    emit(&VerdictJson::from_verdict(&verdict), &a.io.output, stdout)
}

fn ppt_cmd(a: &InputArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<()> {
    let rho = read_density(&read_input(&a.input, stdin)?)?;
    let report = ppt_test(&rho);
    let witness = if report.is_ppt {
        None
    } else {
        let (w, margin) = ppt_witness(&rho)?;
        Some(WitnessJson::from_operator(&w, Some(margin), Some(true)))
    };
    let out = json!({
        "verdict": report.label(),
        "min_eigenvalue": report.min_eigenvalue,
        "eigenvalues": report.eigenvalues,
        "witness": witness,
    });
    emit(&out, &a.output, stdout)
}

fn witness_check_cmd(a: &WitnessCheckArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<()> {
    let rho = read_density(&read_input(&a.io.input, stdin)?)?;
    let w: WitnessJson = serde_json::from_str(&read_file(&a.witness)?)
        .map_err(|e| Error::InvalidParameter(format!("witness: {e}")))?;
    let op = w.to_operator()?;
    let cfg = a.solver.config()?;
    let check = validate_witness(&op, &rho, a.solver.delta, &cfg.oracle)?;
    let out = json!({
        "validity": check.validity,
        "value_on_state": check.value_on_state,
        "f_lower": check.f_lower,
        "f_upper": check.f_upper,
    });
    emit(&out, &a.io.output, stdout)
}

fn partial_cmd(a: &PartialArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<()> {
    let dims = Dims::new(a.m, a.n)?;
    let mut ms = if a.separable_basis { MeasurementSet::local(dims) } else { MeasurementSet::new(dims) };
    match &a.io.input {
        Some(p) if p.as_os_str() != "-" => {
            let f = std::fs::File::open(p).map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))?;
            read_measurements_into(&mut ms, BufReader::new(f))?
        }
        _ => read_measurements_into(&mut ms, BufReader::new(stdin) as BufReader<&mut dyn Read>)?,
    };
    let cfg = a.solver.config()?;
    let out: Value = match subspace_solve(&ms, a.solver.delta, &cfg)? {
        SubspaceVerdict::Entangled { witness, observable_weights, oracle_calls, .. } => json!({
            "verdict": "ENTANGLED",
            "witness": WitnessJson::from_operator(&witness.operator, Some(witness.margin), Some(witness.certified)),
            "observable_weights": observable_weights,
            "oracle_calls": oracle_calls,
            "j": ms.j(),
        }),
        SubspaceVerdict::Inconclusive { oracle_calls, .. } => json!({
            "verdict": "INCONCLUSIVE",
            "oracle_calls": oracle_calls,
            "j": ms.j(),
        }),
    };
    emit(&out, &a.io.output, stdout)
}

fn nearest_cmd(a: &NearestArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<()> {
    let rho = read_density(&read_input(&a.io.input, stdin)?)?;
    let cfg = SolverConfig::default();
    let out = frank_wolfe_nearest(&rho, a.delta, a.max_steps, &cfg.oracle, a.seed)?;
    let v = json!({
        "distance": out.distance,
        "certified": out.certified,
        "steps": out.steps,
        "oracle_calls": out.oracle_calls,
        "decomposition": decomposition_json(&out.decomposition),
    });
    emit(&v, &a.io.output, stdout)
}

fn generate_cmd(a: &GenerateArgs, stdout: &mut dyn Write) -> Result<()> {
    let rho: DensityMatrix = match a.family {
        Family::Werner => werner(a.p)?,
        Family::Isotropic => isotropic(a.d, a.p)?,
        Family::Bell => bell_state(),
        Family::Mixed => DensityMatrix::maximally_mixed(Dims::new(a.m, a.n)?),
        Family::Random => random_state(Dims::new(a.m, a.n)?, a.seed),
        Family::RandomSeparable => random_separable(Dims::new(a.m, a.n)?, a.terms, a.seed)?.0,
    };
    emit(&DensityMatrixJson::from_state(&rho), &a.output, stdout)
}

fn bench_cmd(a: &BenchArgs, stdout: &mut dyn Write) -> Result<()> {
    let d22 = Dims::new(2, 2)?;
    let d23 = Dims::new(2, 3)?;
    let instances: Vec<(String, DensityMatrix)> = vec![
        ("bell".into(), bell_state()),
        ("werner_0.2".into(), werner(0.2)?),
        ("werner_0.5".into(), werner(0.5)?),
        ("isotropic3_0.5".into(), isotropic(3, 0.5)?),
        ("random_2x2".into(), random_state(d22, a.seed)),
        ("random_2x3".into(), random_state(d23, a.seed)),
        ("separable_2x2".into(), random_separable(d22, 4, a.seed)?.0),
    ];
    let cfg = SolverConfig { seed: a.seed, ..SolverConfig::default() };
    let mut rows = Vec::new();
    for (name, rho) in instances {
        let start = Instant::now();
        let v = solve(&rho, a.delta, &cfg)?;
        rows.push(json!({
            "instance": name,
            "verdict": v.kind,
            "oracle_calls": v.oracle_calls,
            "certificate_oracle_calls": v.certificate_oracle_calls,
            "seconds": start.elapsed().as_secs_f64(),
        }));
    }
    emit(&rows, &a.output, stdout)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve_cmd(a, stdin, stdout),
        Command::Ppt(a) => ppt_cmd(a, stdin, stdout),
        Command::WitnessCheck(a) => witness_check_cmd(a, stdin, stdout),
        Command::Partial(a) => partial_cmd(a, stdin, stdout),
        Command::NearestSep(a) => nearest_cmd(a, stdin, stdout),
        Command::Generate(a) => generate_cmd(a, stdout),
        Command::Bench(a) => bench_cmd(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the global thread pool from `SEPWIT_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("SEPWIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}
