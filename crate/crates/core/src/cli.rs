//! Command-line front end: `solve`, `simulate`, `mc-error` and `list-problems`.

use crate::dp::{mc_error, simulate, Backend, DpError, McOptions, ProblemSpec, Solution, Status, Trajectory};
use crate::json::mat_to_rows;
use crate::problems::{ProblemError, RunConfig, PROBLEM_SCHEMAS};
use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PATHOLOGY: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Environment variable consulted for the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "EQDP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "eqdp", version, about = "Stochastic control with extended quadratic costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverFlags {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides solver.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides EQDP_WORKERS and solver.workers.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Expectation back end.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Backend>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write solution.json and summary.txt.
    Solve(SolverFlags),
    /// Run a stored solution in closed loop; one CSV per seed plus stats.json.
    Simulate {
        #[command(flatten)]
        solver: SolverFlags,
        /// Solution JSON from `solve` (defaults to OUT/solution.json).
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Seed count `S` (seeds 0..S) or a comma-separated list.
        #[arg(long)]
        seeds: Option<String>,
        /// Initial state, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Initial mode (0-based).
        #[arg(long)]
        s0: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Solve once per seed and report coefficient spread (mc_error.json).
    McError {
        #[command(flatten)]
        solver: SolverFlags,
        /// Seed count `S` (seeds 0..S) or a comma-separated list.
        #[arg(long)]
        seeds: String,
    },
    /// Print builder names and example configurations.
    ListProblems,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown backend '{s}' (expected mc or exact)"))
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Pathology(Status, String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Pathology(..) => EXIT_PATHOLOGY,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("config error: {m}"),
            CliError::Pathology(_, m) => format!("pathology: {m}"),
            CliError::Io(m) => format!("i/o error: {m}"),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DpError> for CliError {
    fn from(e: DpError) -> Self {
        match e {
            DpError::MissingPolicy { .. } => CliError::Pathology(Status::Blocked, e.to_string()),
            DpError::ThreadPool(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Parses `S` as seeds `0..S`, or `a,b,c` as an explicit list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse seeds '{s}'"));
    if s.contains(',') {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let count: u64 = s.trim().parse().map_err(|_| bad())?;
        Ok((0..count).collect())
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("cannot parse '{x}' as a number")))
        })
        .collect()
}

struct Loaded {
    config: RunConfig,
    spec: ProblemSpec,
    opts: McOptions,
}

fn load(flags: &SolverFlags) -> Result<Loaded, CliError> {
    let text = read(&flags.config)?;
    let config = RunConfig::from_json(&text).map_err(|e| {
        CliError::Config(format!(
            "{} line {}, column {}: {e}",
            flags.config.display(),
            e.line(),
            e.column()
        ))
    })?;
    let spec = config.build_spec()?;
    let mut opts = config.options();
    if let Some(seed) = flags.seed {
        opts.seed = seed;
    }
    if let Some(backend) = flags.backend {
        opts.backend = backend;
    }
    opts.workers = match flags.workers {
        Some(w) => Some(w),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                CliError::Config(format!("{WORKERS_ENV}='{v}' is not a worker count"))
            })?),
            Err(_) => opts.workers,
        },
    };
    if opts.workers == Some(0) {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    Ok(Loaded { config, spec, opts })
}

fn pathology_message(status: Status, sol: &Solution) -> String {
    let at = sol
        .statuses
        .iter()
        .enumerate()
        .find_map(|(t, row)| row.iter().position(|&s| s == status).map(|s| (t, s)));
    let place = at.map_or(String::new(), |(t, s)| format!(" at t={t}, mode {s}"));
    let detail = match status {
        Status::Diverging => {
            "the cost-to-go exceeded the divergence bound; the dynamics are too uncertain \
             to control (uncertainty threshold principle)"
        }
        Status::Nonconvex => "a Q function is not convex in the input",
        Status::Unbounded => "a Q function is unbounded below in the input",
        Status::Improper => "a Q function has an empty constraint set",
        Status::Blocked => "a reachable successor mode has no valid cost-to-go",
        Status::Ok => "",
    };
    format!("{}{place}: {detail}", status.name())
}

/// Human-readable listing of statuses and policies.
pub fn summary(config: &RunConfig, sol: &Solution) -> String {
    let mut s = String::new();
    let m = &sol.meta;
    let _ = writeln!(s, "problem: {}", config.problem.kind());
    let _ = writeln!(
        s,
        "n={} m={} K={} N={} seed={} backend={}",
        m.n,
        m.m,
        m.k,
        m.samples,
        m.seed,
        match m.backend {
            Backend::Mc => "mc",
            Backend::Exact => "exact",
        }
    );
    match m.iterations {
        Some(it) => {
            let _ = writeln!(s, "infinite horizon, gamma={}, iterations={it}", m.gamma);
        }
        None => {
            let _ = writeln!(s, "finite horizon T={}", m.horizon);
        }
    }
    if let Some(c) = m.convergence {
        let _ = writeln!(s, "convergence (max coefficient change): {c:e}");
    }
    let _ = writeln!(s, "status: {}", sol.worst_status().name());
    for w in &sol.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    for (t, row) in sol.policies.iter().enumerate() {
        for (mode, pol) in row.iter().enumerate() {
            let st = sol.statuses[t][mode];
            let label = if m.time_invariant { format!("s={mode}") } else { format!("t={t} s={mode}") };
            match pol {
                Some(p) => {
                    let _ = writeln!(
                        s,
                        "{label} [{}] K={:?} k={:?}",
                        st.name(),
                        mat_to_rows(p.gain()),
                        p.offset().as_slice()
                    );
                }
                None => {
                    let _ = writeln!(s, "{label} [{}] no policy", st.name());
                }
            }
        }
    }
    s
}

fn solve_cmd(flags: &SolverFlags, out: &mut dyn Write) -> Result<(), CliError> {
    let Loaded { config, spec, opts } = load(flags)?;
    let sol = config.solve(&spec, &opts)?;
    ensure_dir(&flags.out)?;
    let json = serde_json::to_vec_pretty(&sol).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&flags.out.join("solution.json"), &json)?;
    let text = summary(&config, &sol);
    write_file(&flags.out.join("summary.txt"), text.as_bytes())?;
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
    let worst = sol.worst_status();
    if worst != Status::Ok {
        return Err(CliError::Pathology(worst, pathology_message(worst, &sol)));
    }
    Ok(())
}

#[derive(Serialize)]
struct MeanStd {
    mean: f64,
    std: f64,
}

fn mean_std(xs: &[f64]) -> Option<MeanStd> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std })
}

#[derive(Serialize)]
struct SimStats {
    seeds: Vec<u64>,
    steps: usize,
    /// Total cost (stage costs plus terminal cost when the horizon is reached).
    total_cost: Option<MeanStd>,
    mean_stage_cost: Option<MeanStd>,
}

fn write_trajectory(path: &Path, tr: &Trajectory, n: usize, m: usize) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec!["t".to_string(), "s".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    header.push("stage_cost".into());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for t in 0..tr.steps() {
        let mut rec = vec![t.to_string(), tr.modes[t].to_string()];
        rec.extend(tr.states[t].iter().map(|v| v.to_string()));
        rec.extend(tr.inputs[t].iter().map(|v| v.to_string()));
        rec.push(tr.stage_costs[t].to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn simulate_cmd(
    flags: &SolverFlags,
    solution: Option<&Path>,
    seeds: Option<&str>,
    x0: Option<&str>,
    s0: Option<usize>,
    steps: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let Loaded { config, spec, .. } = load(flags)?;
    let sol_path = solution.map_or_else(|| flags.out.join("solution.json"), Path::to_path_buf);
    let sol: Solution = serde_json::from_str(&read(&sol_path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", sol_path.display())))?;
    let defaults = config.simulate.clone().unwrap_or_default();
    let seeds = match seeds {
        Some(s) => parse_seeds(s)?,
        None => defaults.seeds.unwrap_or_else(|| vec![0]),
    };
    let x0 = match x0 {
        Some(s) => parse_vector(s)?,
        None => defaults
            .x0
            .ok_or_else(|| CliError::Config("no initial state: pass --x0 or set simulate.x0".into()))?,
    };
    let s0 = s0.or(defaults.s0).unwrap_or(0);
    let steps = match steps.or(defaults.steps) {
        Some(k) => k,
        None if !sol.meta.time_invariant => sol.meta.horizon,
        None => {
            return Err(CliError::Config(
                "infinite-horizon solution: pass --steps or set simulate.steps".into(),
            ))
        }
    };
    let x0 = DVector::from_vec(x0);
    ensure_dir(&flags.out)?;
    let mut totals = Vec::with_capacity(seeds.len());
    let mut means = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let tr = simulate(&spec, &sol, &x0, s0, steps, seed)?;
        write_trajectory(&flags.out.join(format!("trajectory_{seed}.csv")), &tr, spec.n, spec.m)?;
        totals.push(tr.total_cost);
        means.push(tr.mean_stage_cost());
    }
    let nonempty = steps > 0;
    let stats = SimStats {
        seeds,
        steps,
        total_cost: if nonempty { mean_std(&totals) } else { None },
        mean_stage_cost: if nonempty { mean_std(&means) } else { None },
    };
    let json = serde_json::to_vec_pretty(&stats).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&flags.out.join("stats.json"), &json)?;
    out.write_all(&json).and_then(|_| writeln!(out)).map_err(|e| CliError::Io(e.to_string()))
}

fn mc_error_cmd(flags: &SolverFlags, seeds: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let Loaded { config, spec, opts } = load(flags)?;
    if !config.is_finite() {
        return Err(CliError::Config("mc-error needs a finite-horizon configuration".into()));
    }
    let seeds = parse_seeds(seeds)?;
    let report = mc_error(&spec, &opts, &seeds)?;
    ensure_dir(&flags.out)?;
    let json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&flags.out.join("mc_error.json"), &json)?;
    writeln!(out, "max std of V coefficients over {} seeds: {:e}", seeds.len(), report.max_v_std())
        .map_err(|e| CliError::Io(e.to_string()))
}

fn list_problems(out: &mut dyn Write) -> Result<(), CliError> {
    for (name, schema) in PROBLEM_SCHEMAS {
        writeln!(out, "{name}\n  {schema}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(flags) => solve_cmd(flags, out),
        Command::Simulate {
            solver,
            solution,
            seeds,
            x0,
            s0,
            steps,
        } => simulate_cmd(
            solver,
            solution.as_deref(),
            seeds.as_deref(),
            x0.as_deref(),
            *s0,
            *steps,
            out,
        ),
        Command::McError { solver, seeds } => mc_error_cmd(solver, seeds, out),
        Command::ListProblems => list_problems(out),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.message());
            e.code()
        }
    }
}
