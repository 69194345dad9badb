//! Command-line front end: `gen`, `solve`, `sweep` and `bench`.
//!
//! Exit codes: 0 success, 1 internal invariant violation, 2 usage error,
//! 3 IO or parse error, 4 budget exhausted (partial result).

pub mod plan;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use kvote::bnb::{self, Solution, SolveOptions};
use kvote::bounds;
use kvote::gen_io::{self, GenConfig, GenMode, ResultRecord, DEFAULT_BIAS};
use kvote::milp_export::{self, FormulationKind};
use kvote::{polysolve, Instance, OwaWeights};

use plan::{BenchPlan, PlanError};

#[derive(Debug, Parser)]
#[command(name = "kvote", version, about = "Exact k-sum approval-voting committee solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Solve one instance for a single k (or bottom-h).
    Solve(SolveArgs),
    /// Solve every k from n down to 1 and write one CSV row per k.
    Sweep(SweepArgs),
    /// Run a benchmark plan and write an aggregate CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uniform,
    Biased,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub mode: ModeArg,
    /// Approval probability for biased mode.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Coverz,
    CoverzSeed,
    Coverx,
    CoverxSeed,
    Kcentrum,
    Assignment,
}

impl From<KindArg> for FormulationKind {
    fn from(k: KindArg) -> Self {
        use milp_export::CutPolicy::*;
        match k {
            KindArg::Coverz => FormulationKind::CoverZ(FullEnumeration),
            KindArg::CoverzSeed => FormulationKind::CoverZ(SeedOnly),
            KindArg::Coverx => FormulationKind::CoverX(FullEnumeration),
            KindArg::CoverxSeed => FormulationKind::CoverX(SeedOnly),
            KindArg::Kcentrum => FormulationKind::KCentrum,
            KindArg::Assignment => FormulationKind::Assignment,
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Per-solve time budget in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub node_limit: Option<u64>,
    /// Disable variable fixing.
    #[arg(long)]
    pub no_preprocess: bool,
    /// Disable the k / k+1 bound chain.
    #[arg(long)]
    pub no_chain_bounds: bool,
}

impl SearchArgs {
    pub fn options(&self) -> Result<SolveOptions, CliError> {
        let time_limit = match self.time_limit {
            Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
            Some(s) => return Err(CliError::Usage(format!("--time-limit must be positive, got {s}"))),
            None => None,
        };
        Ok(SolveOptions {
            node_limit: self.node_limit,
            time_limit,
            preprocessing: !self.no_preprocess,
            chain_bounds: !self.no_chain_bounds,
            ..SolveOptions::default()
        })
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("objective").required(true).args(["k", "bottom_h"]))]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Minimise the sum of the k largest distances.
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimise the sum of the h smallest distances.
    #[arg(long)]
    pub bottom_h: Option<usize>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write the MILP model of this kind (k-sum only).
    #[arg(long, value_enum)]
    pub export: Option<KindArg>,
    /// Where to write the exported model; defaults to `<in>.<kind>.k<k>.lp`.
    #[arg(long)]
    pub lp_out: Option<PathBuf>,
    /// Committee size limit added to the exported model.
    #[arg(long)]
    pub size: Option<usize>,
    /// Append-free CSV with a single result row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub plan: PathBuf,
    /// Aggregate CSV path; overrides the plan's `summary`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-solve CSV path; overrides the plan's `rows`.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Solver(kvote::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: kvote::Error },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl From<kvote::Error> for CliError {
    fn from(e: kvote::Error) -> Self {
        match e {
            kvote::Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Solver(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Solver(kvote::Error::Io(e))
    }
}

impl CliError {
    fn from_ref(e: &kvote::Error) -> i32 {
        match e {
            kvote::Error::InvalidArgument(_) => 2,
            kvote::Error::ResourceLimit { .. } => 4,
            _ => 3,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Plan(_) => 3,
            CliError::Solver(kvote::Error::ResourceLimit { .. }) => 4,
            CliError::Solver(_) => 3,
            CliError::File { source, .. } => CliError::from_ref(source),
            CliError::Invariant(_) => 1,
        }
    }
}

/// Whether every solve finished with proven optimality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Optimal,
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Optimal => 0,
            Outcome::Partial => 4,
        }
    }

    fn of(optimal: bool) -> Self {
        if optimal {
            Outcome::Optimal
        } else {
            Outcome::Partial
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

pub fn gen_config(args: &GenArgs) -> Result<GenConfig, CliError> {
    let mode = match (args.mode, args.p) {
        (ModeArg::Uniform, None) => GenMode::Uniform,
        (ModeArg::Uniform, Some(_)) => {
            return Err(CliError::Usage("--p only applies to --mode biased".into()))
        }
        (ModeArg::Biased, p) => GenMode::Biased(p.unwrap_or(DEFAULT_BIAS)),
    };
    let config = GenConfig {
        n: args.n as usize,
        m: args.m as usize,
        mode,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let config = gen_config(args)?;
    let instance = gen_io::generate(&config)?;
    gen_io::write_instance(&instance, Some(&config.provenance()), &args.out).map_err(at(&args.out))?;
    writeln!(out, "wrote {} ({} voters, {} candidates, {})", args.out.display(), config.n, config.m, config.mode)?;
    Ok(Outcome::Optimal)
}

fn at(path: &Path) -> impl FnOnce(kvote::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| at(path)(kvote::Error::Io(e))
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn print_solution(out: &mut dyn Write, s: &Solution) -> io::Result<()> {
    writeln!(out, "committee: {}", s.committee)?;
    writeln!(out, "objective: {}", s.value)?;
    writeln!(out, "optimal: {}", s.stats.optimal)?;
    writeln!(out, "lower_bound: {}", s.stats.lower_bound)?;
    writeln!(out, "nodes: {}", s.stats.nodes)?;
    writeln!(out, "time_s: {:.6}", s.stats.elapsed_secs)?;
    writeln!(out, "root_bound: {}", s.stats.root_lower_bound)?;
    writeln!(out, "root_gap_pct: {:.4}", s.root_gap_pct())?;
    writeln!(out, "solved_at_root: {}", s.stats.solved_at_root)?;
    writeln!(out, "fixed: {}", s.stats.fixed_count)
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let options = args.search.options()?;
    let instance = gen_io::read_instance(&args.input).map_err(at(&args.input))?;
    if let Some(h) = args.bottom_h {
        if args.export.is_some() {
            return Err(CliError::Usage("--export applies to --k only".into()));
        }
        let s = polysolve::solve_bottom_h(&instance, h)?;
        writeln!(out, "committee: {}", s.committee)?;
        writeln!(out, "objective: {}", s.value)?;
        let support: Vec<String> = s.support.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(out, "support: {}", support.join(" "))?;
        return Ok(Outcome::Optimal);
    }
    let k = args.k.expect("clap enforces --k or --bottom-h");
    let solution = bnb::solve_ksum(&instance, k, &options)?;
    print_solution(out, &solution)?;
    if let Some(path) = &args.csv {
        gen_io::write_results_csv(&[solution.to_record(&instance_id(&args.input), &instance)], path).map_err(at(path))?;
    }
    if let Some(kind) = args.export {
        let kind = FormulationKind::from(kind);
        let model = milp_export::build(&instance, k, kind, args.size)?;
        let path = args.lp_out.clone().unwrap_or_else(|| {
            let mut p = args.input.clone().into_os_string();
            p.push(format!(".{kind}.k{k}.lp"));
            PathBuf::from(p)
        });
        milp_export::write_lp(&model, &path).map_err(at(&path))?;
        writeln!(out, "model: {}", path.display())?;
    }
    Ok(Outcome::of(solution.stats.optimal))
}

/// Re-checks the bound chain between consecutive optimal sweep results.
pub fn check_chain(instance: &Instance, sols: &[Solution]) -> Result<(), CliError> {
    for pair in sols.windows(2) {
        let (next, cur) = (&pair[0], &pair[1]);
        if !(next.stats.optimal && cur.stats.optimal) {
            continue;
        }
        let OwaWeights::TopK(k) = cur.weights else {
            continue;
        };
        let lower = bounds::chain_lower(next.value, k);
        let (upper, _) = bounds::chain_upper(instance, &next.committee, k)?;
        let z = cur.value;
        let ok = lower <= z
            && z <= upper
            && z <= next.value
            && z * (k as u64 + 1) >= next.value * k as u64;
        if !ok {
            return Err(CliError::Invariant(format!(
                "k = {k}: z(k) = {z}, z(k+1) = {}, chain bounds [{lower}, {upper}]",
                next.value
            )));
        }
    }
    Ok(())
}

pub fn sweep_records(instance: &Instance, id: &str, options: &SolveOptions) -> Result<(Vec<ResultRecord>, bool), CliError> {
    let sols = bnb::solve_all_k(instance, options)?;
    check_chain(instance, &sols)?;
    let optimal = sols.iter().all(|s| s.stats.optimal);
    Ok((sols.iter().map(|s| s.to_record(id, instance)).collect(), optimal))
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let options = args.search.options()?;
    let instance = gen_io::read_instance(&args.input).map_err(at(&args.input))?;
    let (rows, optimal) = sweep_records(&instance, &instance_id(&args.input), &options)?;
    match &args.out {
        Some(path) => gen_io::write_results_csv(&rows, path).map_err(at(path))?,
        None => gen_io::write_results(&rows, &mut *out)?,
    }
    Ok(Outcome::of(optimal))
}

/// Aggregates over one plan entry, shaped like the summary tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub m: usize,
    pub mode: String,
    pub solves: usize,
    pub avg_time_s: f64,
    pub max_time_s: f64,
    pub avg_nodes: f64,
    pub max_nodes: u64,
    pub avg_root_gap_pct: f64,
    pub max_root_gap_pct: f64,
    pub pct_solved_root: f64,
    pub pct_fixed: f64,
    pub pct_optimal: f64,
}

const SUMMARY_COLUMNS: &str = "n,m,mode,solves,avg_time_s,max_time_s,avg_nodes,max_nodes,avg_root_gap_pct,max_root_gap_pct,pct_solved_root,pct_fixed,pct_optimal";

pub fn summarize(n: usize, m: usize, mode: GenMode, rows: &[ResultRecord]) -> SummaryRow {
    let count = rows.len().max(1) as f64;
    let mean = |f: &dyn Fn(&ResultRecord) -> f64| rows.iter().map(f).sum::<f64>() / count;
    let pct = |f: &dyn Fn(&ResultRecord) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / count * 100.0;
    SummaryRow {
        n,
        m,
        mode: mode.to_string(),
        solves: rows.len(),
        avg_time_s: mean(&|r| r.time_s),
        max_time_s: rows.iter().map(|r| r.time_s).fold(0.0, f64::max),
        avg_nodes: mean(&|r| r.nodes as f64),
        max_nodes: rows.iter().map(|r| r.nodes).max().unwrap_or(0),
        avg_root_gap_pct: mean(&|r| r.root_gap_pct),
        max_root_gap_pct: rows.iter().map(|r| r.root_gap_pct).fold(0.0, f64::max),
        pct_solved_root: pct(&|r| r.solved_at_root),
        pct_fixed: mean(&|r| r.pct_fixed),
        pct_optimal: pct(&|r| r.optimal),
    }
}

fn write_summary(rows: &[SummaryRow], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{SUMMARY_COLUMNS}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.m,
            r.mode,
            r.solves,
            r.avg_time_s,
            r.max_time_s,
            r.avg_nodes,
            r.max_nodes,
            r.avg_root_gap_pct,
            r.max_root_gap_pct,
            r.pct_solved_root,
            r.pct_fixed,
            r.pct_optimal
        )?;
    }
    Ok(())
}

/// Thread count for bench runs: `KVOTE_THREADS` when set, else all cores.
pub fn bench_threads() -> Result<usize, CliError> {
    match std::env::var("KVOTE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(CliError::Usage(format!("KVOTE_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(0),
    }
}

/// Runs every (entry, seed) pair; rows come back in plan order.
pub fn run_plan(plan: &BenchPlan, threads: usize) -> Result<(Vec<SummaryRow>, Vec<ResultRecord>, bool), CliError> {
    let options = SolveOptions {
        time_limit: plan.time_limit,
        ..SolveOptions::default()
    };
    let jobs: Vec<(usize, u64)> = plan
        .entries
        .iter()
        .enumerate()
        .flat_map(|(e, entry)| entry.seeds.clone().map(move |s| (e, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let results: Vec<Result<Vec<ResultRecord>, CliError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(e, seed)| {
                let entry = &plan.entries[e];
                let config = GenConfig {
                    n: entry.n,
                    m: entry.m,
                    mode: entry.mode,
                    seed,
                };
                let instance = gen_io::generate(&config)?;
                let (k_min, k_max) = entry.k.bounds(entry.n);
                let sols = bnb::solve_down_to(&instance, k_min, &options)?;
                check_chain(&instance, &sols)?;
                let id = format!("n{}_m{}_{}_s{}", entry.n, entry.m, entry.mode, seed);
                Ok(sols
                    .iter()
                    .filter(|s| matches!(s.weights, OwaWeights::TopK(k) if k <= k_max))
                    .map(|s| s.to_record(&id, &instance))
                    .collect())
            })
            .collect()
    });

    let mut all = Vec::new();
    let mut per_entry: Vec<Vec<ResultRecord>> = vec![Vec::new(); plan.entries.len()];
    for (&(e, _), rows) in jobs.iter().zip(results) {
        let rows = rows?;
        per_entry[e].extend(rows.iter().cloned());
        all.extend(rows);
    }
    let summary = plan
        .entries
        .iter()
        .zip(&per_entry)
        .map(|(entry, rows)| summarize(entry.n, entry.m, entry.mode, rows))
        .collect();
    let optimal = all.iter().all(|r| r.optimal);
    Ok((summary, all, optimal))
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(&args.plan).map_err(io_at(&args.plan))?;
    let plan = plan::parse_plan(&text)?;
    let (summary, rows, optimal) = run_plan(&plan, bench_threads()?)?;
    if let Some(path) = args.rows.as_ref().or(plan.rows.as_ref()) {
        gen_io::write_results_csv(&rows, path).map_err(at(path))?;
    }
    match args.out.as_ref().or(plan.summary.as_ref()) {
        Some(path) => {
            let mut f = io::BufWriter::new(fs::File::create(path).map_err(io_at(path))?);
            write_summary(&summary, &mut f)
                .and_then(|_| f.flush())
                .map_err(io_at(path))?;
        }
        None => write_summary(&summary, out)?,
    }
    Ok(Outcome::of(optimal))
}
