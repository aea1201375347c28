//! Experiment harness: parameter sweeps over independent random trials.
//!
//! Every trial derives its seed from `(base_seed, scenario, sweep value, trial)` alone,
//! so any record can be replayed in isolation and results do not depend on the number
//! of workers or on scheduling order.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{random_placement, uniform_placement, ChannelMode, Placement, ProblemInstance};
use crate::solvers::{
    irls_solve, min_rank_dc, nuclear_solve, DcConfig, Dof, Init, IrlsConfig, NuclearConfig, SolverKind, SolverResult,
    Status,
};
use crate::system::{nnz_formula, AffineSystem};
use crate::transceiver::{factorize, simulate_shuffle, verify_ia, DecodeReport, IaReport};

/// Default IRLS exponent.
pub const IRLS_P: f64 = 0.5;
/// Default pass level of the alignment check.
pub const VERIFY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementRule {
    Uniform,
    Random,
}

impl FromStr for PlacementRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(PlacementRule::Uniform),
            "random" => Ok(PlacementRule::Random),
            other => Err(Error::Config(format!("unknown placement rule `{other}`"))),
        }
    }
}

impl fmt::Display for PlacementRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlacementRule::Uniform => "uniform",
            PlacementRule::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Mu,
    /// Antennas per user; the access point follows with `M = L`.
    L,
    K,
    None,
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mu" => Ok(SweepVariable::Mu),
            "L" | "l" => Ok(SweepVariable::L),
            "K" | "k" => Ok(SweepVariable::K),
            "none" => Ok(SweepVariable::None),
            other => Err(Error::Config(format!("unknown sweep variable `{other}`"))),
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Mu => "mu",
            SweepVariable::L => "L",
            SweepVariable::K => "K",
            SweepVariable::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub users: usize,
    pub files: usize,
    pub mu: usize,
    pub l: usize,
    pub m: usize,
    pub d: usize,
    pub placement: PlacementRule,
    pub channel_mode: ChannelMode,
    pub solvers: Vec<SolverKind>,
    pub reps: usize,
    pub base_seed: u64,
    pub sweep: SweepVariable,
    pub values: Vec<usize>,
}

impl ScenarioConfig {
    /// `K = 5`, `N = 10`, single antennas, `µ ∈ {5, ..., 9}`, random placement.
    pub fn storage() -> Self {
        ScenarioConfig {
            name: "storage".into(),
            users: 5,
            files: 10,
            mu: 5,
            l: 1,
            m: 1,
            d: 1,
            placement: PlacementRule::Random,
            channel_mode: ChannelMode::Direct,
            solvers: SolverKind::ALL.to_vec(),
            reps: 100,
            base_seed: 0,
            sweep: SweepVariable::Mu,
            values: (5..=9).collect(),
        }
    }

    /// `K = 8`, `N = 4`, `µ = 1`, `L = M ∈ {1, ..., 4}`, random placement.
    pub fn antennas() -> Self {
        ScenarioConfig {
            name: "antennas".into(),
            users: 8,
            files: 4,
            mu: 1,
            sweep: SweepVariable::L,
            values: (1..=4).collect(),
            ..Self::storage()
        }
    }

    /// `N = 5`, `µ = 2`, `K ∈ {5, 10, 15, 20}`, uniform placement.
    pub fn users() -> Self {
        ScenarioConfig {
            name: "users".into(),
            users: 5,
            files: 5,
            mu: 2,
            placement: PlacementRule::Uniform,
            sweep: SweepVariable::K,
            values: vec![5, 10, 15, 20],
            ..Self::storage()
        }
    }

    /// One unswept configuration: the two-user network with one file each.
    pub fn single() -> Self {
        ScenarioConfig {
            name: "single".into(),
            users: 2,
            files: 2,
            mu: 1,
            placement: PlacementRule::Random,
            sweep: SweepVariable::None,
            values: Vec::new(),
            reps: 1,
            ..Self::storage()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "storage" => Ok(Self::storage()),
            "antennas" => Ok(Self::antennas()),
            "users" => Ok(Self::users()),
            "single" => Ok(Self::single()),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }

    /// Applies `key=value` lines over `self`. Blank lines and lines starting with `#`
    /// are ignored; `scenario=` must come first when present, since it resets the defaults.
    pub fn apply_config_text(mut self, text: &str) -> Result<Self> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                message: format!("expected key=value, found `{line}`"),
            })?;
            self = self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Parse { line: no + 1, message: msg },
                other => other,
            })?;
        }
        Ok(self)
    }

    /// Sets one field from its textual form.
    pub fn set(mut self, key: &str, value: &str) -> Result<Self> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("`{key}` expects an integer, found `{value}`")))
        }
        match key {
            "scenario" => self = Self::by_name(value)?,
            "name" => self.name = value.to_string(),
            "K" | "users" => self.users = num(key, value)?,
            "N" | "files" => self.files = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "L" => self.l = num(key, value)?,
            "M" => self.m = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "placement" => self.placement = value.parse()?,
            "channels" => {
                self.channel_mode = value
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown channel mode `{value}`")))?
            }
            "solvers" => self.solvers = parse_solvers(value)?,
            "reps" => self.reps = num(key, value)?,
            "seed" | "base_seed" => self.base_seed = num(key, value)?,
            "sweep" => self.sweep = value.parse()?,
            "values" => {
                self.values = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(self)
    }

    /// Checks counts and that every swept point admits the placement rule.
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solver selected".into()));
        }
        if self.sweep != SweepVariable::None && self.values.is_empty() {
            return Err(Error::Config(format!("sweep over {} has no values", self.sweep)));
        }
        for point in self.points() {
            if point.users < 2 || point.files == 0 || point.l == 0 || point.m == 0 || point.d == 0 || point.mu == 0 {
                return Err(Error::Config(format!(
                    "invalid parameters K={} N={} mu={} L={} M={} d={}",
                    point.users, point.files, point.mu, point.l, point.m, point.d
                )));
            }
            if point.mu > point.files {
                return Err(Error::Config(format!("mu={} exceeds N={}", point.mu, point.files)));
            }
            match self.placement {
                PlacementRule::Uniform if (point.mu * point.users) % point.files != 0 => {
                    return Err(Error::InfeasibleUniformPlacement {
                        users: point.users,
                        files: point.files,
                        mu: point.mu,
                    })
                }
                PlacementRule::Random if point.mu * point.users < point.files => {
                    return Err(Error::InfeasiblePlacement {
                        users: point.users,
                        files: point.files,
                        mu: point.mu,
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// The concrete parameter sets of the sweep, paired with the swept value.
    fn points(&self) -> Vec<Point> {
        let base = Point {
            value: None,
            users: self.users,
            files: self.files,
            mu: self.mu,
            l: self.l,
            m: self.m,
            d: self.d,
        };
        if self.sweep == SweepVariable::None {
            return vec![base];
        }
        self.values
            .iter()
            .map(|&v| {
                let mut p = Point { value: Some(v), ..base };
                match self.sweep {
                    SweepVariable::Mu => p.mu = v,
                    SweepVariable::L => {
                        p.l = v;
                        p.m = v;
                    }
                    SweepVariable::K => p.users = v,
                    SweepVariable::None => unreachable!(),
                }
                p
            })
            .collect()
    }
}

/// Comma-separated solver names.
pub fn parse_solvers(list: &str) -> Result<Vec<SolverKind>> {
    let mut out: Vec<SolverKind> = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let kind: SolverKind = name.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no solver selected".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    value: Option<usize>,
    users: usize,
    files: usize,
    mu: usize,
    l: usize,
    m: usize,
    d: usize,
}

/// One solver run on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub scenario: String,
    /// `None` for unswept runs.
    pub sweep_value: Option<usize>,
    pub trial: usize,
    pub solver: SolverKind,
    pub rank: usize,
    pub dof: Dof,
    pub iterations: usize,
    pub wall_ms: f64,
    pub seed: u64,
    pub feasibility_residual: f64,
    pub status: Status,
    /// Sufficient-decrease violations seen by the DC solver (zero for the others).
    pub descent_violations: usize,
    /// Assembled nonzero count and the count predicted from the index sets.
    pub nnz: (usize, usize),
}

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "sweep_value",
    "trial",
    "solver",
    "rank",
    "dof",
    "dof_decimal",
    "iterations",
    "wall_ms",
    "seed",
    "feasibility_residual",
    "status",
];

/// Writes records as CSV in the order given. With `timing = false` the `wall_ms`
/// column is left empty so that reruns are byte-identical.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.scenario.clone(),
            r.sweep_value.map(|v| v.to_string()).unwrap_or_default(),
            r.trial.to_string(),
            r.solver.to_string(),
            r.rank.to_string(),
            r.dof.to_string(),
            r.dof.value().map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.iterations.to_string(),
            if timing { format!("{:.3}", r.wall_ms) } else { String::new() },
            r.seed.to_string(),
            format!("{:.6e}", r.feasibility_residual),
            r.status.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Stable 64-bit mix of the trial coordinates.
pub fn trial_seed(base_seed: u64, scenario: &str, value: Option<usize>, trial: usize) -> u64 {
    // FNV-1a for the name, then splitmix64 rounds for the integers.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in scenario.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut state = base_seed ^ h;
    for word in [value.map_or(u64::MAX, |v| v as u64), trial as u64] {
        state = splitmix64(state ^ splitmix64(word));
    }
    state
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one solver with the harness defaults; `seed` picks the DC and IRLS start.
pub fn run_solver(sys: &AffineSystem, kind: SolverKind, seed: u64, trace: bool) -> Result<SolverResult> {
    match kind {
        SolverKind::Dc => min_rank_dc(
            sys,
            &DcConfig {
                init: Init::Random(seed),
                record_trace: trace,
                ..DcConfig::default()
            },
        ),
        SolverKind::Irls => irls_solve(
            sys,
            IRLS_P,
            &IrlsConfig {
                init: Init::Random(seed),
                record_trace: trace,
                ..IrlsConfig::default()
            },
        ),
        SolverKind::Nuclear => nuclear_solve(
            sys,
            &NuclearConfig {
                record_trace: trace,
                ..NuclearConfig::default()
            },
        ),
    }
}

fn build_instance(point: &Point, rule: PlacementRule, mode: ChannelMode, seed: u64) -> Result<ProblemInstance> {
    let placement: Placement = match rule {
        PlacementRule::Uniform => uniform_placement(point.users, point.files, point.mu, seed)?,
        PlacementRule::Random => random_placement(point.users, point.files, point.mu, seed)?,
    };
    ProblemInstance::generate(
        point.users,
        point.files,
        point.mu,
        point.l,
        point.m,
        point.d,
        placement,
        mode,
        splitmix64(seed),
    )
}

/// Execution settings that do not change any record.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon choose.
    pub workers: usize,
    /// When set, every solver trace is written to
    /// `<dir>/<scenario>_<value>_<trial>_<solver>.csv`.
    pub trace_dir: Option<PathBuf>,
}

/// The instance of the first sweep point of `cfg` (the only point when unswept),
/// drawn from `seed` exactly as a sweep trial would be.
pub fn generate_instance(cfg: &ScenarioConfig, seed: u64) -> Result<ProblemInstance> {
    cfg.validate()?;
    let point = cfg.points()[0];
    build_instance(&point, cfg.placement, cfg.channel_mode, seed)
}

fn run_trial(cfg: &ScenarioConfig, point: &Point, trial: usize, opts: &RunOptions) -> Result<Vec<SweepRecord>> {
    let seed = trial_seed(cfg.base_seed, &cfg.name, point.value, trial);
    let inst = build_instance(point, cfg.placement, cfg.channel_mode, seed)?;
    let idx = inst.index_sets();
    let sys = AffineSystem::assemble(&inst, &idx)?;
    let nnz = (sys.nnz(), nnz_formula(&inst, &idx));
    cfg.solvers
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let res = run_solver(&sys, kind, seed, opts.trace_dir.is_some())?;
            let rec = record(cfg, point.value, trial, seed, &res, start, nnz);
            if let Some(dir) = &opts.trace_dir {
                let value = point.value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                write_traces(dir, &format!("{}_{value}_{trial}_", cfg.name), std::slice::from_ref(&res))?;
            }
            Ok(rec)
        })
        .collect()
}

fn record(
    cfg: &ScenarioConfig,
    value: Option<usize>,
    trial: usize,
    seed: u64,
    res: &SolverResult,
    start: Instant,
    nnz: (usize, usize),
) -> SweepRecord {
    SweepRecord {
        scenario: cfg.name.clone(),
        sweep_value: value,
        trial,
        solver: res.solver,
        rank: res.numeric_rank,
        dof: res.dof,
        iterations: res.iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        seed,
        feasibility_residual: res.feasibility_residual,
        status: res.status,
        descent_violations: res.descent_violations,
        nnz,
    }
}

/// Runs every `(value, trial)` of `cfg` on a worker pool and returns the records
/// sorted by value, trial and solver order.
pub fn run_sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let jobs: Vec<(Point, usize)> = cfg
        .points()
        .into_iter()
        .flat_map(|p| (0..cfg.reps).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_job: Vec<Result<Vec<SweepRecord>>> =
        pool.install(|| jobs.par_iter().map(|(p, t)| run_trial(cfg, p, *t, opts)).collect());
    let mut records = Vec::with_capacity(jobs.len() * cfg.solvers.len());
    for r in per_job {
        records.extend(r?);
    }
    Ok(records)
}

fn sweeping(cfg: &ScenarioConfig, sweep: SweepVariable) -> Result<&ScenarioConfig> {
    if cfg.sweep != sweep {
        return Err(Error::Config(format!("scenario `{}` does not sweep {sweep}", cfg.name)));
    }
    Ok(cfg)
}

/// Storage sweep over `µ`.
pub fn run_storage_sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<SweepRecord>> {
    run_sweep(sweeping(cfg, SweepVariable::Mu)?, opts)
}

/// Antenna sweep over `L = M`.
pub fn run_antenna_sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<SweepRecord>> {
    run_sweep(sweeping(cfg, SweepVariable::L)?, opts)
}

/// User sweep over `K`.
pub fn run_user_sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<SweepRecord>> {
    run_sweep(sweeping(cfg, SweepVariable::K)?, opts)
}

/// Arithmetic mean of `d / r` per `(sweep value, solver)`, in first-seen order.
pub fn mean_dof(records: &[SweepRecord]) -> Vec<(Option<usize>, SolverKind, f64)> {
    let mut acc: Vec<(Option<usize>, SolverKind, f64, usize)> = Vec::new();
    for r in records {
        let v = r.dof.value().unwrap_or(0.0);
        match acc.iter_mut().find(|a| a.0 == r.sweep_value && a.1 == r.solver) {
            Some(a) => {
                a.2 += v;
                a.3 += 1;
            }
            None => acc.push((r.sweep_value, r.solver, v, 1)),
        }
    }
    acc.into_iter().map(|(v, s, sum, n)| (v, s, sum / n as f64)).collect()
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone)]
pub struct SingleOutcome {
    pub records: Vec<SweepRecord>,
    pub results: Vec<SolverResult>,
    /// Alignment report and decode check of the lowest-rank feasible solution.
    pub verification: Option<Verification>,
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub solver: SolverKind,
    pub rank: usize,
    pub ia: IaReport,
    /// `None` when the alignment check failed and decoding was skipped.
    pub decode: Option<DecodeReport>,
}

/// Runs the selected solvers on one instance. With `verify`, the lowest-rank solution
/// with feasibility residual at most `1e-6` is factorized, checked with [`verify_ia`]
/// at [`VERIFY_TOL`], and decoded once.
pub fn run_single(
    inst: &ProblemInstance,
    solvers: &[SolverKind],
    seed: u64,
    verify: bool,
    trace: bool,
    name: &str,
) -> Result<SingleOutcome> {
    if solvers.is_empty() {
        return Err(Error::Config("no solver selected".into()));
    }
    let idx = inst.index_sets();
    let sys = AffineSystem::assemble(inst, &idx)?;
    let nnz = (sys.nnz(), nnz_formula(inst, &idx));
    let cfg = ScenarioConfig {
        name: name.to_string(),
        ..ScenarioConfig::single()
    };
    let mut records = Vec::new();
    let mut results = Vec::new();
    for &kind in solvers {
        let start = Instant::now();
        let res = run_solver(&sys, kind, seed, trace)?;
        records.push(record(&cfg, None, 0, seed, &res, start, nnz));
        results.push(res);
    }
    let verification = if verify {
        let best = results
            .iter()
            .filter(|r| r.numeric_rank > 0 && r.feasibility_residual <= 1e-6)
            .min_by_key(|r| r.numeric_rank);
        match (best, sys.layout()) {
            (Some(best), Some(layout)) => {
                let ts = factorize(&best.x, best.numeric_rank, layout)?;
                let ia = verify_ia(&ts, inst, &idx, VERIFY_TOL)?;
                let decode = if ia.passed() {
                    Some(simulate_shuffle(&ts, inst, &idx, VERIFY_TOL, seed)?)
                } else {
                    None
                };
                Some(Verification {
                    solver: best.solver,
                    rank: best.numeric_rank,
                    ia,
                    decode,
                })
            }
            _ => None,
        }
    } else {
        None
    };
    Ok(SingleOutcome {
        records,
        results,
        verification,
    })
}

/// Writes each result's trace as `<dir>/<prefix><solver>.csv`.
pub fn write_traces(dir: &Path, prefix: &str, results: &[SolverResult]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in results {
        let file = std::fs::File::create(dir.join(format!("{prefix}{}.csv", r.solver)))?;
        r.write_trace_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}
