use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shuffle_core::instance::ProblemInstance;
use shuffle_core::solvers::SolverKind;
use shuffle_core::sweep::{
    self, mean_dof, parse_solvers, run_single, write_csv, write_traces, PlacementRule, RunOptions, ScenarioConfig,
    SweepRecord,
};
use shuffle_core::Error;

#[derive(Parser, Debug)]
#[command(name = "shuffle-align", version, about = "Low-rank transceiver design sweeps for data shuffling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the per-user storage µ (K=5, N=10 by default).
    Storage(Common),
    /// Sweep the antenna count L = M (K=8, N=4, µ=1 by default).
    Antennas(Common),
    /// Sweep the number of users K (N=5, µ=2, uniform placement by default).
    Users(Common),
    /// Solve one instance, read from a file or generated from parameters.
    Single(Single),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Trials per sweep value.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed of the trial seed derivation.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of dc,irls,nuclear.
    #[arg(long)]
    solvers: Option<String>,
    /// Comma-separated sweep values overriding the scenario default.
    #[arg(long)]
    values: Option<String>,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Factorize and check the best solution (single runs only).
    #[arg(long)]
    verify: bool,
    /// Directory for per-iteration solver traces.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `key=value` configuration file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fill the wall_ms column (the CSV is then no longer reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct Single {
    #[command(flatten)]
    common: Common,
    /// Instance file; overrides the inline parameters.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Number of users.
    #[arg(long = "users", short = 'K')]
    users: Option<usize>,
    /// Number of files.
    #[arg(long = "files", short = 'N')]
    files: Option<usize>,
    /// Files stored per user.
    #[arg(long)]
    mu: Option<usize>,
    /// Antennas per user.
    #[arg(long, short = 'L')]
    antennas: Option<usize>,
    /// Antennas at the access point.
    #[arg(long, short = 'M')]
    ap_antennas: Option<usize>,
    /// Data streams per message.
    #[arg(long, short = 'd')]
    streams: Option<usize>,
    /// uniform or random.
    #[arg(long)]
    placement: Option<String>,
    /// Also write the solved instance to this file.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::SingularSystem { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Storage(c) => sweep_command("storage", c),
        Command::Antennas(c) => sweep_command("antennas", c),
        Command::Users(c) => sweep_command("users", c),
        Command::Single(s) => single_command(s),
    }
}

fn configure(scenario: &str, c: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::by_name(scenario)?;
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)?;
        cfg = cfg.apply_config_text(&text)?;
    }
    if let Some(r) = c.reps {
        cfg.reps = r;
    }
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(list) = &c.solvers {
        cfg.solvers = parse_solvers(list)?;
    }
    if let Some(v) = &c.values {
        cfg = cfg.set("values", v)?;
    }
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn sweep_command(scenario: &str, c: Common) -> Result<(), Error> {
    if c.verify {
        return Err(Error::Config("--verify applies to single runs only".into()));
    }
    let cfg = configure(scenario, &c)?;
    let opts = RunOptions {
        workers: c.workers,
        trace_dir: c.trace.clone(),
    };
    let records = match cfg.sweep {
        sweep::SweepVariable::None => {
            return Err(Error::Config(format!("scenario `{}` has no sweep variable", cfg.name)))
        }
        _ => sweep::run_sweep(&cfg, &opts)?,
    };
    write_csv(&records, output(&c.out)?, c.timing)?;
    print_summary(&cfg, &records);
    Ok(())
}

fn print_summary(cfg: &ScenarioConfig, records: &[SweepRecord]) {
    eprintln!("mean DoF over {} trials ({} sweep)", cfg.reps, cfg.sweep);
    for (value, solver, dof) in mean_dof(records) {
        let v = value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        eprintln!("  {}={v:<3} {solver:<8} {dof:.4}", cfg.sweep);
    }
}

fn single_command(s: Single) -> Result<(), Error> {
    let c = &s.common;
    let mut cfg = configure("single", c)?;
    let inst = match &s.instance {
        Some(path) => ProblemInstance::from_text(&std::fs::read_to_string(path)?)?,
        None => {
            for (key, value) in [
                ("K", s.users),
                ("N", s.files),
                ("mu", s.mu),
                ("L", s.antennas),
                ("M", s.ap_antennas),
                ("d", s.streams),
            ] {
                if let Some(v) = value {
                    cfg = cfg.set(key, &v.to_string())?;
                }
            }
            if let Some(p) = &s.placement {
                cfg.placement = p.parse::<PlacementRule>()?;
            }
            cfg.validate()?;
            sweep::generate_instance(&cfg, cfg.base_seed)?
        }
    };
    if let Some(path) = &s.save_instance {
        std::fs::write(path, inst.to_text())?;
    }
    let seed = inst.seed;
    let outcome = run_single(&inst, &cfg.solvers, seed, c.verify, c.trace.is_some(), &cfg.name)?;
    for r in &outcome.results {
        println!(
            "{}: rank={} dof={} feasibility={:.3e} iterations={} status={}",
            r.solver, r.numeric_rank, r.dof, r.feasibility_residual, r.iterations, r.status
        );
    }
    if let Some(v) = &outcome.verification {
        println!(
            "verify ({} rank {}): {} desired={:.3e} interference={:.3e}",
            v.solver,
            v.rank,
            if v.ia.passed() { "pass" } else { "fail" },
            v.ia.worst_desired(),
            v.ia.worst_interference()
        );
        if let Some(d) = &v.decode {
            println!("decode: max relative error {:.3e}", d.max_relative_error);
        }
        if let Some(dir) = &c.trace {
            std::fs::create_dir_all(dir)?;
            v.ia.write_csv(BufWriter::new(File::create(dir.join("ia_report.csv"))?))?;
        }
    } else if c.verify {
        println!("verify: no feasible solution to check");
    }
    if let Some(dir) = &c.trace {
        write_traces(dir, "", &outcome.results)?;
    }
    if let Some(path) = &c.out {
        write_csv(&outcome.records, output(&Some(path.clone()))?, c.timing)?;
    }
    if outcome
        .results
        .iter()
        .any(|r| r.solver == SolverKind::Dc && r.feasibility_residual > 1e-6)
    {
        return Err(Error::Numerical {
            iteration: 0,
            message: "DC solution is not feasible".into(),
        });
    }
    Ok(())
}
