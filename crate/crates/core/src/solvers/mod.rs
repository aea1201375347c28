//! Rank-minimization solvers over an [`AffineSystem`](crate::system::AffineSystem).

mod dc;
mod irls;
mod kyfan;
mod nuclear;

use std::fmt;
use std::io::Write;

pub use dc::{dc_solve, dc_solve_from, min_rank_dc, DcConfig, Init};
pub use irls::{irls_solve, IrlsConfig};
pub use kyfan::{kyfan_2k_norm_sq, kyfan_2k_subgrad};
pub use nuclear::{nuclear_solve, svt, NuclearConfig};

use crate::linalg::ComplexMatrix;

/// Absolute singular-value threshold used for numeric rank.
pub const RANK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Dc,
    Irls,
    Nuclear,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Dc, SolverKind::Irls, SolverKind::Nuclear];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dc => "dc",
            SolverKind::Irls => "irls",
            SolverKind::Nuclear => "nuclear",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim() {
            "dc" => Ok(SolverKind::Dc),
            "irls" => Ok(SolverKind::Irls),
            "nuclear" => Ok(SolverKind::Nuclear),
            other => Err(crate::Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIter,
    Stalled,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max-iter",
            Status::Stalled => "stalled",
        })
    }
}

/// Symmetric degrees of freedom `d / r` as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dof {
    Ratio { num: u64, den: u64 },
    /// `r = 0`: nothing is delivered.
    NotApplicable,
}

impl Dof {
    pub fn value(self) -> Option<f64> {
        match self {
            Dof::Ratio { num, den } => Some(num as f64 / den as f64),
            Dof::NotApplicable => None,
        }
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dof::Ratio { num, den: 1 } => write!(f, "{num}"),
            Dof::Ratio { num, den } => write!(f, "{num}/{den}"),
            Dof::NotApplicable => f.write_str("n/a"),
        }
    }
}

/// `DoF_sym = d / r`.
pub fn dof(d: usize, r: usize) -> Dof {
    if r == 0 {
        return Dof::NotApplicable;
    }
    let (mut a, mut b) = (d as u64, r as u64);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    Dof::Ratio {
        num: d as u64 / a,
        den: r as u64 / a,
    }
}

/// Count of singular values strictly above `tol`.
pub fn numeric_rank(singular_values: &[f64], tol: f64) -> usize {
    singular_values.iter().filter(|&&s| s > tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub step_norm: f64,
    /// `σ_{k+1}` for DC; NaN for solvers without a target rank.
    pub sigma_kplus1: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub solver: SolverKind,
    pub x: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub numeric_rank: usize,
    pub dof: Dof,
    pub feasibility_residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    pub status: Status,
    /// Rank parameter of the last DC subproblem.
    pub target_rank: Option<usize>,
    /// Iterations at which the DC descent inequality failed; always zero in exact arithmetic.
    pub descent_violations: usize,
}

impl SolverResult {
    /// Writes the trace as CSV: `iter,objective,step_norm,sigma_kplus1,residual`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "objective", "step_norm", "sigma_kplus1", "residual"])
            .map_err(csv_err)?;
        for t in &self.trace {
            w.write_record([
                t.iter.to_string(),
                format!("{:e}", t.objective),
                format!("{:e}", t.step_norm),
                format!("{:e}", t.sigma_kplus1),
                format!("{:e}", t.residual),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub(crate) fn streams(sys: &crate::system::AffineSystem) -> usize {
    sys.layout().map_or(1, |l| l.d)
}
