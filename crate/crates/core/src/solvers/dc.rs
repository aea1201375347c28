use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dof, numeric_rank, streams, SolverKind, SolverResult, Status, TraceRecord};
use crate::error::{Error, Result};
use crate::linalg::{diff_frobenius, gaussian_matrix, positive, singular_values, ComplexMatrix, Spectral};
use crate::system::AffineSystem;

/// Starting point of every rank-`k` subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `A^+(b)`.
    LeastNorm,
    /// Projection of a seeded CN(0, 1) matrix onto the feasible set.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcConfig {
    pub rank_tol: f64,
    pub max_iter_per_k: usize,
    pub stall_window: usize,
    pub init: Init,
    /// Stop as stalled when `φ` improves by less than `stall_eps · φ` over the window.
    pub stall_eps: f64,
    /// Also stop as stalled when the geometric trend of `φ` over the last window
    /// cannot reach `rank_tol²` within the remaining iteration budget.
    pub budget_stall: bool,
    /// Start rank `r + 1` from the point rank `r` ended at instead of a fresh `init`.
    pub warm_start: bool,
    pub record_trace: bool,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            rank_tol: super::RANK_TOL,
            max_iter_per_k: 5000,
            stall_window: 50,
            stall_eps: 1e-10,
            init: Init::Random(0),
            budget_stall: true,
            warm_start: true,
            record_trace: false,
        }
    }
}

impl DcConfig {
    fn validate(&self) -> Result<()> {
        if !positive(self.rank_tol) || self.max_iter_per_k == 0 || self.stall_window == 0 || !positive(self.stall_eps) {
            return Err(Error::InvalidInput("DC configuration values must be positive".into()));
        }
        Ok(())
    }
}

pub(super) fn initial_point(sys: &AffineSystem, init: Init, k: usize) -> Result<ComplexMatrix> {
    match init {
        Init::LeastNorm => sys.least_norm_solution(),
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let g = gaussian_matrix(sys.rows(), sys.cols(), &mut rng);
            sys.project_affine(&g)
        }
    }
}

/// Solves the rank-`k` DC subproblem from `cfg.init`.
pub fn dc_solve(sys: &AffineSystem, k: usize, cfg: &DcConfig) -> Result<SolverResult> {
    cfg.validate()?;
    check_k(sys, k)?;
    let x0 = initial_point(sys, cfg.init, k)?;
    run(sys, k, x0, cfg)
}

/// Solves the rank-`k` DC subproblem from the projection of `x0`.
pub fn dc_solve_from(sys: &AffineSystem, k: usize, x0: &ComplexMatrix, cfg: &DcConfig) -> Result<SolverResult> {
    cfg.validate()?;
    check_k(sys, k)?;
    let x0 = sys.project_affine(x0)?;
    run(sys, k, x0, cfg)
}

fn check_k(sys: &AffineSystem, k: usize) -> Result<()> {
    let p = sys.rows().min(sys.cols());
    if k == 0 || k > p {
        return Err(Error::InvalidInput(format!("rank parameter k={k} outside 1..={p}")));
    }
    Ok(())
}

/// Minimizes `φ(X) = ‖X‖_F² - |||X|||²_{k,2}` over the feasible set by
/// `X ← Π(U_k Σ_k V_k^H)`, where `Π` is the affine projection.
///
/// Every iteration checks the sufficient-decrease inequality
/// `φ(X⁺) ≤ φ(X) - ‖X⁺ - X‖_F²`, which holds exactly for feasible iterates.
fn run(sys: &AffineSystem, k: usize, mut x: ComplexMatrix, cfg: &DcConfig) -> Result<SolverResult> {
    let mut trace = Vec::new();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.stall_window + 1);
    let mut last_step: Option<(f64, f64)> = None;
    let mut violations = 0;
    let mut iterations = 0;
    let status;
    let mut spectrum;
    loop {
        spectrum = Spectral::new(&x);
        let phi = spectrum.tail_energy(k);
        if !phi.is_finite() {
            return Err(Error::Numerical {
                iteration: iterations,
                message: "non-finite DC objective".into(),
            });
        }
        if let Some((prev_phi, step_sq)) = last_step {
            if phi > prev_phi - step_sq + 1e-9 * (1.0 + prev_phi.abs()) {
                violations += 1;
            }
        }
        let sigma_next = spectrum.sigma_after(k);
        if sigma_next < cfg.rank_tol {
            status = Status::Converged;
            break;
        }
        window.push_back(phi);
        if window.len() > cfg.stall_window {
            let old_phi = window.pop_front().expect("window is non-empty");
            if old_phi - phi < cfg.stall_eps * old_phi
                || (cfg.budget_stall && !reachable(old_phi, phi, cfg, iterations))
            {
                status = Status::Stalled;
                break;
            }
        }
        if iterations == cfg.max_iter_per_k {
            status = Status::MaxIter;
            break;
        }
        let mut next = spectrum.truncate(&x, k);
        sys.project_in_place(&mut next)?;
        let step = diff_frobenius(&next, &x);
        if cfg.record_trace {
            trace.push(TraceRecord {
                iter: iterations,
                objective: phi,
                step_norm: step,
                sigma_kplus1: sigma_next,
                residual: sys.residual_raw(&x),
            });
        }
        last_step = Some((phi, step * step));
        x = next;
        iterations += 1;
    }
    let singular_values = singular_values(&x);
    let rank = numeric_rank(&singular_values, cfg.rank_tol);
    Ok(SolverResult {
        solver: SolverKind::Dc,
        feasibility_residual: sys.residual_raw(&x),
        x,
        dof: dof(streams(sys), rank),
        numeric_rank: rank,
        singular_values,
        iterations,
        trace,
        status,
        target_rank: Some(k),
        descent_violations: violations,
    })
}

/// Whether `φ`, shrinking by the factor seen over the last window, drops below
/// `rank_tol²` before the iteration budget runs out. `φ ≥ σ_{k+1}²`, so that is
/// enough for convergence; `σ_{k+1}` itself is not monotone and makes a noisy trend.
fn reachable(old_phi: f64, phi: f64, cfg: &DcConfig, iterations: usize) -> bool {
    if phi >= old_phi {
        return false;
    }
    let target = cfg.rank_tol * cfg.rank_tol;
    let windows_needed = (target / phi).ln() / (phi / old_phi).ln();
    let remaining = cfg.max_iter_per_k.saturating_sub(iterations) as f64;
    windows_needed * cfg.stall_window as f64 <= remaining
}

/// Increases the rank parameter from 1 until a subproblem returns a point of
/// numeric rank at most that parameter.
///
/// The returned `iterations` and `descent_violations` are totals over all rank
/// parameters tried. A system with no equations yields the zero matrix with rank 0.
pub fn min_rank_dc(sys: &AffineSystem, cfg: &DcConfig) -> Result<SolverResult> {
    cfg.validate()?;
    if sys.is_degenerate() {
        return Ok(SolverResult {
            solver: SolverKind::Dc,
            x: ComplexMatrix::zeros(sys.rows(), sys.cols()),
            singular_values: Vec::new(),
            numeric_rank: 0,
            dof: dof(streams(sys), 0),
            feasibility_residual: 0.0,
            iterations: 0,
            trace: Vec::new(),
            status: Status::Converged,
            target_rank: None,
            descent_violations: 0,
        });
    }
    let p = sys.rows().min(sys.cols());
    let mut total_iters = 0;
    let mut total_violations = 0;
    let mut trace = Vec::new();
    let mut start: Option<ComplexMatrix> = None;
    for r in 1..=p {
        let x0 = match (&start, cfg.warm_start) {
            (Some(prev), true) => prev.clone(),
            _ => initial_point(sys, cfg.init, r)?,
        };
        let mut res = run(sys, r, x0, cfg)?;
        total_iters += res.iterations;
        total_violations += res.descent_violations;
        if cfg.record_trace {
            let offset = trace.len();
            trace.extend(res.trace.drain(..).map(|mut t| {
                t.iter += offset;
                t
            }));
        }
        if res.numeric_rank <= r || r == p {
            res.iterations = total_iters;
            res.descent_violations = total_violations;
            res.trace = trace;
            return Ok(res);
        }
        start = Some(res.x);
    }
    unreachable!("the last rank parameter always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ChannelMode, ProblemInstance};

    fn two_user(seed: u64) -> AffineSystem {
        let inst = ProblemInstance::generate(2, 2, 1, 1, 1, 1, vec![vec![0], vec![1]], ChannelMode::Direct, seed)
            .unwrap();
        AffineSystem::assemble(&inst, &inst.index_sets()).unwrap()
    }

    #[test]
    fn two_user_reaches_rank_one() {
        let sys = two_user(3);
        let res = dc_solve(&sys, 1, &DcConfig::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.singular_values[1] < 1e-5);
        assert!(res.feasibility_residual <= 1e-6);
        assert_eq!(res.descent_violations, 0);
    }

    #[test]
    fn least_norm_start_is_a_critical_point_of_the_two_user_problem() {
        let sys = two_user(3);
        let cfg = DcConfig {
            init: Init::LeastNorm,
            ..DcConfig::default()
        };
        let res = dc_solve(&sys, 1, &cfg).unwrap();
        assert_eq!(res.status, Status::Stalled);
        assert_eq!(res.numeric_rank, 2);
    }

    #[test]
    fn full_rank_parameter_converges_immediately() {
        let sys = two_user(5);
        let res = dc_solve(&sys, 2, &DcConfig::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(res.iterations <= 2);
        assert!(res.feasibility_residual < 1e-10);
    }

    #[test]
    fn min_rank_on_degenerate_system() {
        let sys = AffineSystem::from_equations(2, 3, &[], &[]).unwrap();
        let res = min_rank_dc(&sys, &DcConfig::default()).unwrap();
        assert_eq!(res.numeric_rank, 0);
        assert_eq!(res.dof, super::super::Dof::NotApplicable);
        assert_eq!(res.x, ComplexMatrix::zeros(2, 3));
    }

    #[test]
    fn rejects_bad_rank_parameter() {
        let sys = two_user(1);
        assert!(dc_solve(&sys, 0, &DcConfig::default()).is_err());
        assert!(dc_solve(&sys, 3, &DcConfig::default()).is_err());
    }
}
