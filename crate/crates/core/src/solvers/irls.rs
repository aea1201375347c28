use super::dc::initial_point;
use super::{dof, Init, numeric_rank, streams, SolverKind, SolverResult, Status, TraceRecord};
use crate::error::{Error, Result};
use crate::linalg::{diff_frobenius, frobenius, gram_cols, gram_rows, hermitian_eigen_desc, positive, singular_values, ComplexMatrix};
use crate::system::{AffineSystem, InverseWeight};

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsConfig {
    pub gamma0: f64,
    pub gamma_min: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub rank_tol: f64,
    pub init: Init,
    pub record_trace: bool,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            gamma0: 1e-2,
            gamma_min: 1e-12,
            tol: 1e-6,
            max_iter: 300,
            rank_tol: super::RANK_TOL,
            init: Init::Random(0),
            record_trace: false,
        }
    }
}

/// `(X^H X + γ I)^e` in the low-rank-plus-identity form used by
/// [`AffineSystem::weighted_min_norm`], together with the smoothed objective
/// `Tr((X^H X + γ I)^{p/2})`.
fn inverse_weight(x: &ComplexMatrix, gamma: f64, e: f64, half_p: f64) -> (InverseWeight, f64) {
    let (m, n) = x.shape();
    let base = gamma.powf(e);
    // (σ² + γ)^e - γ^e without cancellation for σ² ≪ γ.
    let lift = |sq: f64| base * (e * (sq / gamma).ln_1p()).exp_m1();
    let mut objective = 0.0;
    let weight = if m < n {
        let (sq, u) = hermitian_eigen_desc(gram_rows(x));
        let mut diag = Vec::with_capacity(m);
        for &s in &sq {
            let s = s.max(0.0);
            objective += (s + gamma).powf(half_p);
            diag.push(if s > 0.0 { lift(s) / s } else { 0.0 });
        }
        objective += (n - m) as f64 * gamma.powf(half_p);
        InverseWeight {
            scale: base,
            basis: u.adjoint() * x,
            diag,
        }
    } else {
        let (sq, v) = hermitian_eigen_desc(gram_cols(x));
        let diag = sq
            .iter()
            .map(|&s| {
                let s = s.max(0.0);
                objective += (s + gamma).powf(half_p);
                lift(s)
            })
            .collect();
        InverseWeight {
            scale: base,
            basis: v.adjoint(),
            diag,
        }
    };
    (weight, objective)
}

/// IRLS for the smoothed Schatten-`p` quasi-norm: each step solves
/// `min Tr(W X^H X) s.t. A(X) = b` with `W = (X^H X + γ I)^{p/2 - 1}`, and `γ` halves
/// down to `cfg.gamma_min`.
///
/// On alignment systems `A^+(b)` has mutually orthogonal rows, which makes it a fixed
/// point of the reweighting; [`Init::LeastNorm`] therefore returns it unchanged.
pub fn irls_solve(sys: &AffineSystem, p: f64, cfg: &IrlsConfig) -> Result<SolverResult> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!("IRLS exponent p={p} outside (0, 1]")));
    }
    if !positive(cfg.gamma0) || !positive(cfg.gamma_min) || !positive(cfg.tol) || cfg.max_iter == 0 {
        return Err(Error::InvalidInput("IRLS configuration values must be positive".into()));
    }
    let mut x = initial_point(sys, cfg.init, 0)?;
    let mut gamma = cfg.gamma0;
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let (w, objective) = inverse_weight(&x, gamma, 1.0 - p / 2.0, p / 2.0);
        let mut next = sys.weighted_min_norm(&w)?;
        sys.project_in_place(&mut next)?;
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical {
                iteration: iterations,
                message: "non-finite IRLS iterate".into(),
            });
        }
        let step = diff_frobenius(&next, &x);
        let scale = 1.0 + frobenius(&x);
        if cfg.record_trace {
            trace.push(TraceRecord {
                iter: iterations,
                objective,
                step_norm: step,
                sigma_kplus1: gamma,
                residual: sys.residual_raw(&next),
            });
        }
        x = next;
        iterations += 1;
        gamma = (gamma / 2.0).max(cfg.gamma_min);
        if step <= cfg.tol * scale {
            status = Status::Converged;
            break;
        }
    }
    let singular_values = singular_values(&x);
    let rank = numeric_rank(&singular_values, cfg.rank_tol);
    Ok(SolverResult {
        solver: SolverKind::Irls,
        feasibility_residual: sys.residual_raw(&x),
        x,
        dof: dof(streams(sys), rank),
        numeric_rank: rank,
        singular_values,
        iterations,
        trace,
        status,
        target_rank: None,
        descent_violations: 0,
    })
}
