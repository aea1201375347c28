use super::{dof, numeric_rank, streams, SolverKind, SolverResult, Status, TraceRecord};
use crate::error::{Error, Result};
use crate::linalg::{diff_frobenius, positive, frobenius, singular_values, ComplexMatrix, Spectral};
use crate::system::AffineSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct NuclearConfig {
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub rank_tol: f64,
    pub record_trace: bool,
}

impl Default for NuclearConfig {
    fn default() -> Self {
        NuclearConfig {
            rho: 1.0,
            tol: 1e-6,
            max_iter: 5000,
            rank_tol: super::RANK_TOL,
            record_trace: false,
        }
    }
}

/// Singular-value soft threshold `U max(Σ - τ, 0) V^H`.
pub fn svt(m: &ComplexMatrix, tau: f64) -> ComplexMatrix {
    Spectral::new(m).shrink(m, tau.max(0.0))
}

/// ADMM on `min ‖Z‖_* s.t. X = Z, A(X) = b`.
///
/// The returned point is the `X` iterate, which is feasible after every step.
pub fn nuclear_solve(sys: &AffineSystem, cfg: &NuclearConfig) -> Result<SolverResult> {
    if !positive(cfg.rho) || !positive(cfg.tol) || cfg.max_iter == 0 || !positive(cfg.rank_tol) {
        return Err(Error::InvalidInput("nuclear configuration values must be positive".into()));
    }
    let (rows, cols) = sys.shape();
    let mut z = ComplexMatrix::zeros(rows, cols);
    let mut u = ComplexMatrix::zeros(rows, cols);
    let mut x = sys.least_norm_solution()?;
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let mut next_x = &z - &u;
        sys.project_in_place(&mut next_x)?;
        let v = &next_x + &u;
        let spectrum = Spectral::new(&v);
        let next_z = spectrum.shrink(&v, 1.0 / cfg.rho);
        let gap = diff_frobenius(&next_x, &next_z);
        let dz = diff_frobenius(&next_z, &z);
        u += &next_x - &next_z;
        let step = diff_frobenius(&next_x, &x);
        x = next_x;
        z = next_z;
        iterations += 1;
        if cfg.record_trace {
            let objective = spectrum
                .singular_values()
                .iter()
                .map(|s| (s - 1.0 / cfg.rho).max(0.0))
                .sum();
            trace.push(TraceRecord {
                iter: iterations - 1,
                objective,
                step_norm: step,
                sigma_kplus1: f64::NAN,
                residual: gap,
            });
        }
        if gap <= cfg.tol * (1.0 + frobenius(&x)) && dz <= cfg.tol {
            status = Status::Converged;
            break;
        }
    }
    let singular_values = singular_values(&x);
    let rank = numeric_rank(&singular_values, cfg.rank_tol);
    Ok(SolverResult {
        solver: SolverKind::Nuclear,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svt_shrinks_diagonal() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = C64::new(3.0, 0.0);
        m[(1, 1)] = C64::new(-2.0, 0.0);
        m[(2, 2)] = C64::new(0.5, 0.0);
        let s = svt(&m, 1.0);
        assert!((s[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((s[(1, 1)] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(s[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = gaussian_matrix(4, 7, &mut rng);
        assert!(diff_frobenius(&svt(&m, 0.0), &m) < 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let c = C64::new(1.0, 0.5);
        let sys = AffineSystem::from_equations(2, 2, &[vec![(0, 0, c)], vec![(1, 0, c), (1, 1, c)]], &[C64::new(0.0, 0.0); 2])
            .unwrap();
        let res = nuclear_solve(&sys, &NuclearConfig::default()).unwrap();
        assert_eq!(res.status, Status::Converged);
        assert!(frobenius(&res.x) < 1e-12);
        assert_eq!(res.numeric_rank, 0);
    }
}
