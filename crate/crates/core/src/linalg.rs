//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>`. The hot loops of the
//! solvers only ever need the dominant singular subspace of a wide (or tall) matrix,
//! which [`Spectral`] obtains from a Hermitian eigendecomposition of the smaller
//! Gram matrix instead of a full SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

pub use num_complex::Complex64 as C64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. CN(0, 1) entries, drawn in row-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

/// Trace inner product `Tr(A^H B)`.
pub fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// `x > 0`; false for NaN, which `!(x > 0.0)` checks would otherwise hide.
pub(crate) fn positive(x: f64) -> bool {
    x > 0.0
}

pub fn frobenius_sq(a: &ComplexMatrix) -> f64 {
    a.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    frobenius_sq(a).sqrt()
}

pub fn diff_frobenius(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn view(x: &ComplexMatrix) -> faer::MatRef<'_, Complex64> {
    faer::MatRef::from_column_major_slice(x.as_slice(), x.nrows(), x.ncols())
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `X X^H`.
pub fn gram_rows(x: &ComplexMatrix) -> ComplexMatrix {
    let v = view(x);
    let mut g = from_faer((v * v.adjoint()).as_ref());
    hermitian_fill_upper(&mut g);
    g
}

/// `X^H X`.
pub fn gram_cols(x: &ComplexMatrix) -> ComplexMatrix {
    let v = view(x);
    let mut g = from_faer((v.adjoint() * v).as_ref());
    hermitian_fill_upper(&mut g);
    g
}

/// Makes `g` exactly Hermitian from its lower triangle.
fn hermitian_fill_upper(g: &mut ComplexMatrix) {
    let m = g.nrows();
    for j in 0..m {
        g[(j, j)].im = 0.0;
        for i in (j + 1)..m {
            g[(j, i)] = g[(i, j)].conj();
        }
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted descending.
/// Columns of the returned matrix are the matching eigenvectors. Only the lower
/// triangle of `h` is read.
pub fn hermitian_eigen_desc(h: ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), h);
    }
    match view(&h).self_adjoint_eigen(faer::Side::Lower) {
        Ok(eig) => {
            let (s, u) = (eig.S(), eig.U());
            // Ascending from the solver; reverse.
            let values = (0..n).rev().map(|i| s[i].re).collect();
            let vectors = ComplexMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
            (values, vectors)
        }
        Err(_) => {
            let eig = h.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut vectors = ComplexMatrix::zeros(n, n);
            for (dst, &src) in order.iter().enumerate() {
                vectors.set_column(dst, &eig.eigenvectors.column(src));
            }
            (values, vectors)
        }
    }
}

/// Thin SVD with singular values sorted descending: `X = U diag(s) V^H`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v_h: ComplexMatrix,
}

pub fn svd(x: &ComplexMatrix) -> Svd {
    let (m, n) = x.shape();
    let p = m.min(n);
    if p == 0 {
        return Svd {
            u: ComplexMatrix::zeros(m, 0),
            s: Vec::new(),
            v_h: ComplexMatrix::zeros(0, n),
        };
    }
    let dec = x.clone().svd(true, true);
    let (u_raw, v_raw) = (dec.u.expect("u requested"), dec.v_t.expect("v requested"));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let mut u = ComplexMatrix::zeros(m, p);
    let mut v_h = ComplexMatrix::zeros(p, n);
    let mut s = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v_h.set_row(dst, &v_raw.row(src));
        s.push(dec.singular_values[src]);
    }
    Svd { u, s, v_h }
}

/// Singular values sorted descending.
pub fn singular_values(x: &ComplexMatrix) -> Vec<f64> {
    if x.nrows().min(x.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = x.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Dominant singular subspace of `x` taken from the Gram matrix of its shorter side.
///
/// For a wide matrix the left singular vectors are eigenvectors of `X X^H` and every
/// spectral map `U f(Σ) V^H` can be written as `U diag(f(σ)/σ) U^H X`; tall matrices
/// use `X^H X` and act from the right. Eigenvalues are clamped at zero, so
/// singular values below roughly `sqrt(eps) * σ_max` are not resolved.
#[derive(Debug, Clone)]
pub struct Spectral {
    left: bool,
    sq: Vec<f64>,
    vectors: ComplexMatrix,
}

impl Spectral {
    pub fn new(x: &ComplexMatrix) -> Self {
        let left = x.nrows() <= x.ncols();
        let g = if left { gram_rows(x) } else { gram_cols(x) };
        let (mut sq, vectors) = hermitian_eigen_desc(g);
        for v in sq.iter_mut() {
            *v = v.max(0.0);
        }
        Spectral { left, sq, vectors }
    }

    /// Squared singular values, descending.
    pub fn squared(&self) -> &[f64] {
        &self.sq
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.sq.iter().map(|v| v.sqrt()).collect()
    }

    /// `σ_{k+1}`, or zero when `k` covers the whole spectrum.
    pub fn sigma_after(&self, k: usize) -> f64 {
        self.sq.get(k).map_or(0.0, |v| v.sqrt())
    }

    /// Sum of squared singular values beyond the first `k`.
    pub fn tail_energy(&self, k: usize) -> f64 {
        self.sq.iter().skip(k).sum()
    }

    /// `U diag(w) U^H X` (or the right-sided analogue) for per-direction weights `w`.
    /// Only the leading `w.len()` directions take part.
    pub fn apply_weights(&self, x: &ComplexMatrix, w: &[f64]) -> ComplexMatrix {
        let r = w.len();
        if r == 0 {
            return ComplexMatrix::zeros(x.nrows(), x.ncols());
        }
        let n = self.vectors.nrows();
        let basis = faer::MatRef::from_column_major_slice(&self.vectors.as_slice()[..n * r], n, r);
        let x = view(x);
        let out = if self.left {
            let mut coeffs = basis.adjoint() * x;
            for (i, wi) in w.iter().enumerate() {
                coeffs.row_mut(i).iter_mut().for_each(|z| *z *= *wi);
            }
            basis * coeffs
        } else {
            let mut coeffs = x * basis;
            for (i, wi) in w.iter().enumerate() {
                coeffs.col_mut(i).iter_mut().for_each(|z| *z *= *wi);
            }
            coeffs * basis.adjoint()
        };
        from_faer(out.as_ref())
    }

    /// Best rank-`k` approximation `U_k Σ_k V_k^H`.
    pub fn truncate(&self, x: &ComplexMatrix, k: usize) -> ComplexMatrix {
        let k = k.min(self.sq.len());
        self.apply_weights(x, &vec![1.0; k])
    }

    /// Singular-value soft threshold `U max(Σ - τ, 0) V^H`.
    pub fn shrink(&self, x: &ComplexMatrix, tau: f64) -> ComplexMatrix {
        let w: Vec<f64> = self
            .sq
            .iter()
            .map(|v| v.sqrt())
            .take_while(|&s| s > tau)
            .map(|s| 1.0 - tau / s)
            .collect();
        self.apply_weights(x, &w)
    }
}
