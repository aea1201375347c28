//! The interference-alignment conditions as a sparse affine system `A(X) = b`.
//!
//! The unknown keeps only the row blocks `(k, l)` with `l ∈ R_k` and the column blocks
//! `(i, j)` with `j ∈ T_i`. Every alignment condition lives inside that submatrix, and
//! padding it back with zero blocks changes neither feasibility nor rank.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::instance::{IndexSets, ProblemInstance};
use crate::linalg::{hermitian_eigen_desc, max_abs, positive, ComplexMatrix, ComplexVector, C64, ZERO};

/// Relative pivot size below which the Gram factorization is treated as singular.
const PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixLayout {
    /// `(k, l)` with `l ∈ R_k`, ordered by `k` then `l`.
    pub rx_pairs: Vec<(usize, usize)>,
    /// `(i, j)` with `j ∈ T_i`, ordered by `i` then `j`.
    pub tx_pairs: Vec<(usize, usize)>,
    pub l: usize,
    pub d: usize,
    tx_lookup: HashMap<(usize, usize), usize>,
}

impl MatrixLayout {
    pub fn new(idx: &IndexSets, l: usize, d: usize) -> Self {
        let rx_pairs: Vec<_> = idx
            .requested
            .iter()
            .enumerate()
            .flat_map(|(k, rk)| rk.iter().map(move |&j| (k, j)))
            .collect();
        let tx_pairs: Vec<_> = idx
            .available
            .iter()
            .enumerate()
            .flat_map(|(i, ti)| ti.iter().map(move |&j| (i, j)))
            .collect();
        let tx_lookup = tx_pairs.iter().enumerate().map(|(q, &p)| (p, q)).collect();
        MatrixLayout {
            rx_pairs,
            tx_pairs,
            l,
            d,
            tx_lookup,
        }
    }

    /// Rows and columns per pair block, `L d`.
    pub fn block(&self) -> usize {
        self.l * self.d
    }

    pub fn rows(&self) -> usize {
        self.block() * self.rx_pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.block() * self.tx_pairs.len()
    }

    /// Row of `(rx pair p, antenna m, stream a)`, all 0-based.
    pub fn row_index(&self, p: usize, m: usize, a: usize) -> usize {
        p * self.block() + m * self.d + a
    }

    /// Column of `(tx pair q, antenna n, stream b)`, all 0-based.
    pub fn col_index(&self, q: usize, n: usize, b: usize) -> usize {
        q * self.block() + n * self.d + b
    }

    pub fn tx_pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.tx_lookup.get(&(i, j)).copied()
    }
}

/// One nonzero of the operator: equation `e` reads `coeff * X[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub coeff: C64,
}

#[derive(Debug, Clone)]
enum Factor {
    /// Inverse of a 1 x 1 Gram block.
    Scalar(f64),
    Cholesky(Cholesky<C64, nalgebra::Dyn>),
    /// Pseudo-inverse of a rank-deficient block.
    Pseudo(ComplexMatrix),
}

#[derive(Debug, Clone)]
struct GramBlock {
    eqs: Vec<usize>,
    factor: Factor,
}

/// Factorization of `A A^H`, split into the independent blocks of equations that
/// share no unknown.
#[derive(Debug, Clone)]
struct GramSolver {
    blocks: Vec<GramBlock>,
    deficiency: usize,
}

/// Inverse column weight `W^{-1} = scale I + B^H diag(d) B` with `B` of size `r x cols`.
#[derive(Debug, Clone)]
pub struct InverseWeight {
    pub scale: f64,
    pub basis: ComplexMatrix,
    pub diag: Vec<f64>,
}

impl InverseWeight {
    pub fn identity(cols: usize) -> Self {
        InverseWeight {
            scale: 1.0,
            basis: ComplexMatrix::zeros(0, cols),
            diag: Vec::new(),
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.basis.ncols();
        let mut scaled = self.basis.clone();
        for (i, di) in self.diag.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*di);
        }
        ComplexMatrix::identity(n, n) * C64::new(self.scale, 0.0) + self.basis.adjoint() * scaled
    }
}

#[derive(Debug, Clone)]
pub struct AffineSystem {
    layout: Option<MatrixLayout>,
    rows: usize,
    cols: usize,
    eq_ptr: Vec<usize>,
    entries: Vec<Entry>,
    b: Vec<C64>,
    gram: GramSolver,
    /// Equations grouped into connected sets of shared unknown rows.
    row_groups: Vec<Vec<usize>>,
}

impl AffineSystem {
    /// Builds the alignment system of an instance.
    ///
    /// For each requested pair `(k, l)` the desired-signal block (`j = l`, right side
    /// `I_d`) comes first, then one zero-forcing block per interfering message
    /// `j ∉ T_k ∪ {l}` in ascending order; each block has `d^2` equations in `(a, b)`
    /// order.
    pub fn assemble(inst: &ProblemInstance, idx: &IndexSets) -> Result<Self> {
        let layout = MatrixLayout::new(idx, inst.l, inst.d);
        let (l, d) = (inst.l, inst.d);
        let holders: Vec<Vec<usize>> = (0..idx.messages).map(|j| idx.holders(j)).collect();

        let mut eq_ptr = vec![0];
        let mut entries = Vec::new();
        let mut b = Vec::new();
        for (p, &(k, l_msg)) in layout.rx_pairs.iter().enumerate() {
            let interferers = (0..idx.messages).filter(|&j| j != l_msg && !idx.is_available(k, j));
            for j in std::iter::once(l_msg).chain(interferers) {
                for a in 0..d {
                    for bb in 0..d {
                        for &i in &holders[j] {
                            let q = layout
                                .tx_pair_index(i, j)
                                .expect("holder of j has a tx pair for j");
                            let h = &inst.channels.h[k][i];
                            for m in 0..l {
                                for n in 0..l {
                                    entries.push(Entry {
                                        row: layout.row_index(p, m, a),
                                        col: layout.col_index(q, n, bb),
                                        coeff: h[(m, n)],
                                    });
                                }
                            }
                        }
                        eq_ptr.push(entries.len());
                        b.push(if j == l_msg && a == bb { C64::new(1.0, 0.0) } else { ZERO });
                    }
                }
            }
        }
        let (rows, cols) = (layout.rows(), layout.cols());
        let gram = GramSolver::new(rows, cols, &eq_ptr, &entries);
        let row_groups = group_equations(&eq_ptr, &entries, |t| t.row);
        Ok(AffineSystem {
            row_groups,
            layout: Some(layout),
            rows,
            cols,
            eq_ptr,
            entries,
            b,
            gram,
        })
    }

    /// A general system over `rows x cols` matrices. Each equation lists
    /// `(row, col, coeff)` terms; repeated positions are summed.
    pub fn from_equations(
        rows: usize,
        cols: usize,
        equations: &[Vec<(usize, usize, C64)>],
        b: &[C64],
    ) -> Result<Self> {
        if equations.len() != b.len() {
            return Err(Error::InvalidInput(format!(
                "{} equations but {} right-hand sides",
                equations.len(),
                b.len()
            )));
        }
        let mut eq_ptr = vec![0];
        let mut entries: Vec<Entry> = Vec::new();
        for eq in equations {
            let start = entries.len();
            for &(row, col, coeff) in eq {
                if row >= rows || col >= cols {
                    return Err(Error::InvalidInput(format!(
                        "entry ({row}, {col}) outside a {rows} x {cols} unknown"
                    )));
                }
                match entries[start..].iter_mut().find(|e| e.row == row && e.col == col) {
                    Some(e) => e.coeff += coeff,
                    None => entries.push(Entry { row, col, coeff }),
                }
            }
            eq_ptr.push(entries.len());
        }
        let gram = GramSolver::new(rows, cols, &eq_ptr, &entries);
        let row_groups = group_equations(&eq_ptr, &entries, |t| t.row);
        Ok(AffineSystem {
            row_groups,
            layout: None,
            rows,
            cols,
            eq_ptr,
            entries,
            b: b.to_vec(),
            gram,
        })
    }

    /// Layout of the unknown; `None` for systems built with [`Self::from_equations`].
    pub fn layout(&self) -> Option<&MatrixLayout> {
        self.layout.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Number of scalar equations `S`.
    pub fn equations(&self) -> usize {
        self.b.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn rhs(&self) -> &[C64] {
        &self.b
    }

    /// Terms of equation `e`.
    pub fn equation(&self, e: usize) -> &[Entry] {
        &self.entries[self.eq_ptr[e]..self.eq_ptr[e + 1]]
    }

    /// Nothing is requested, so there is nothing to align.
    pub fn is_degenerate(&self) -> bool {
        self.b.is_empty()
    }

    /// Estimated rank deficiency of `A`; zero for generic channels.
    pub fn rank_deficiency(&self) -> usize {
        self.gram.deficiency
    }

    /// Number of independent equation blocks in `A A^H`.
    pub fn gram_blocks(&self) -> usize {
        self.gram.blocks.len()
    }

    fn check_shape(&self, x: &ComplexMatrix) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: x.shape(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexVector> {
        self.check_shape(x)?;
        Ok(ComplexVector::from_vec(self.apply_raw(x)))
    }

    fn apply_raw(&self, x: &ComplexMatrix) -> Vec<C64> {
        self.eq_ptr
            .windows(2)
            .map(|w| {
                self.entries[w[0]..w[1]]
                    .iter()
                    .fold(ZERO, |acc, e| acc + e.coeff * x[(e.row, e.col)])
            })
            .collect()
    }

    /// `A^H(y)`: entry `(r, c)` collects `conj(coeff) * y[e]` over the terms at `(r, c)`.
    pub fn adjoint(&self, y: &[C64]) -> Result<ComplexMatrix> {
        if y.len() != self.equations() {
            return Err(Error::DimensionMismatch {
                expected: (self.equations(), 1),
                found: (y.len(), 1),
            });
        }
        let mut out = ComplexMatrix::zeros(self.rows, self.cols);
        self.add_adjoint(&mut out, y, 1.0);
        Ok(out)
    }

    fn add_adjoint(&self, out: &mut ComplexMatrix, y: &[C64], scale: f64) {
        for (e, w) in self.eq_ptr.windows(2).enumerate() {
            let ye = y[e] * scale;
            if ye == ZERO {
                continue;
            }
            for t in &self.entries[w[0]..w[1]] {
                out[(t.row, t.col)] += t.coeff.conj() * ye;
            }
        }
    }

    /// `‖A(X) - b‖_∞`.
    pub fn residual(&self, x: &ComplexMatrix) -> Result<f64> {
        self.check_shape(x)?;
        Ok(self.residual_raw(x))
    }

    pub(crate) fn residual_raw(&self, x: &ComplexMatrix) -> f64 {
        let ax = self.apply_raw(x);
        ax.iter().zip(&self.b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Orthogonal projection onto `{X : A(X) = b}`:
    /// `X = M - A^H((A A^H)^{-1}(A(M) - b))`.
    pub fn project_affine(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_shape(m)?;
        let mut x = m.clone();
        self.project_in_place(&mut x)?;
        Ok(x)
    }

    pub(crate) fn project_in_place(&self, x: &mut ComplexMatrix) -> Result<()> {
        let mut r = self.apply_raw(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        let z = self.gram.solve(&r);
        self.add_adjoint(x, &z, -1.0);
        if self.gram.deficiency > 0 {
            let res = self.residual_raw(x);
            if res > 1e-10 * (1.0 + max_abs(&self.b)) {
                return Err(Error::SingularSystem {
                    deficiency: self.gram.deficiency,
                });
            }
        }
        Ok(())
    }

    /// Minimum-Frobenius-norm feasible point `A^+(b)`.
    pub fn least_norm_solution(&self) -> Result<ComplexMatrix> {
        self.project_affine(&ComplexMatrix::zeros(self.rows, self.cols))
    }

    /// Minimizer of `Tr(W X^H X)` subject to `A(X) = b`, i.e. `X = A^H(z) W^{-1}` with
    /// `A(A^H(z) W^{-1}) = b`.
    ///
    /// Equations that touch no common row of `X` decouple, so the system for `z` is
    /// factored one row group at a time.
    pub fn weighted_min_norm(&self, w: &InverseWeight) -> Result<ComplexMatrix> {
        let r = w.diag.len();
        if w.basis.ncols() != self.cols || w.basis.nrows() != r {
            return Err(Error::DimensionMismatch {
                expected: (r, self.cols),
                found: w.basis.shape(),
            });
        }
        if !positive(w.scale) || w.diag.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidInput("inverse weight must be positive definite".into()));
        }
        let mut z = vec![ZERO; self.equations()];
        let mut deficient = false;
        for eqs in &self.row_groups {
            let mut m = gram_block(eqs, self.cols, &self.eq_ptr, &self.entries) * C64::new(w.scale, 0.0);
            if r > 0 {
                let mut terms: Vec<(usize, usize, usize)> = Vec::new();
                for (local, &e) in eqs.iter().enumerate() {
                    terms.extend((self.eq_ptr[e]..self.eq_ptr[e + 1]).map(|t| (self.entries[t].row, local, t)));
                }
                terms.sort_unstable();
                let mut f = ComplexMatrix::zeros(eqs.len(), r);
                for same_row in terms.chunk_by(|x, y| x.0 == y.0) {
                    f.fill(ZERO);
                    for &(_, local, t) in same_row {
                        let Entry { col, coeff, .. } = self.entries[t];
                        for (i, bi) in w.basis.column(col).iter().enumerate() {
                            f[(local, i)] += coeff * bi;
                        }
                    }
                    let mut fd = f.clone();
                    for (i, di) in w.diag.iter().enumerate() {
                        fd.column_mut(i).scale_mut(*di);
                    }
                    m += fd * f.adjoint();
                }
            }
            let (factor, dropped) = factor_hermitian(m);
            deficient |= dropped > 0;
            let rhs = ComplexVector::from_iterator(eqs.len(), eqs.iter().map(|&e| self.b[e]));
            for (&e, v) in eqs.iter().zip(factor.solve(rhs).iter()) {
                z[e] = *v;
            }
        }
        let mut y = ComplexMatrix::zeros(self.rows, self.cols);
        self.add_adjoint(&mut y, &z, 1.0);
        let mut x = &y * C64::new(w.scale, 0.0);
        if r > 0 {
            let mut coeffs = &y * w.basis.adjoint();
            for (i, di) in w.diag.iter().enumerate() {
                coeffs.column_mut(i).scale_mut(*di);
            }
            x += coeffs * &w.basis;
        }
        if deficient && self.residual_raw(&x) > 1e-10 * (1.0 + max_abs(&self.b)) {
            return Err(Error::SingularSystem {
                deficiency: self.gram.deficiency.max(1),
            });
        }
        Ok(x)
    }

    /// Dense `S x (rows * cols)` matrix of the operator, with `X` vectorized row-major.
    pub fn to_dense(&self) -> ComplexMatrix {
        let mut a = ComplexMatrix::zeros(self.equations(), self.rows * self.cols);
        for (e, w) in self.eq_ptr.windows(2).enumerate() {
            for t in &self.entries[w[0]..w[1]] {
                a[(e, t.row * self.cols + t.col)] += t.coeff;
            }
        }
        a
    }

    /// Text dump of `(S, rows, cols, nnz)`, the 1-based triplets and `b`, for diffing
    /// systems across implementations.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {} {}", self.equations(), self.rows, self.cols, self.nnz());
        for (e, w) in self.eq_ptr.windows(2).enumerate() {
            for t in &self.entries[w[0]..w[1]] {
                let _ = writeln!(
                    out,
                    "{} {} {} {:.16e} {:.16e}",
                    e + 1,
                    t.row + 1,
                    t.col + 1,
                    t.coeff.re,
                    t.coeff.im
                );
            }
        }
        out.push('\n');
        for v in &self.b {
            let _ = writeln!(out, "{:.16e} {:.16e}", v.re, v.im);
        }
        out
    }
}

impl GramSolver {
    fn new(rows: usize, cols: usize, eq_ptr: &[usize], entries: &[Entry]) -> Self {
        debug_assert!(entries.iter().all(|t| t.row < rows));
        let groups = group_equations(eq_ptr, entries, |t| t.row * cols + t.col);
        let mut deficiency = 0;
        let mut blocks = Vec::with_capacity(groups.len());
        for eqs in groups {
            let (factor, def) = Self::factor_block(&eqs, cols, eq_ptr, entries);
            deficiency += def;
            blocks.push(GramBlock { eqs, factor });
        }
        if deficiency > 0 {
            log::warn!("affine operator is rank deficient by {deficiency}; using a pseudo-inverse");
        }
        GramSolver { blocks, deficiency }
    }

    fn factor_block(eqs: &[usize], cols: usize, eq_ptr: &[usize], entries: &[Entry]) -> (Factor, usize) {
        factor_hermitian(gram_block(eqs, cols, eq_ptr, entries))
    }

    fn solve(&self, r: &[C64]) -> Vec<C64> {
        let mut z = vec![ZERO; r.len()];
        for block in &self.blocks {
            let rhs = ComplexVector::from_iterator(block.eqs.len(), block.eqs.iter().map(|&e| r[e]));
            let sol = block.factor.solve(rhs);
            for (&e, v) in block.eqs.iter().zip(sol.iter()) {
                z[e] = *v;
            }
        }
        z
    }
}

/// The block of `A A^H` on equations `eqs`, summed in a fixed order.
fn gram_block(eqs: &[usize], cols: usize, eq_ptr: &[usize], entries: &[Entry]) -> ComplexMatrix {
    let mut terms: Vec<(usize, usize, C64)> = Vec::new();
    for (local, &e) in eqs.iter().enumerate() {
        terms.extend(entries[eq_ptr[e]..eq_ptr[e + 1]].iter().map(|t| (t.row * cols + t.col, local, t.coeff)));
    }
    terms.sort_by_key(|&(pos, local, _)| (pos, local));
    let n = eqs.len();
    let mut g = ComplexMatrix::zeros(n, n);
    for same in terms.chunk_by(|x, y| x.0 == y.0) {
        for &(_, a, ca) in same {
            for &(_, b, cb) in same {
                g[(a, b)] += ca * cb.conj();
            }
        }
    }
    g
}

/// Factorizes a Hermitian positive semidefinite matrix, returning the number of
/// directions dropped by the pseudo-inverse fallback.
fn factor_hermitian(g: ComplexMatrix) -> (Factor, usize) {
    let n = g.nrows();
    if n == 1 {
        let v = g[(0, 0)].re;
        return if v > 0.0 { (Factor::Scalar(1.0 / v), 0) } else { (Factor::Scalar(0.0), 1) };
    }
    if let Some(chol) = Cholesky::new(g.clone()) {
        let pivots: Vec<f64> = chol.l_dirty().diagonal().iter().map(|z| z.norm_sqr()).collect();
        let max = pivots.iter().copied().fold(0.0, f64::max);
        let min = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 && min >= PIVOT_RTOL * max {
            return (Factor::Cholesky(chol), 0);
        }
    }
    let (vals, vecs) = hermitian_eigen_desc(g);
    let cutoff = PIVOT_RTOL * vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut pinv = ComplexMatrix::zeros(n, n);
    let mut kept = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > cutoff && v > 0.0 {
            let col = vecs.column(i);
            pinv += col * col.adjoint() * C64::new(1.0 / v, 0.0);
            kept += 1;
        }
    }
    (Factor::Pseudo(pinv), n - kept)
}

impl Factor {
    fn solve(&self, rhs: ComplexVector) -> ComplexVector {
        match self {
            Factor::Scalar(inv) => rhs * C64::new(*inv, 0.0),
            Factor::Cholesky(chol) => chol.solve(&rhs),
            Factor::Pseudo(pinv) => pinv * rhs,
        }
    }
}

/// Connected components of equations, where two equations are linked when they have
/// a term with the same `key`. Components are ordered by their first equation.
fn group_equations(eq_ptr: &[usize], entries: &[Entry], key: impl Fn(&Entry) -> usize) -> Vec<Vec<usize>> {
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let s = eq_ptr.len() - 1;
    let mut parent: Vec<usize> = (0..s).collect();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for e in 0..s {
        for t in &entries[eq_ptr[e]..eq_ptr[e + 1]] {
            if let Some(&f) = owner.get(&key(t)) {
                let (ra, rb) = (find(&mut parent, e), find(&mut parent, f));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            } else {
                owner.insert(key(t), e);
            }
        }
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for e in 0..s {
        let root = find(&mut parent, e);
        let g = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(e);
    }
    groups
}

/// Number of nonzeros of `A` predicted from the index sets:
/// `d^2 L^2 Σ_k Σ_{l ∈ R_k} Σ_{j ∉ T_k} |{i : j ∈ T_i}|`.
pub fn nnz_formula(inst: &ProblemInstance, idx: &IndexSets) -> usize {
    let holders: Vec<usize> = (0..idx.messages).map(|j| idx.holders(j).len()).collect();
    let per_user: usize = (0..idx.users())
        .map(|k| {
            let outside: usize = (0..idx.messages)
                .filter(|&j| !idx.is_available(k, j))
                .map(|j| holders[j])
                .sum();
            idx.requested[k].len() * outside
        })
        .sum();
    inst.d * inst.d * inst.l * inst.l * per_user
}
