use crate::error::{Error, Result};
use crate::linalg::{singular_values, svd, ComplexMatrix, C64};

fn check_k(x: &ComplexMatrix, k: usize) -> Result<()> {
    let p = x.nrows().min(x.ncols());
    if k == 0 || k > p {
        return Err(Error::InvalidInput(format!("rank parameter k={k} outside 1..={p}")));
    }
    Ok(())
}

/// Squared Ky Fan 2-k norm: the sum of the `k` largest squared singular values.
pub fn kyfan_2k_norm_sq(x: &ComplexMatrix, k: usize) -> Result<f64> {
    check_k(x, k)?;
    Ok(singular_values(x).iter().take(k).map(|s| s * s).sum())
}

/// The subgradient `2 U Σ_k V^H` of the squared Ky Fan 2-k norm.
///
/// When `σ_k = σ_{k+1}` the first `k` singular vectors returned by the SVD are used;
/// any such choice is a valid subgradient.
pub fn kyfan_2k_subgrad(x: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    check_k(x, k)?;
    let dec = svd(x);
    let mut g = ComplexMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..k {
        g += dec.u.column(i) * dec.v_h.row(i) * C64::new(2.0 * dec.s[i], 0.0);
    }
    Ok(g)
}
