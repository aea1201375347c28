//! Precoders and decoders recovered from a low-rank solution, with an end-to-end check
//! of the alignment conditions and a noiseless decode.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{IndexSets, ProblemInstance};
use crate::linalg::{gaussian_matrix, svd, ComplexMatrix, ComplexVector};
use crate::system::MatrixLayout;

/// Per-antenna transceiver blocks over `r` channel uses.
///
/// `u[p][m]` is the `d x r` decoder of receive antenna `m` for rx pair `p`, and
/// `v[q][n]` the `r x d` precoder of transmit antenna `n` for tx pair `q`, both indexed
/// as in the [`MatrixLayout`] they were sliced with.
#[derive(Debug, Clone)]
pub struct TransceiverSet {
    pub r: usize,
    pub layout: MatrixLayout,
    pub u: Vec<Vec<ComplexMatrix>>,
    pub v: Vec<Vec<ComplexMatrix>>,
}

impl TransceiverSet {
    /// `Ũ Ṽ` in the layout of the solution matrix.
    pub fn product(&self) -> ComplexMatrix {
        self.stacked_u() * self.stacked_v()
    }

    fn stacked_u(&self) -> ComplexMatrix {
        let lay = &self.layout;
        let mut u = ComplexMatrix::zeros(lay.rows(), self.r);
        for (p, per_antenna) in self.u.iter().enumerate() {
            for (m, block) in per_antenna.iter().enumerate() {
                for a in 0..lay.d {
                    u.set_row(lay.row_index(p, m, a), &block.row(a));
                }
            }
        }
        u
    }

    fn stacked_v(&self) -> ComplexMatrix {
        let lay = &self.layout;
        let mut v = ComplexMatrix::zeros(self.r, lay.cols());
        for (q, per_antenna) in self.v.iter().enumerate() {
            for (n, block) in per_antenna.iter().enumerate() {
                for b in 0..lay.d {
                    v.set_column(lay.col_index(q, n, b), &block.column(b));
                }
            }
        }
        v
    }

    fn check(&self, inst: &ProblemInstance, idx: &IndexSets) -> Result<()> {
        let expected = MatrixLayout::new(idx, inst.l, inst.d);
        if expected != self.layout {
            return Err(Error::Precondition(
                "transceiver layout does not match the instance".into(),
            ));
        }
        Ok(())
    }

    /// `Σ_{i holds j} Σ_{m,n} H_ki[m, n] U_kl[m] V_ij[n]` for rx pair `p = (k, l)`.
    fn effective(&self, inst: &ProblemInstance, idx: &IndexSets, p: usize, j: usize) -> ComplexMatrix {
        let lay = &self.layout;
        let k = lay.rx_pairs[p].0;
        let mut g = ComplexMatrix::zeros(lay.d, lay.d);
        for i in idx.holders(j) {
            let q = lay.tx_pair_index(i, j).expect("holder has a tx pair");
            let h = &inst.channels.h[k][i];
            for m in 0..lay.l {
                for n in 0..lay.l {
                    g += (&self.u[p][m] * &self.v[q][n]) * h[(m, n)];
                }
            }
        }
        g
    }
}

/// Balanced split of the rank-`r` truncation: `Ũ = U_r Σ_r^{1/2}`, `Ṽ = Σ_r^{1/2} V_r^H`.
pub fn factorize(x: &ComplexMatrix, r: usize, layout: &MatrixLayout) -> Result<TransceiverSet> {
    if x.shape() != (layout.rows(), layout.cols()) {
        return Err(Error::DimensionMismatch {
            expected: (layout.rows(), layout.cols()),
            found: x.shape(),
        });
    }
    let p = x.nrows().min(x.ncols());
    if r == 0 || r > p {
        return Err(Error::InvalidInput(format!("channel uses r={r} outside 1..={p}")));
    }
    let dec = svd(x);
    let mut big_u = dec.u.columns(0, r).into_owned();
    let mut big_v = dec.v_h.rows(0, r).into_owned();
    for i in 0..r {
        let root = dec.s[i].sqrt();
        big_u.column_mut(i).scale_mut(root);
        big_v.row_mut(i).scale_mut(root);
    }
    let (l, d) = (layout.l, layout.d);
    let u = (0..layout.rx_pairs.len())
        .map(|pp| {
            (0..l)
                .map(|m| {
                    ComplexMatrix::from_fn(d, r, |a, c| big_u[(layout.row_index(pp, m, a), c)])
                })
                .collect()
        })
        .collect();
    let v = (0..layout.tx_pairs.len())
        .map(|q| {
            (0..l)
                .map(|n| {
                    ComplexMatrix::from_fn(r, d, |c, b| big_v[(c, layout.col_index(q, n, b))])
                })
                .collect()
        })
        .collect();
    Ok(TransceiverSet {
        r,
        layout: layout.clone(),
        u,
        v,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub k: usize,
    pub l: usize,
    /// `‖G_des - I_d‖_F`.
    pub desired_residual: f64,
    /// Largest `‖G_int(j)‖_F`, zero when the pair sees no interferer.
    pub worst_interference_residual: f64,
    /// Interferer attaining `worst_interference_residual`.
    pub worst_interferer: Option<usize>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IaReport {
    pub tol: f64,
    pub pairs: Vec<PairCheck>,
}

impl IaReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.pass)
    }

    pub fn worst_desired(&self) -> f64 {
        self.pairs.iter().map(|p| p.desired_residual).fold(0.0, f64::max)
    }

    pub fn worst_interference(&self) -> f64 {
        self.pairs.iter().map(|p| p.worst_interference_residual).fold(0.0, f64::max)
    }

    /// CSV with columns `k,l,desired_residual,worst_interference_residual,pass`; user
    /// and message indices are 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "l", "desired_residual", "worst_interference_residual", "pass"])
            .map_err(csv_err)?;
        for p in &self.pairs {
            w.write_record([
                (p.k + 1).to_string(),
                (p.l + 1).to_string(),
                format!("{:e}", p.desired_residual),
                format!("{:e}", p.worst_interference_residual),
                p.pass.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Evaluates the desired-signal and zero-forcing conditions of every rx pair.
pub fn verify_ia(ts: &TransceiverSet, inst: &ProblemInstance, idx: &IndexSets, tol: f64) -> Result<IaReport> {
    ts.check(inst, idx)?;
    let eye = ComplexMatrix::identity(ts.layout.d, ts.layout.d);
    let pairs = ts
        .layout
        .rx_pairs
        .iter()
        .enumerate()
        .map(|(p, &(k, l))| {
            let desired_residual = (ts.effective(inst, idx, p, l) - &eye).norm();
            let mut worst = 0.0;
            let mut worst_interferer = None;
            for j in (0..idx.messages).filter(|&j| j != l && !idx.is_available(k, j)) {
                let g = ts.effective(inst, idx, p, j).norm();
                if worst_interferer.is_none() || g > worst {
                    worst = g;
                    worst_interferer = Some(j);
                }
            }
            PairCheck {
                k,
                l,
                desired_residual,
                worst_interference_residual: worst,
                worst_interferer,
                pass: desired_residual <= tol && worst <= tol,
            }
        })
        .collect();
    Ok(IaReport { tol, pairs })
}

/// Noiseless one-shot transmission of `messages` (one `d`-vector per message index).
/// Returns the estimate of every rx pair's requested message, in rx-pair order.
///
/// Each user transmits `x_i[n] = Σ_{j ∈ T_i} V_ij[n] s_j`; user `k` receives
/// `z_k[m] = Σ_i Σ_n H_ki[m, n] x_i[n]`, applies `U_kl`, and subtracts the part
/// carried by messages it already stores.
pub fn decode_messages(
    ts: &TransceiverSet,
    inst: &ProblemInstance,
    idx: &IndexSets,
    messages: &[ComplexVector],
) -> Result<Vec<ComplexVector>> {
    ts.check(inst, idx)?;
    let lay = &ts.layout;
    if messages.len() != idx.messages || messages.iter().any(|s| s.len() != lay.d) {
        return Err(Error::InvalidInput(format!(
            "expected {} messages of length {}",
            idx.messages, lay.d
        )));
    }
    let users = idx.users();
    let (l, r) = (lay.l, ts.r);
    // x[i][n]: r-vector sent from antenna n of user i.
    let mut x = vec![vec![ComplexVector::zeros(r); l]; users];
    for (q, &(i, j)) in lay.tx_pairs.iter().enumerate() {
        for (xn, vn) in x[i].iter_mut().zip(&ts.v[q]) {
            *xn += vn * &messages[j];
        }
    }
    let received: Vec<Vec<ComplexVector>> = (0..users)
        .map(|k| {
            (0..l)
                .map(|m| {
                    let mut z = ComplexVector::zeros(r);
                    for (i, xi) in x.iter().enumerate() {
                        let h = &inst.channels.h[k][i];
                        for (n, xin) in xi.iter().enumerate() {
                            z += xin * h[(m, n)];
                        }
                    }
                    z
                })
                .collect()
        })
        .collect();
    let estimates = lay
        .rx_pairs
        .iter()
        .enumerate()
        .map(|(p, &(k, _))| {
            let mut est = ComplexVector::zeros(lay.d);
            for (um, zm) in ts.u[p].iter().zip(&received[k]) {
                est += um * zm;
            }
            for (q, &(i, j)) in lay.tx_pairs.iter().enumerate() {
                if !idx.is_available(k, j) {
                    continue;
                }
                let h = &inst.channels.h[k][i];
                for m in 0..l {
                    for n in 0..l {
                        est -= (&ts.u[p][m] * (&ts.v[q][n] * &messages[j])) * h[(m, n)];
                    }
                }
            }
            est
        })
        .collect();
    Ok(estimates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    /// `‖ŝ_l - s_l‖ / ‖s_l‖` per rx pair (absolute error when `s_l = 0`).
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

/// Draws CN(0, I) messages from `seed` and decodes them through the noiseless network.
/// Refuses transceivers that fail [`verify_ia`] at `tol`.
pub fn simulate_shuffle(
    ts: &TransceiverSet,
    inst: &ProblemInstance,
    idx: &IndexSets,
    tol: f64,
    seed: u64,
) -> Result<DecodeReport> {
    let report = verify_ia(ts, inst, idx, tol)?;
    if !report.passed() {
        return Err(Error::Precondition(format!(
            "alignment check failed at tol {tol}: desired {:.3e}, interference {:.3e}",
            report.worst_desired(),
            report.worst_interference()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ts.layout.d;
    let messages: Vec<ComplexVector> = (0..idx.messages)
        .map(|_| gaussian_matrix(d, 1, &mut rng).column(0).into_owned())
        .collect();
    decode_report(ts, inst, idx, &messages)
}

/// Decode errors for explicit messages.
pub fn decode_report(
    ts: &TransceiverSet,
    inst: &ProblemInstance,
    idx: &IndexSets,
    messages: &[ComplexVector],
) -> Result<DecodeReport> {
    let estimates = decode_messages(ts, inst, idx, messages)?;
    let relative_errors: Vec<f64> = ts
        .layout
        .rx_pairs
        .iter()
        .zip(&estimates)
        .map(|(&(_, l), est)| {
            let err = (est - &messages[l]).norm();
            let scale = messages[l].norm();
            if scale > 0.0 {
                err / scale
            } else {
                err
            }
        })
        .collect();
    let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
    Ok(DecodeReport {
        relative_errors,
        max_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::ChannelMode;
    use crate::linalg::{diff_frobenius, C64};

    fn two_user() -> (ProblemInstance, IndexSets, MatrixLayout) {
        let inst =
            ProblemInstance::generate(2, 2, 1, 1, 1, 1, vec![vec![0], vec![1]], ChannelMode::Direct, 7).unwrap();
        let idx = inst.index_sets();
        let lay = MatrixLayout::new(&idx, 1, 1);
        (inst, idx, lay)
    }

    /// Rank-1 solution of the 2-user system: rows are the requested pairs of user 1
    /// and user 2, and every tx pair carries one scalar precoder.
    fn hand_built(inst: &ProblemInstance, lay: &MatrixLayout) -> TransceiverSet {
        let h12 = inst.channels.h[0][1][(0, 0)];
        let h21 = inst.channels.h[1][0][(0, 0)];
        let one = ComplexMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let u = vec![vec![one.clone()]; lay.rx_pairs.len()];
        let v = lay
            .tx_pairs
            .iter()
            .map(|&(i, j)| {
                // The pair requested by the other user gets the inverse channel.
                let wanted_by_other = lay.rx_pairs.iter().any(|&(k, l)| k != i && l == j);
                let h = if i == 0 { h21 } else { h12 };
                let val = if wanted_by_other { C64::new(1.0, 0.0) / h } else { C64::new(0.0, 0.0) };
                vec![ComplexMatrix::from_element(1, 1, val)]
            })
            .collect();
        TransceiverSet {
            r: 1,
            layout: lay.clone(),
            u,
            v,
        }
    }

    #[test]
    fn hand_built_two_user_passes_exactly() {
        let (inst, idx, lay) = two_user();
        let ts = hand_built(&inst, &lay);
        let rep = verify_ia(&ts, &inst, &idx, 1e-12).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let dec = simulate_shuffle(&ts, &inst, &idx, 1e-12, 3).unwrap();
        assert!(dec.max_relative_error <= 1e-12);
    }

    #[test]
    fn zero_precoders_fail_desired_checks() {
        let (inst, idx, lay) = two_user();
        let mut ts = hand_built(&inst, &lay);
        for q in ts.v.iter_mut() {
            for b in q.iter_mut() {
                b.fill(C64::new(0.0, 0.0));
            }
        }
        let rep = verify_ia(&ts, &inst, &idx, 1e-3).unwrap();
        assert!(rep.pairs.iter().all(|p| !p.pass && (p.desired_residual - 1.0).abs() < 1e-15));
        assert!(matches!(
            simulate_shuffle(&ts, &inst, &idx, 1e-3, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_messages_decode_to_zero() {
        let (inst, idx, lay) = two_user();
        let ts = hand_built(&inst, &lay);
        let zeros = vec![ComplexVector::zeros(1); idx.messages];
        let est = decode_messages(&ts, &inst, &idx, &zeros).unwrap();
        assert!(est.iter().all(|e| e.iter().all(|z| *z == C64::new(0.0, 0.0))));
    }

    #[test]
    fn factorize_reconstructs_at_full_rank() {
        let (_, _, lay) = two_user();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian_matrix(lay.rows(), lay.cols(), &mut rng);
        let ts = factorize(&x, 2, &lay).unwrap();
        assert!(diff_frobenius(&ts.product(), &x) < 1e-10);
        assert!(factorize(&x, 0, &lay).is_err());
        assert!(factorize(&x, 3, &lay).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let (inst, idx, lay) = two_user();
        let rep = verify_ia(&hand_built(&inst, &lay), &inst, &idx, 1e-9).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,l,desired_residual,worst_interference_residual,pass");
        assert_eq!(lines.len(), 1 + lay.rx_pairs.len());
        assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
    }
}
