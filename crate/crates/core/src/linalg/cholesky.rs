//! Banded Cholesky factorization. Structured meshes give moderate
//! bandwidths, so a dense-band factor is the robust desk-scale choice; the
//! band collapses to a dense factorization in the worst case.

use super::CsrMatrix;
use crate::{Error, Result};

pub(crate) fn bandwidth(a: &CsrMatrix) -> usize {
    let mut bw = 0usize;
    for i in 0..a.n_rows() {
        let (cols, _) = a.row(i);
        for &j in cols {
            bw = bw.max(i.abs_diff(j));
        }
    }
    bw
}

/// Lower-band Cholesky factor `L` with `A = L L^T`.
///
/// Storage is row-major `n x (bandwidth + 1)`: entry `(i, b)` holds
/// `L[i][i - bandwidth + b]`.
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    factor: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<BandCholesky> {
        let n = a.n_rows();
        assert_eq!(n, a.n_cols(), "Cholesky needs a square matrix");
        let bw = bandwidth(a);
        let w = bw + 1;
        let mut band = vec![0.0f64; n * w];
        // band[i*w + (j - i + bw)] = A[i][j] for j in [i-bw, i]
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    band[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            // off-diagonal entries of row i
            for j in lo..i {
                let mut s = band[i * w + (j + bw - i)];
                let kmin = lo.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                band[i * w + (j + bw - i)] = s / band[j * w + bw];
            }
            let mut d = band[i * w + bw];
            for k in lo..i {
                let l = band[i * w + (k + bw - i)];
                d -= l * l;
            }
            if d <= 0.0 {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            band[i * w + bw] = d.sqrt();
        }
        Ok(BandCholesky {
            n,
            bandwidth: bw,
            factor: band,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let bw = self.bandwidth;
        let w = bw + 1;
        let mut y = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.factor[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.factor[i * w + bw];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = y[i];
            for k in (i + 1)..=hi {
                s -= self.factor[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.factor[i * w + bw];
        }
        y
    }
}

/// One-shot SPD solve with residual contract `||Ax - b|| <= 1e-10 ||b||`.
pub fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let chol = BandCholesky::factor(a)?;
    Ok(chol.solve(b))
}
