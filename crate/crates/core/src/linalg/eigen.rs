//! Smallest generalized eigenpairs of `A x = lambda M x` with `A` symmetric
//! positive semidefinite and `M` SPD.
//!
//! The driver is deflated shift-invert power iteration run blockwise
//! (subspace iteration): every sweep solves `(A - sigma M) Y = M X` with one
//! reused factorization, M-orthonormalizes `Y`, and extracts Ritz pairs from
//! the projected pencil. The start shift `sigma = -tau` with `tau > 0` keeps
//! the inner solves SPD even when `A` is singular, so the zero modes of a
//! boundary-condition-free operator come out as the dominant directions of
//! the inverse; once the leading Ritz value settles, the shift moves just
//! below it so clustered low modes separate in a few sweeps.

use super::{dot, norm2, CsrMatrix, SpdSolver};
use crate::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||A x - lambda M x||_2` per converged pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Regularization of the seed factorization (`sigma = -shift`).
    pub shift: f64,
    /// RNG seed of the start block, recorded for reproducibility.
    pub seed: u64,
}

/// Computes the `count` smallest eigenpairs. Per-pair convergence contract:
/// `||A x - lambda M x||_2 <= tol * ||M x||_2 * max(1, lambda)`.
pub fn smallest_generalized_eigs(
    a: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    tol: f64,
    seed: u64,
) -> Result<EigResult> {
    let n = a.n_rows();
    if n != a.n_cols() || n != m.n_rows() || n != m.n_cols() {
        return Err(Error::ShapeMismatch(
            "eigensolver needs square A, M of equal size".into(),
        ));
    }
    if count == 0 || n == 0 {
        return Ok(EigResult {
            eigenvalues: vec![],
            eigenvectors: vec![],
            residuals: vec![],
            iterations: 0,
            shift: 0.0,
            seed,
        });
    }
    let count = count.min(n);

    // tau = 1e-8 * trace of the M-scaled operator keeps A + tau*M SPD
    let m_diag = m.diagonal();
    let traced: f64 = a
        .diagonal()
        .iter()
        .zip(&m_diag)
        .map(|(&ad, &md)| ad / md)
        .sum();
    let tau = (1e-8 * traced.abs()).max(1e-14);
    let shift = tau;
    // factor of A - sigma*M; sigma starts at -tau and creeps toward the
    // smallest Ritz value once it settles, which collapses the convergence
    // rate of clustered low modes
    let mut sigma = -tau;
    let factor_at = |s: f64| -> Result<SpdSolver> {
        let shifted = a
            .add_scaled(1.0, m, -s)
            .unwrap_or_else(|_| add_general(a, m, -s));
        SpdSolver::new(&shifted)
    };
    let mut solver = factor_at(sigma)?;

    let block = (count + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    m_orthonormalize(&mut basis, m)?;

    let max_sweeps = 500;
    for sweep in 1..=max_sweeps {
        // one shift-invert application per basis vector
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(block);
        for x in &basis {
            let rhs = m.mul_vec(x);
            next.push(solver.solve(&rhs)?);
        }
        m_orthonormalize(&mut next, m)?;

        // Rayleigh-Ritz on the projected pencil
        let dim = next.len();
        let mut proj_a = vec![vec![0.0; dim]; dim];
        let mut proj_m = vec![vec![0.0; dim]; dim];
        let a_applied: Vec<Vec<f64>> = next.iter().map(|x| a.mul_vec(x)).collect();
        let m_applied: Vec<Vec<f64>> = next.iter().map(|x| m.mul_vec(x)).collect();
        for i in 0..dim {
            for j in i..dim {
                let va = dot(&next[i], &a_applied[j]);
                let vm = dot(&next[i], &m_applied[j]);
                proj_a[i][j] = va;
                proj_a[j][i] = va;
                proj_m[i][j] = vm;
                proj_m[j][i] = vm;
            }
        }
        let (values, vectors) = dense_generalized_eig(&proj_a, &proj_m)?;
        let mut ritz: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for col in 0..dim {
            let mut v = vec![0.0; n];
            for (i, b) in next.iter().enumerate() {
                let c = vectors[i][col];
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk += c * bk;
                }
            }
            ritz.push(v);
        }

        // convergence of the first `count` pairs
        let mut residuals = Vec::with_capacity(count);
        let mut ok = true;
        for (lambda, x) in values.iter().take(count).zip(&ritz) {
            let ax = a.mul_vec(x);
            let mx = m.mul_vec(x);
            let r: Vec<f64> = ax
                .iter()
                .zip(&mx)
                .map(|(&axi, &mxi)| axi - lambda * mxi)
                .collect();
            let res = norm2(&r);
            residuals.push(res);
            if res > tol * norm2(&mx) * lambda.abs().max(1.0) {
                ok = false;
            }
        }
        if ok {
            // normalize each vector to unit M-norm
            let mut out_vecs = Vec::with_capacity(count);
            for x in ritz.into_iter().take(count) {
                let mn = dot(&x, &m.mul_vec(&x)).sqrt();
                out_vecs.push(x.iter().map(|&v| v / mn).collect());
            }
            return Ok(EigResult {
                eigenvalues: values[..count].to_vec(),
                eigenvectors: out_vecs,
                residuals,
                iterations: sweep,
                shift,
                seed,
            });
        }
        // once the leading Ritz value is trustworthy, move the shift just
        // below it and re-factor; clustered modes then separate in a few
        // sweeps instead of hundreds
        if sweep % 20 == 0 {
            let lam1 = values[0];
            let settled = residuals[0] <= 1e-2 * norm2(&m.mul_vec(&ritz[0])) * lam1.abs().max(1.0);
            let candidate = lam1 - 0.05 * (lam1 - sigma);
            if settled && candidate > sigma + 0.5 * tau {
                if let Ok(s) = factor_at(candidate) {
                    sigma = candidate;
                    solver = s;
                }
            }
        }
        basis = ritz;
        if sweep == max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweep,
                residual: residuals.iter().fold(0.0f64, |a, &b| a.max(b)),
            });
        }
    }
    unreachable!()
}

/// Modified Gram-Schmidt in the M-inner product, run twice per vector for
/// stability. Vectors that collapse numerically are re-randomized
/// deterministically.
fn m_orthonormalize(basis: &mut Vec<Vec<f64>>, m: &CsrMatrix) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0dd);
    for idx in 0..basis.len() {
        for _pass in 0..2 {
            let (done, rest) = basis.split_at_mut(idx);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(v, &m.mul_vec(u));
                for (vk, uk) in v.iter_mut().zip(u) {
                    *vk -= c * uk;
                }
            }
            let nrm = dot(v, &m.mul_vec(v)).sqrt();
            if nrm < 1e-12 {
                for vk in v.iter_mut() {
                    *vk = rng.random::<f64>() - 0.5;
                }
                continue;
            }
            for vk in v.iter_mut() {
                *vk /= nrm;
            }
        }
    }
    Ok(())
}

/// Dense symmetric generalized eigensolver for the small projected pencils:
/// Cholesky-reduce `(H, G)` to a standard problem and run cyclic Jacobi.
fn dense_generalized_eig(
    h: &[Vec<f64>],
    g: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = h.len();
    // dense Cholesky G = L L^T
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // C = L^{-1} H L^{-T}
    let mut c = h.to_vec();
    // solve L X = H (column-wise forward substitution on rows)
    for col in 0..n {
        for i in 0..n {
            let mut s = c[i][col];
            for k in 0..i {
                s -= l[i][k] * c[k][col];
            }
            c[i][col] = s / l[i][i];
        }
    }
    // solve X L^T = C  =>  for each row, forward substitution with L
    for row in 0..n {
        for j in 0..n {
            let mut s = c[row][j];
            for k in 0..j {
                s -= c[row][k] * l[j][k];
            }
            c[row][j] = s / l[j][j];
        }
    }
    let (values, y) = jacobi_symmetric_eig(&mut c);
    // back-substitute eigenvectors: x = L^{-T} y
    let mut x = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = y[i][col];
            for k in (i + 1)..n {
                s -= l[k][i] * x[k][col];
            }
            x[i][col] = s / l[i][i];
        }
    }
    // sort ascending
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = vec![vec![0.0; n]; n];
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            sorted_vectors[r][newc] = x[r][oldc];
        }
    }
    Ok((sorted_values, sorted_vectors))
}

/// Cyclic Jacobi for small dense symmetric matrices; returns eigenvalues and
/// the accumulated rotation (columns are eigenvectors).
fn jacobi_symmetric_eig(a: &mut [Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-15 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (values, v)
}

/// Sum of two CSR matrices with distinct patterns (rarely needed).
fn add_general(a: &CsrMatrix, m: &CsrMatrix, beta: f64) -> CsrMatrix {
    let mut dense = a.to_dense();
    for i in 0..m.n_rows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense[i][j] += beta * v;
        }
    }
    CsrMatrix::from_dense(&dense)
}
