//! Test-only oracles, independent of the library's solver paths.

use korn_curl::linalg::CsrMatrix;

/// Dense symmetric generalized eigensolver: full Cholesky reduction of
/// `A x = λ M x` followed by classical two-sided Jacobi sweeps on the dense
/// matrix. Completely independent of the library's shift-invert subspace
/// iteration; used as the reference spectrum at desk scale.
pub fn dense_generalized_eigs(a: &CsrMatrix, m: &CsrMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let ad = a.to_dense();
    let md = m.to_dense();
    let n = ad.len();
    // M = L L^T
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = md[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "mass matrix must be SPD (pivot {s} at {i})");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // C = L^{-1} A L^{-T}
    let mut c = ad;
    for col in 0..n {
        for i in 0..n {
            let mut s = c[i][col];
            for k in 0..i {
                s -= l[i][k] * c[k][col];
            }
            c[i][col] = s / l[i][i];
        }
    }
    for row in 0..n {
        for j in 0..n {
            let mut s = c[row][j];
            for k in 0..j {
                s -= c[row][k] * l[j][k];
            }
            c[row][j] = s / l[j][j];
        }
    }
    // classical Jacobi with accumulated rotations
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(c[i][j].abs());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if c[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (c[q][q] - c[p][p]) / (2.0 * c[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let ckp = c[k][p];
                    let ckq = c[k][q];
                    c[k][p] = cs * ckp - sn * ckq;
                    c[k][q] = sn * ckp + cs * ckq;
                }
                for k in 0..n {
                    let cpk = c[p][k];
                    let cqk = c[q][k];
                    c[p][k] = cs * cpk - sn * cqk;
                    c[q][k] = sn * cpk + cs * cqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = cs * vkp - sn * vkq;
                    v[k][q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    // eigenvectors of the pencil: x = L^{-T} y
    let mut x = vec![vec![0.0f64; n]; n];
    for col in 0..n {
        for i in (0..n).rev() {
            let mut s = v[i][col];
            for k in (i + 1)..n {
                s -= l[k][i] * x[k][col];
            }
            x[i][col] = s / l[i][i];
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| c[i][i].total_cmp(&c[j][j]));
    let values: Vec<f64> = order.iter().map(|&i| c[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|r| x[r][col]).collect())
        .collect();
    (values, vectors)
}

/// M-orthonormalizes a small set of vectors (dense Gram + Cholesky).
pub fn m_orthonormal_basis(vectors: &[Vec<f64>], m: &CsrMatrix) -> Vec<Vec<f64>> {
    let k = vectors.len();
    let mut gram = vec![vec![0.0f64; k]; k];
    let applied: Vec<Vec<f64>> = vectors.iter().map(|v| m.mul_vec(v)).collect();
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = vectors[i]
                .iter()
                .zip(&applied[j])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    let mut l = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = gram[i][j];
            for t in 0..j {
                s -= l[i][t] * l[j][t];
            }
            if i == j {
                assert!(s > 0.0, "kernel basis must be independent");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // B = V L^{-T}: solve L^T coefficients columnwise
    let n = vectors[0].len();
    let mut out = vec![vec![0.0f64; n]; k];
    for col in 0..k {
        // e_col -> c with L^T c = e_col restricted to the leading block
        let mut coeff = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for t in (i + 1)..k {
                s -= l[t][i] * coeff[t];
            }
            coeff[i] = s / l[i][i];
        }
        for (ci, vec_i) in coeff.iter().zip(vectors) {
            for (o, vi) in out[col].iter_mut().zip(vec_i) {
                *o += ci * vi;
            }
        }
    }
    out
}

/// M-orthogonal projection error of `v` onto the span of an M-orthonormal
/// basis, relative to the M-norm of `v`.
pub fn projection_error(v: &[f64], basis: &[Vec<f64>], m: &CsrMatrix) -> f64 {
    let mv = m.mul_vec(v);
    let vnorm = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().sqrt();
    let mut residual = v.to_vec();
    for b in basis {
        let c: f64 = b.iter().zip(&mv).map(|(a, x)| a * x).sum();
        for (r, bi) in residual.iter_mut().zip(b) {
            *r -= c * bi;
        }
    }
    let mr = m.mul_vec(&residual);
    let rnorm = residual
        .iter()
        .zip(&mr)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .sqrt();
    rnorm / vnorm.max(1e-300)
}
