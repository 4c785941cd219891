//! Preconditioned conjugate gradients for SPD systems.

use super::{dot, norm2, CsrMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b` to `||A x - b|| <= tol * ||b||`. On non-convergence the
/// error carries the iteration count and the best residual reached; the
/// best iterate is discarded by the caller's choice of error handling.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
    preconditioner: Preconditioner,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.n_rows();
    assert_eq!(b.len(), n);
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgReport {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Option<Vec<f64>> = match preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            a.diagonal()
                .iter()
                .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        ),
    };
    let apply_pc = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            None => r.to_vec(),
            Some(d) => r.iter().zip(d).map(|(&x, &m)| x * m).collect(),
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_pc(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iterations {
        let res = norm2(&r);
        if res <= tol * b_norm {
            return Ok((
                x,
                CgReport {
                    iterations: it,
                    residual: res,
                },
            ));
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                row: it,
                pivot: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = apply_pc(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r);
    if res <= tol * b_norm {
        return Ok((
            x,
            CgReport {
                iterations: max_iterations,
                residual: res,
            },
        ));
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: res / b_norm,
    })
}
