//! Exact 3D tensor algebra: the identification of vectors with skew
//! matrices, row-wise cross products, symmetric/skew splitting and the
//! closed-form identities relating the gradient of a skew field to its curl.
//!
//! All types are plain values and all operations are pure functions; they can
//! be called concurrently from any number of threads.

use crate::{Error, Result};

/// Absolute tolerance for "is skew/symmetric" checks on O(1) fields.
pub const SKEW_TOL: f64 = 1e-12;

/// A vector in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    /// Standard basis vector `e_k`, `k` in `0..3`.
    pub fn unit(k: usize) -> Self {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        Vec3(v)
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(self, b: Vec3) -> Vec3 {
        let a = self.0;
        let b = b.0;
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn add(self, other: Vec3) -> Vec3 {
        Vec3([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn sub(self, other: Vec3) -> Vec3 {
        Vec3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    /// Dyadic product `self ⊗ other`.
    pub fn outer(self, other: Vec3) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.0[i] * other.0[j];
            }
        }
        Mat3(m)
    }
}

/// A dense 3x3 real matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        let mut m = [[0.0; 3]; 3];
        m[0][0] = 1.0;
        m[1][1] = 1.0;
        m[2][2] = 1.0;
        Mat3(m)
    }

    pub fn row(&self, k: usize) -> Vec3 {
        Vec3(self.0[k])
    }

    pub fn set_row(&mut self, k: usize, v: Vec3) {
        self.0[k] = v.0;
    }

    pub fn transpose(&self) -> Mat3 {
        let a = &self.0;
        Mat3([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Symmetric part `(M + M^T)/2`.
    pub fn sym(&self) -> Mat3 {
        self.add(&self.transpose()).scale(0.5)
    }

    /// Skew part `(M - M^T)/2`; `sym(M) + skew(M) = M` exactly.
    pub fn skew(&self) -> Mat3 {
        self.sub(&self.transpose()).scale(0.5)
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn add(&self, other: &Mat3) -> Mat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += other.0[i][j];
            }
        }
        Mat3(m)
    }

    pub fn sub(&self, other: &Mat3) -> Mat3 {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] -= other.0[i][j];
            }
        }
        Mat3(m)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut m = self.0;
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        Mat3(m)
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3([
            self.row(0).dot(v),
            self.row(1).dot(v),
            self.row(2).dot(v),
        ])
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Inverse by cofactors; returns `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 {
            return None;
        }
        let a = &self.0;
        let inv = |r1: usize, c1: usize, r2: usize, c2: usize| a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1];
        let m = Mat3([
            [inv(1, 1, 2, 2), inv(0, 2, 2, 1), inv(0, 1, 1, 2)],
            [inv(1, 2, 2, 0), inv(0, 0, 2, 2), inv(0, 2, 1, 0)],
            [inv(1, 0, 2, 1), inv(0, 1, 2, 0), inv(0, 0, 1, 1)],
        ]);
        Some(m.scale(1.0 / d))
    }
}

/// Canonical identification of a vector with a skew-symmetric matrix:
/// `anti(a) b = a × b` for every `b`.
pub fn anti(a: Vec3) -> Mat3 {
    let [a1, a2, a3] = a.0;
    Mat3([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])
}

/// Inverse of [`anti`]; fails when `m` is not skew-symmetric within
/// [`SKEW_TOL`] per entry.
pub fn axl(m: &Mat3) -> Result<Vec3> {
    let dev = m.add(&m.transpose()).max_abs();
    if dev > 2.0 * SKEW_TOL {
        return Err(Error::NotSkew(dev / 2.0));
    }
    Ok(Vec3([m.0[2][1], m.0[0][2], m.0[1][0]]))
}

/// Row-wise vector product of a matrix with a vector: row `k` of the result
/// is `(row k of P) × b`.
pub fn mat_cross_vec(p: &Mat3, b: Vec3) -> Mat3 {
    let mut out = Mat3::ZERO;
    for k in 0..3 {
        out.set_row(k, p.row(k).cross(b));
    }
    out
}

/// Closed form of `anti(a) × b`: returns `b ⊗ a - ⟨b,a⟩ id`.
pub fn product_identity(a: Vec3, b: Vec3) -> Mat3 {
    b.outer(a).sub(&Mat3::identity().scale(b.dot(a)))
}

/// Checks both sides of the equivalence `anti(a) × b = 0  ⇔  b ⊗ a = 0`
/// within an absolute tolerance of 1e-12; the two booleans must agree.
pub fn check_observation_2_1(a: Vec3, b: Vec3) -> (bool, bool) {
    let lhs = mat_cross_vec(&anti(a), b).max_abs() <= 1e-12;
    let rhs = b.outer(a).max_abs() <= 1e-12;
    (lhs, rhs)
}

/// Given the pointwise gradient `G = ∇(axl A)` of a skew field `A`, returns
/// the pointwise value of `Curl A = tr(G) id - G^T`.
pub fn curl_from_axl_gradient(g: &Mat3) -> Mat3 {
    Mat3::identity().scale(g.trace()).sub(&g.transpose())
}

/// Inverse of [`curl_from_axl_gradient`]: recovers `∇(axl A)` from the
/// pointwise value `C = Curl A` as `(1/2) tr(C) id - C^T`.
pub fn axl_gradient_from_curl(c: &Mat3) -> Mat3 {
    Mat3::identity().scale(0.5 * c.trace()).sub(&c.transpose())
}

/// Vector-valued displacement of total degree <= 2 given by monomial
/// coefficient tables, so all derivatives are exact:
///
/// `u_k(x) = c_k + b_k · x + (1/2) x^T Q_k x` with `Q_k` symmetric.
#[derive(Debug, Clone)]
pub struct QuadraticDisplacement {
    pub constant: Vec3,
    /// `linear.0[k]` holds `b_k`, i.e. `∇u_k` at the origin (so the
    /// displacement gradient at 0 is exactly this matrix).
    pub linear: Mat3,
    /// `quadratic[k]` is the symmetric Hessian `Q_k` of component `k`.
    pub quadratic: [Mat3; 3],
}

impl QuadraticDisplacement {
    pub fn affine(constant: Vec3, linear: Mat3) -> Self {
        QuadraticDisplacement {
            constant,
            linear,
            quadratic: [Mat3::ZERO; 3],
        }
    }

    /// Builds a random displacement with i.i.d. entries from `draw`; the
    /// Hessians are symmetrized so the coefficient tables stay valid.
    pub fn random(mut draw: impl FnMut() -> f64) -> Self {
        let constant = Vec3([draw(), draw(), draw()]);
        let mut linear = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                linear.0[i][j] = draw();
            }
        }
        let mut quadratic = [Mat3::ZERO; 3];
        for q in quadratic.iter_mut() {
            let mut raw = Mat3::ZERO;
            for i in 0..3 {
                for j in 0..3 {
                    raw.0[i][j] = draw();
                }
            }
            *q = raw.sym();
        }
        QuadraticDisplacement {
            constant,
            linear,
            quadratic,
        }
    }

    pub fn eval(&self, x: Vec3) -> Vec3 {
        let mut u = [0.0; 3];
        for k in 0..3 {
            u[k] = self.constant.0[k]
                + Vec3(self.linear.0[k]).dot(x)
                + 0.5 * self.quadratic[k].mul_vec(x).dot(x);
        }
        Vec3(u)
    }

    /// Displacement gradient at `x`: entry `(k, j) = ∂_j u_k`.
    pub fn gradient(&self, x: Vec3) -> Mat3 {
        let mut g = self.linear;
        for k in 0..3 {
            let qx = self.quadratic[k].mul_vec(x);
            for j in 0..3 {
                g.0[k][j] += qx.0[j];
            }
        }
        g
    }

    /// Exact second derivative `∂_i ∂_j u_k` (constant for degree 2).
    pub fn second_derivative(&self, i: usize, j: usize, k: usize) -> f64 {
        self.quadratic[k].0[i][j]
    }

    /// Derivative of the symmetrized gradient: `∂_j (sym ∇u)_{ik}`, exact.
    ///
    /// `(sym ∇u)_{ik} = (∂_k u_i + ∂_i u_k)/2`, so the derivative is
    /// `((Q_i)_{kj} + (Q_k)_{ij})/2`.
    pub fn sym_gradient_derivative(&self, j: usize, i: usize, k: usize) -> f64 {
        0.5 * (self.quadratic[i].0[k][j] + self.quadratic[k].0[i][j])
    }
}

/// Max over `i,j,k` of the residual of the representation of second
/// derivatives by first derivatives of the symmetrized gradient:
///
/// `∂_i ∂_j u_k - [∂_j (sym∇u)_{ik} + ∂_i (sym∇u)_{jk} - ∂_k (sym∇u)_{ij}]`,
///
/// evaluated exactly on the coefficient tables. The identity holds for every
/// displacement, so the result is pure rounding noise (<= 1e-13 contract).
pub fn second_derivative_identity_residual(u: &QuadraticDisplacement) -> f64 {
    let mut max = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let lhs = u.second_derivative(i, j, k);
                let rhs = u.sym_gradient_derivative(j, i, k) + u.sym_gradient_derivative(i, j, k)
                    - u.sym_gradient_derivative(k, i, j);
                max = max.max((lhs - rhs).abs());
            }
        }
    }
    max
}
