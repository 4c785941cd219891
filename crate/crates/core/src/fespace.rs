//! Finite-element spaces: `P1` vector Lagrange elements for displacements and
//! a matrix-valued edge-element space for tensor fields `P` whose three rows
//! are lowest-order curl-conforming (Whitney) fields.
//!
//! DOF layout:
//! * vector `P1`: `dof = 3*vertex + component`, `dof_count = 3*V`;
//! * edge-matrix: `dof = 3*edge + row`, `dof_count = 3*E`. The DOF value is
//!   the line integral of the row along the edge, oriented from the lower to
//!   the higher global vertex index.
//!
//! The gradient embedding `∇(P1) ⊂ edge space` is exact: the edge DOF of a
//! gradient is the difference of vertex values, and the cellwise curl of the
//! embedded field vanishes identically.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::forms::edge_gauss2;
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, RegionLabel, LOCAL_EDGES};
use crate::tensor3::{Mat3, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Vector-valued `P1` Lagrange space (vertex DOFs).
    VectorP1,
    /// Matrix-valued lowest-order edge space (edge x row DOFs).
    EdgeMatrix,
}

impl SpaceKind {
    fn name(self) -> &'static str {
        match self {
            SpaceKind::VectorP1 => "vector-P1",
            SpaceKind::EdgeMatrix => "edge-matrix",
        }
    }
}

/// Degree-of-freedom layout of a space over a shared mesh. Cheap to clone.
#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
}

impl FeSpace {
    pub fn vector_p1(mesh: Arc<Mesh>) -> FeSpace {
        FeSpace {
            kind: SpaceKind::VectorP1,
            mesh,
        }
    }

    pub fn edge_matrix(mesh: Arc<Mesh>) -> FeSpace {
        FeSpace {
            kind: SpaceKind::EdgeMatrix,
            mesh,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        match self.kind {
            SpaceKind::VectorP1 => 3 * self.mesh.vertex_count(),
            SpaceKind::EdgeMatrix => 3 * self.mesh.edge_count(),
        }
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// DOF indices attached to the boundary region: all components of the
    /// region's vertices (P1) or all rows of the region's face edges
    /// (edge-matrix, the discrete vanishing tangential trace).
    pub fn boundary_dofs(&self, region: RegionLabel) -> Result<BTreeSet<usize>> {
        match self.kind {
            SpaceKind::VectorP1 => {
                let verts = self.mesh.boundary_vertices(region)?;
                Ok(verts
                    .into_iter()
                    .flat_map(|v| (0..3).map(move |c| 3 * v + c))
                    .collect())
            }
            SpaceKind::EdgeMatrix => {
                let edges = self.mesh.boundary_edges(region)?;
                Ok(edges
                    .into_iter()
                    .flat_map(|e| (0..3).map(move |r| 3 * e + r))
                    .collect())
            }
        }
    }

    pub fn zero_field(&self) -> FieldDofs {
        FieldDofs {
            space: self.clone(),
            values: vec![0.0; self.dof_count()],
        }
    }

    pub fn field_from_values(&self, values: Vec<f64>) -> FieldDofs {
        assert_eq!(values.len(), self.dof_count());
        FieldDofs {
            space: self.clone(),
            values,
        }
    }

    /// Interpolates an analytic matrix field into the edge space: DOF
    /// `(e, r)` is the line integral of row `r` along edge `e`, computed
    /// with 2-point Gauss (exact through cubic integrands, so rows of the
    /// affine form `a + b x x` are reproduced exactly).
    pub fn interpolate_matrix(&self, f: impl Fn(Vec3) -> Mat3) -> Result<FieldDofs> {
        if self.kind != SpaceKind::EdgeMatrix {
            return Err(Error::WrongSpace {
                expected: SpaceKind::EdgeMatrix.name(),
                got: self.kind.name(),
            });
        }
        let mesh = &self.mesh;
        let mut values = vec![0.0; self.dof_count()];
        for (e, edge) in mesh.edges.iter().enumerate() {
            let a = mesh.vertices[edge[0]];
            let b = mesh.vertices[edge[1]];
            let dir = b.sub(a);
            let mut integral = [0.0f64; 3];
            for (t, w) in edge_gauss2() {
                let x = a.add(dir.scale(t));
                let m = f(x);
                for (r, acc) in integral.iter_mut().enumerate() {
                    *acc += w * m.row(r).dot(dir);
                }
            }
            for r in 0..3 {
                values[3 * e + r] = integral[r];
            }
        }
        Ok(FieldDofs {
            space: self.clone(),
            values,
        })
    }

    /// Interpolates an analytic vector field into the `P1` space by vertex
    /// evaluation.
    pub fn interpolate_vector(&self, f: impl Fn(Vec3) -> Vec3) -> Result<FieldDofs> {
        if self.kind != SpaceKind::VectorP1 {
            return Err(Error::WrongSpace {
                expected: SpaceKind::VectorP1.name(),
                got: self.kind.name(),
            });
        }
        let mut values = vec![0.0; self.dof_count()];
        for (v, &x) in self.mesh.vertices.iter().enumerate() {
            let u = f(x);
            for c in 0..3 {
                values[3 * v + c] = u.0[c];
            }
        }
        Ok(FieldDofs {
            space: self.clone(),
            values,
        })
    }
}

/// Whitney basis data of one cell: values are evaluated per barycentric
/// point, curls are cellwise constant.
pub(crate) struct CellEdgeBasis {
    /// Global edge index per local edge.
    pub edges: [usize; 6],
    /// Orientation sign relating local traversal to the global direction.
    pub signs: [f64; 6],
    /// Local endpoint pair per local edge.
    pub pairs: [(usize, usize); 6],
    /// Constant curl of each (globally oriented) local basis field.
    pub curls: [Vec3; 6],
}

impl CellEdgeBasis {
    pub fn new(mesh: &Mesh, cell: usize) -> CellEdgeBasis {
        let g = &mesh.geometry[cell].grad_bary;
        let mut edges = [0usize; 6];
        let mut signs = [0.0f64; 6];
        let mut curls = [Vec3::ZERO; 6];
        for (k, (e, s)) in mesh.cell_edges[cell].iter().enumerate() {
            edges[k] = *e;
            signs[k] = *s;
            let (a, b) = LOCAL_EDGES[k];
            curls[k] = g[a].cross(g[b]).scale(2.0 * *s);
        }
        CellEdgeBasis {
            edges,
            signs,
            pairs: LOCAL_EDGES,
            curls,
        }
    }

    /// Values of the six (globally oriented) Whitney fields at `bary`.
    pub fn values(&self, mesh: &Mesh, cell: usize, bary: [f64; 4]) -> [Vec3; 6] {
        let g = &mesh.geometry[cell].grad_bary;
        let mut out = [Vec3::ZERO; 6];
        for k in 0..6 {
            let (a, b) = self.pairs[k];
            out[k] = g[b]
                .scale(bary[a])
                .sub(g[a].scale(bary[b]))
                .scale(self.signs[k]);
        }
        out
    }
}

/// Coefficient vector of a discrete field.
#[derive(Debug, Clone)]
pub struct FieldDofs {
    space: FeSpace,
    pub values: Vec<f64>,
}

impl FieldDofs {
    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        let n = self.space.mesh.cell_count();
        if cell >= n {
            return Err(Error::OutOfRange {
                index: cell,
                size: n,
            });
        }
        Ok(())
    }

    /// Pointwise value of an edge-matrix field: row `r` is the sum of signed
    /// DOF values times the Whitney fields of the cell.
    pub fn eval_matrix(&self, cell: usize, bary: [f64; 4]) -> Result<Mat3> {
        if self.space.kind != SpaceKind::EdgeMatrix {
            return Err(Error::WrongSpace {
                expected: SpaceKind::EdgeMatrix.name(),
                got: self.space.kind.name(),
            });
        }
        self.check_cell(cell)?;
        let mesh = &self.space.mesh;
        let basis = CellEdgeBasis::new(mesh, cell);
        let vals = basis.values(mesh, cell, bary);
        let mut out = Mat3::ZERO;
        for k in 0..6 {
            let e = basis.edges[k];
            for r in 0..3 {
                let c = self.values[3 * e + r];
                if c != 0.0 {
                    out.set_row(r, out.row(r).add(vals[k].scale(c)));
                }
            }
        }
        Ok(out)
    }

    /// Pointwise value of a `P1` vector field by barycentric interpolation.
    pub fn eval_vector(&self, cell: usize, bary: [f64; 4]) -> Result<Vec3> {
        if self.space.kind != SpaceKind::VectorP1 {
            return Err(Error::WrongSpace {
                expected: SpaceKind::VectorP1.name(),
                got: self.space.kind.name(),
            });
        }
        self.check_cell(cell)?;
        let mesh = &self.space.mesh;
        let verts = mesh.cells[cell];
        let mut out = Vec3::ZERO;
        for (i, &v) in verts.iter().enumerate() {
            let val = Vec3::new(
                self.values[3 * v],
                self.values[3 * v + 1],
                self.values[3 * v + 2],
            );
            out = out.add(val.scale(bary[i]));
        }
        Ok(out)
    }

    /// Cellwise-constant row-wise curl of an edge-matrix field.
    pub fn eval_curl(&self, cell: usize) -> Result<Mat3> {
        if self.space.kind != SpaceKind::EdgeMatrix {
            return Err(Error::WrongSpace {
                expected: SpaceKind::EdgeMatrix.name(),
                got: self.space.kind.name(),
            });
        }
        self.check_cell(cell)?;
        let mesh = &self.space.mesh;
        let basis = CellEdgeBasis::new(mesh, cell);
        let mut out = Mat3::ZERO;
        for k in 0..6 {
            let e = basis.edges[k];
            for r in 0..3 {
                let c = self.values[3 * e + r];
                if c != 0.0 {
                    out.set_row(r, out.row(r).add(basis.curls[k].scale(c)));
                }
            }
        }
        Ok(out)
    }

    /// Cellwise-constant gradient of a `P1` vector field (rows are component
    /// gradients).
    pub fn eval_gradient(&self, cell: usize) -> Result<Mat3> {
        if self.space.kind != SpaceKind::VectorP1 {
            return Err(Error::WrongSpace {
                expected: SpaceKind::VectorP1.name(),
                got: self.space.kind.name(),
            });
        }
        self.check_cell(cell)?;
        let mesh = &self.space.mesh;
        let verts = mesh.cells[cell];
        let g = &mesh.geometry[cell].grad_bary;
        let mut out = Mat3::ZERO;
        for (i, &v) in verts.iter().enumerate() {
            for r in 0..3 {
                out.set_row(r, out.row(r).add(g[i].scale(self.values[3 * v + r])));
            }
        }
        Ok(out)
    }

    /// L2-type norm through a mass-like CSR form.
    pub fn form_norm(&self, form: &CsrMatrix) -> f64 {
        form.quadratic_form(&self.values).max(0.0).sqrt()
    }
}

/// Embeds the gradient of a `P1` vector field into the edge-matrix space
/// exactly: DOF `(e, r) = u_r(end) - u_r(start)`. The curl of the result is
/// zero to machine precision on every mesh.
pub fn interpolate_gradient(u: &FieldDofs) -> Result<FieldDofs> {
    if u.space.kind != SpaceKind::VectorP1 {
        return Err(Error::WrongSpace {
            expected: SpaceKind::VectorP1.name(),
            got: u.space.kind.name(),
        });
    }
    let mesh = u.space.mesh.clone();
    let target = FeSpace::edge_matrix(mesh);
    let mut values = vec![0.0; target.dof_count()];
    for (e, edge) in target.mesh.edges.iter().enumerate() {
        for r in 0..3 {
            values[3 * e + r] = u.values[3 * edge[1] + r] - u.values[3 * edge[0] + r];
        }
    }
    Ok(FieldDofs {
        space: target,
        values,
    })
}

/// Eliminated-DOF bookkeeping for tangential (or Dirichlet) boundary
/// conditions: constrained DOFs are pinned to zero and condensed out of
/// assembled systems.
#[derive(Debug, Clone)]
pub struct DofConstraints {
    free: Vec<usize>,
    free_index: Vec<Option<usize>>,
}

impl DofConstraints {
    pub fn eliminate(space: &FeSpace, region: RegionLabel) -> Result<DofConstraints> {
        let fixed = space.boundary_dofs(region)?;
        Ok(Self::from_fixed(space.dof_count(), &fixed))
    }

    /// No constraints (identity mapping).
    pub fn none(space: &FeSpace) -> DofConstraints {
        Self::from_fixed(space.dof_count(), &BTreeSet::new())
    }

    pub fn from_fixed(dof_count: usize, fixed: &BTreeSet<usize>) -> DofConstraints {
        let mut free = Vec::with_capacity(dof_count - fixed.len());
        let mut free_index = vec![None; dof_count];
        for dof in 0..dof_count {
            if !fixed.contains(&dof) {
                free_index[dof] = Some(free.len());
                free.push(dof);
            }
        }
        DofConstraints { free, free_index }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_total(&self) -> usize {
        self.free_index.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.free_index[dof].is_some()
    }

    /// Zeroes the constrained DOFs of a field in place.
    pub fn project_field(&self, field: &mut FieldDofs) {
        for (dof, idx) in self.free_index.iter().enumerate() {
            if idx.is_none() {
                field.values[dof] = 0.0;
            }
        }
    }

    pub fn restrict_vec(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    pub fn expand_vec(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.free_index.len()];
        for (&dof, &v) in self.free.iter().zip(reduced) {
            full[dof] = v;
        }
        full
    }

    /// Condenses rows and columns of an assembled form to the free DOFs.
    pub fn restrict_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        a.restrict(&self.free, &self.free_index, self.free.len())
    }
}

/// Residual of the discrete integration-by-parts identity for a field with
/// whole-boundary tangential constraints:
///
/// `| ∫ <Curl P_h, Q> - ∫ <P_h, Curl Q> |`
///
/// for an analytic test tensor `Q` with cellwise-exact quadrature. With the
/// tangential trace eliminated the boundary pairing vanishes and the value is
/// pure rounding noise.
pub fn tangential_trace_ibp_residual(
    p: &FieldDofs,
    q: impl Fn(Vec3) -> Mat3,
    curl_q: impl Fn(Vec3) -> Mat3,
) -> Result<f64> {
    if p.space.kind != SpaceKind::EdgeMatrix {
        return Err(Error::WrongSpace {
            expected: SpaceKind::EdgeMatrix.name(),
            got: p.space.kind.name(),
        });
    }
    let mesh = &p.space.mesh;
    let rule = crate::forms::QuadratureRule::tet_degree2();
    let mut total = 0.0;
    for cell in 0..mesh.cell_count() {
        let vol = mesh.cell_volume(cell);
        let curl_p = p.eval_curl(cell)?;
        for (bary, w) in rule.points_weights() {
            let x = mesh.point_in_cell(cell, *bary);
            let ph = p.eval_matrix(cell, *bary)?;
            total += w * vol * (curl_p.inner(&q(x)) - ph.inner(&curl_q(x)));
        }
    }
    Ok(total.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor3::anti;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_cube(k: usize) -> Arc<Mesh> {
        Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), k))
    }

    #[test]
    fn dof_counts() {
        let mesh = unit_cube(1);
        assert_eq!(FeSpace::vector_p1(mesh.clone()).dof_count(), 24);
        assert_eq!(FeSpace::edge_matrix(mesh).dof_count(), 57);
    }

    #[test]
    fn boundary_dof_elimination_counts() {
        let mesh = unit_cube(1);
        let space = FeSpace::edge_matrix(mesh);
        let all = DofConstraints::eliminate(&space, RegionLabel::Boundary).unwrap();
        assert_eq!(space.dof_count() - all.n_free(), 54);
        assert_eq!(all.n_free(), 3);
        let z0 = DofConstraints::eliminate(&space, RegionLabel::FaceZ0).unwrap();
        assert_eq!(space.dof_count() - z0.n_free(), 15);
    }

    #[test]
    fn zero_field_evaluates_to_zero() {
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let f = space.zero_field();
        for cell in 0..space.mesh().cell_count() {
            assert_eq!(f.eval_matrix(cell, [0.25; 4]).unwrap(), Mat3::ZERO);
            assert_eq!(f.eval_curl(cell).unwrap(), Mat3::ZERO);
        }
    }

    #[test]
    fn constant_fields_reproduced() {
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let a = anti(Vec3::new(0.0, 0.0, 1.0));
        let f = space.interpolate_matrix(|_| a).unwrap();
        for cell in 0..space.mesh().cell_count() {
            let v = f.eval_matrix(cell, [0.25; 4]).unwrap();
            assert!(v.sub(&a).max_abs() < 1e-12);
            assert!(f.eval_curl(cell).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn affine_whitney_fields_reproduced_exactly() {
        // rows of the form a + b x x span the local edge space
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let a = [
            Vec3::new(0.3, -1.0, 0.2),
            Vec3::new(0.0, 0.7, -0.4),
            Vec3::new(1.1, 0.0, 0.5),
        ];
        let b = [
            Vec3::new(-0.2, 0.4, 1.0),
            Vec3::new(0.6, -0.1, 0.0),
            Vec3::new(0.0, 0.9, -0.7),
        ];
        let field = |x: Vec3| {
            let mut m = Mat3::ZERO;
            for r in 0..3 {
                m.set_row(r, a[r].add(b[r].cross(x)));
            }
            m
        };
        let f = space.interpolate_matrix(field).unwrap();
        let mesh = space.mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let cell = rng.random_range(0..mesh.cell_count());
            let mut bary = [0.0f64; 4];
            let mut s = 0.0;
            for b in bary.iter_mut().take(3) {
                *b = rng.random::<f64>() * (1.0 - s);
                s += *b;
            }
            bary[3] = 1.0 - s;
            let x = mesh.point_in_cell(cell, bary);
            let err = f.eval_matrix(cell, bary).unwrap().sub(&field(x)).max_abs();
            assert!(err < 1e-12, "affine reproduction error {err:.3e}");
        }
    }

    #[test]
    fn interpolation_is_a_projection() {
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = space.zero_field();
        for v in f.values.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        // re-interpolate the discrete field through pointwise evaluation
        let mesh = space.mesh().clone();
        let fr = &f;
        let g = space
            .interpolate_matrix(|x| {
                let (cell, bary) = mesh.locate(x).expect("interpolation point inside");
                fr.eval_matrix(cell, bary).unwrap()
            })
            .unwrap();
        let max = f
            .values
            .iter()
            .zip(&g.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(max < 1e-12, "projection deviation {max:.3e}");
    }

    #[test]
    fn linear_skew_interpolant_curl() {
        // P(x) = anti((x3, 0, 0)) has constant curl with entry (3,1) = -1
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let f = space
            .interpolate_matrix(|x| anti(Vec3::new(x.0[2], 0.0, 0.0)))
            .unwrap();
        let mut expect = Mat3::ZERO;
        expect.0[2][0] = -1.0;
        for cell in 0..space.mesh().cell_count() {
            let c = f.eval_curl(cell).unwrap();
            assert!(c.sub(&expect).max_abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_embedding_affine_and_complex() {
        let mesh = unit_cube(2);
        let p1 = FeSpace::vector_p1(mesh.clone());
        // u constant -> P = 0
        let u0 = p1.interpolate_vector(|_| Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let g0 = interpolate_gradient(&u0).unwrap();
        assert!(g0.values.iter().all(|&v| v == 0.0));
        // u = Bx -> P = B everywhere
        let b = Mat3([[0.0, 1.0, 0.5], [-1.0, 0.2, 0.0], [0.3, 0.0, -0.6]]);
        let ub = p1.interpolate_vector(|x| b.mul_vec(x)).unwrap();
        let gb = interpolate_gradient(&ub).unwrap();
        for cell in 0..mesh.cell_count() {
            let v = gb.eval_matrix(cell, [0.25; 4]).unwrap();
            assert!(v.sub(&b).max_abs() < 1e-12);
            assert!(gb.eval_curl(cell).unwrap().max_abs() < 1e-13);
        }
        // random u: ||Curl P_h|| tiny relative to ||P_h||
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut u = p1.zero_field();
        for v in u.values.iter_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        let p = interpolate_gradient(&u).unwrap();
        let scale: f64 = p.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut curl_norm = 0.0f64;
        for cell in 0..mesh.cell_count() {
            curl_norm = curl_norm.max(p.eval_curl(cell).unwrap().max_abs());
        }
        assert!(curl_norm <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn constrained_space_kills_constant_skews() {
        // with whole-boundary constraints the only constant skew field left
        // is zero: projecting the interpolant of anti(e_i) and re-checking
        // the remaining DOFs shows they cannot represent the constant
        let mesh = unit_cube(1);
        let space = FeSpace::edge_matrix(mesh);
        let bc = DofConstraints::eliminate(&space, RegionLabel::Boundary).unwrap();
        for i in 0..3 {
            let a = anti(Vec3::unit(i));
            let mut f = space.interpolate_matrix(|_| a).unwrap();
            bc.project_field(&mut f);
            // the projected field is no longer the constant: some interior
            // cell must deviate
            let mut deviates = false;
            for cell in 0..space.mesh().cell_count() {
                if f.eval_matrix(cell, [0.25; 4]).unwrap().sub(&a).max_abs() > 1e-6 {
                    deviates = true;
                }
            }
            assert!(deviates);
        }
    }

    #[test]
    fn ibp_residual_vanishes_for_constrained_fields() {
        let mesh = unit_cube(2);
        let space = FeSpace::edge_matrix(mesh);
        let bc = DofConstraints::eliminate(&space, RegionLabel::Boundary).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..5 {
            let mut p = space.zero_field();
            for v in p.values.iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
            bc.project_field(&mut p);
            // constant test tensor: Curl Q = 0
            let q0 = Mat3([[1.0, 2.0, 0.0], [0.0, -1.0, 0.5], [0.3, 0.0, 1.0]]);
            let r = tangential_trace_ibp_residual(&p, |_| q0, |_| Mat3::ZERO).unwrap();
            assert!(r < 1e-11, "trial {trial}: constant-Q residual {r:.3e}");
            // affine rows a + b x x: Curl(row r) = -2 b_r
            let b = [
                Vec3::new(0.1, -0.7, 0.4),
                Vec3::new(0.9, 0.0, -0.2),
                Vec3::new(-0.5, 0.3, 0.8),
            ];
            let q = |x: Vec3| {
                let mut m = q0;
                for r in 0..3 {
                    m.set_row(r, m.row(r).add(b[r].cross(x)));
                }
                m
            };
            let curl_q = |_x: Vec3| {
                let mut m = Mat3::ZERO;
                for r in 0..3 {
                    m.set_row(r, b[r].scale(2.0));
                }
                m
            };
            let r = tangential_trace_ibp_residual(&p, q, curl_q).unwrap();
            assert!(r < 1e-11, "trial {trial}: affine-Q residual {r:.3e}");
        }
        // zero field gives exactly zero
        let r =
            tangential_trace_ibp_residual(&space.zero_field(), |_| Mat3::identity(), |_| Mat3::ZERO)
                .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn wrong_space_errors() {
        let mesh = unit_cube(1);
        let p1 = FeSpace::vector_p1(mesh.clone());
        let em = FeSpace::edge_matrix(mesh);
        let u = p1.zero_field();
        assert!(matches!(
            u.eval_curl(0),
            Err(Error::WrongSpace { .. })
        ));
        assert!(matches!(
            em.zero_field().eval_vector(0, [0.25; 4]),
            Err(Error::WrongSpace { .. })
        ));
        assert!(matches!(
            u.eval_vector(999, [0.25; 4]),
            Err(Error::OutOfRange { .. })
        ));
    }
}
