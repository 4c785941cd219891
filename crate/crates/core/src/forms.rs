//! Quadrature and assembly of all bilinear/linear forms, and evaluation of
//! the nonlinear p-functionals with their gradients.
//!
//! Quadratic forms (mass, sym-mass, curl-curl, the coupled blocks, loads)
//! use a degree-2-exact 4-point rule: their integrands are polynomials of
//! degree <= 2, so assembly is exact. The p-functionals at `p != 2` use a
//! degree-5-exact 15-point rule.
//!
//! Assembly computes per-cell dense blocks in parallel and scatters them
//! into a precomputed CSR pattern in cell order, so results are bit-identical
//! for any worker count.

use std::f64::consts::SQRT_2;

use crate::fespace::{CellEdgeBasis, FeSpace, FieldDofs, SpaceKind};
use crate::linalg::{CsrBuilder, CsrMatrix};
use crate::mesh::Mesh;
use crate::par;
use crate::tensor3::{Mat3, Vec3};
use crate::{Error, Result};

/// Quadrature rule on the reference tetrahedron in barycentric coordinates;
/// weights sum to one and are scaled by the cell volume at use sites.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// 4-point rule, exact for polynomials of total degree <= 2.
    pub fn tet_degree2() -> QuadratureRule {
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        let mut points = Vec::with_capacity(4);
        for i in 0..4 {
            let mut p = [b; 4];
            p[i] = a;
            points.push(p);
        }
        QuadratureRule {
            points,
            weights: vec![0.25; 4],
        }
    }

    /// 15-point rule, exact for polynomials of total degree <= 5.
    pub fn tet_degree5() -> QuadratureRule {
        let s15 = 15.0_f64.sqrt();
        let mut points = vec![[0.25; 4]];
        let mut weights = vec![16.0 / 135.0];
        for (a, w) in [
            ((7.0 - s15) / 34.0, (2665.0 + 14.0 * s15) / 37800.0),
            ((7.0 + s15) / 34.0, (2665.0 - 14.0 * s15) / 37800.0),
        ] {
            for i in 0..4 {
                let mut p = [a; 4];
                p[i] = 1.0 - 3.0 * a;
                points.push(p);
                weights.push(w);
            }
        }
        let a = (5.0 - s15) / 20.0;
        let b = (5.0 + s15) / 20.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let mut p = [a; 4];
                p[i] = b;
                p[j] = b;
                points.push(p);
                weights.push(10.0 / 189.0);
            }
        }
        QuadratureRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points_weights(&self) -> impl Iterator<Item = (&[f64; 4], &f64)> {
        self.points.iter().zip(self.weights.iter())
    }
}

/// 2-point Gauss rule on `[0, 1]` (parameter, weight); exact through cubics.
pub fn edge_gauss2() -> [(f64, f64); 2] {
    let d = 1.0 / (2.0 * 3.0_f64.sqrt());
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

/// An assembled bilinear form together with its verified symmetry flag.
#[derive(Debug, Clone)]
pub struct AssembledForm {
    pub matrix: CsrMatrix,
    /// True when the assembled matrix deviates from its transpose by less
    /// than 1e-12 in the max norm (checked at assembly).
    pub symmetric: bool,
}

impl AssembledForm {
    fn checked(matrix: CsrMatrix) -> AssembledForm {
        let symmetric = matrix.max_asymmetry() < 1e-12;
        AssembledForm { matrix, symmetric }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matrix.quadratic_form(x)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.matrix.max_asymmetry()
    }
}

fn require_edge_space(space: &FeSpace) -> Result<()> {
    if space.kind() != SpaceKind::EdgeMatrix {
        return Err(Error::WrongSpace {
            expected: "edge-matrix",
            got: "vector-P1",
        });
    }
    Ok(())
}

/// Per-cell DOF footprint of the edge-matrix space.
fn edge_cell_dofs(mesh: &Mesh, cell: usize) -> Vec<usize> {
    mesh.cell_edges[cell]
        .iter()
        .flat_map(|&(e, _)| (0..3).map(move |r| 3 * e + r))
        .collect()
}

fn p1_cell_dofs(mesh: &Mesh, cell: usize) -> Vec<usize> {
    mesh.cells[cell]
        .iter()
        .flat_map(|&v| (0..3).map(move |c| 3 * v + c))
        .collect()
}

/// Kind of local integrand for the three quadratic edge-space forms.
#[derive(Clone, Copy)]
enum EdgeFormKind {
    Mass,
    SymMass,
    CurlCurl,
}

fn assemble_edge_form(space: &FeSpace, kind: EdgeFormKind) -> Result<AssembledForm> {
    require_edge_space(space)?;
    let mesh = space.mesh().as_ref();
    let n = space.dof_count();
    let rule = QuadratureRule::tet_degree2();

    // local 18x18 blocks, computed per cell in parallel
    let locals: Vec<[f64; 18 * 18]> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        let basis = CellEdgeBasis::new(mesh, cell);
        let mut local = [0.0f64; 18 * 18];
        match kind {
            EdgeFormKind::CurlCurl => {
                // curls are constant; rows only couple within themselves
                for k in 0..6 {
                    for l in 0..6 {
                        let cc = basis.curls[k].dot(basis.curls[l]) * vol;
                        for r in 0..3 {
                            local[(3 * k + r) * 18 + (3 * l + r)] += cc;
                        }
                    }
                }
            }
            EdgeFormKind::Mass | EdgeFormKind::SymMass => {
                for (bary, w) in rule.points_weights() {
                    let vals = basis.values(mesh, cell, *bary);
                    let scale = w * vol;
                    for k in 0..6 {
                        for l in 0..6 {
                            let uv = vals[k].dot(vals[l]);
                            match kind {
                                EdgeFormKind::Mass => {
                                    for r in 0..3 {
                                        local[(3 * k + r) * 18 + (3 * l + r)] += scale * uv;
                                    }
                                }
                                EdgeFormKind::SymMass => {
                                    // <sym(e_r ⊗ u), sym(e_s ⊗ v)>
                                    //   = (δ_rs <u,v> + u_s v_r) / 2
                                    for r in 0..3 {
                                        for s in 0..3 {
                                            let mut v = vals[k].0[s] * vals[l].0[r];
                                            if r == s {
                                                v += uv;
                                            }
                                            local[(3 * k + r) * 18 + (3 * l + s)] +=
                                                scale * 0.5 * v;
                                        }
                                    }
                                }
                                EdgeFormKind::CurlCurl => unreachable!(),
                            }
                        }
                    }
                }
            }
        }
        local
    });

    let mut builder = CsrBuilder::from_elements(
        n,
        n,
        (0..mesh.cell_count()).map(|c| edge_cell_dofs(mesh, c)),
    );
    for (cell, local) in locals.iter().enumerate() {
        let dofs = edge_cell_dofs(mesh, cell);
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                let v = local[i * 18 + j];
                if v != 0.0 {
                    builder.add(gi, gj, v);
                }
            }
        }
    }
    Ok(AssembledForm::checked(builder.finish()))
}

/// `∫ <P, Q> dx` on the edge-matrix space (SPD).
pub fn assemble_mass(space: &FeSpace) -> Result<AssembledForm> {
    assemble_edge_form(space, EdgeFormKind::Mass)
}

/// `∫ <sym P, sym Q> dx` (symmetric positive semidefinite).
pub fn assemble_sym_mass(space: &FeSpace) -> Result<AssembledForm> {
    assemble_edge_form(space, EdgeFormKind::SymMass)
}

/// `∫ <Curl P, Curl Q> dx` (symmetric positive semidefinite).
pub fn assemble_curl_curl(space: &FeSpace) -> Result<AssembledForm> {
    assemble_edge_form(space, EdgeFormKind::CurlCurl)
}

/// The symmetric block system of the coupled displacement/micro-distortion
/// energy: second variation of
/// `∫ |sym(∇u - P)|²/2 + |sym P|²/2 + |Curl P|²/2`.
///
/// `a_uu = ∫<sym ∇u, sym ∇v>`, `a_up = -∫<sym ∇u, sym Q>`,
/// `a_pp = 2 ∫<sym P, sym Q> + ∫<Curl P, Curl Q>`.
pub struct MicromorphicBlocks {
    pub a_uu: CsrMatrix,
    pub a_up: CsrMatrix,
    pub a_pp: CsrMatrix,
}

pub fn assemble_micromorphic_blocks(
    u_space: &FeSpace,
    p_space: &FeSpace,
) -> Result<MicromorphicBlocks> {
    if u_space.kind() != SpaceKind::VectorP1 || p_space.kind() != SpaceKind::EdgeMatrix {
        return Err(Error::WrongSpace {
            expected: "vector-P1 and edge-matrix",
            got: "mismatched kinds",
        });
    }
    if !u_space.same_mesh(p_space) {
        return Err(Error::MeshMismatch);
    }
    let mesh = u_space.mesh().as_ref();
    let nu = u_space.dof_count();
    let np = p_space.dof_count();
    let rule = QuadratureRule::tet_degree2();

    struct Local {
        uu: [f64; 12 * 12],
        up: [f64; 12 * 18],
    }
    let locals: Vec<Local> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        let g = &mesh.geometry[cell].grad_bary;
        let basis = CellEdgeBasis::new(mesh, cell);
        let mut uu = [0.0f64; 12 * 12];
        let mut up = [0.0f64; 12 * 18];
        // <sym(e_r ⊗ gv), sym(e_s ⊗ gw)> = (δ_rs <gv,gw> + gv_s gw_r)/2,
        // constant per cell
        for vi in 0..4 {
            for wj in 0..4 {
                let gg = g[vi].dot(g[wj]);
                for r in 0..3 {
                    for s in 0..3 {
                        let mut v = g[vi].0[s] * g[wj].0[r];
                        if r == s {
                            v += gg;
                        }
                        uu[(3 * vi + r) * 12 + (3 * wj + s)] += 0.5 * vol * v;
                    }
                }
            }
        }
        for (bary, w) in rule.points_weights() {
            let vals = basis.values(mesh, cell, *bary);
            let scale = w * vol;
            for vi in 0..4 {
                for l in 0..6 {
                    let gv = g[vi];
                    let wl = vals[l];
                    let gw = gv.dot(wl);
                    for r in 0..3 {
                        for s in 0..3 {
                            let mut v = gv.0[s] * wl.0[r];
                            if r == s {
                                v += gw;
                            }
                            up[(3 * vi + r) * 18 + (3 * l + s)] -= scale * 0.5 * v;
                        }
                    }
                }
            }
        }
        Local { uu, up }
    });

    let mut b_uu = CsrBuilder::from_elements(
        nu,
        nu,
        (0..mesh.cell_count()).map(|c| p1_cell_dofs(mesh, c)),
    );
    // rectangular coupling block: pattern needs both footprints per element
    let mut b_up_rows: Vec<Vec<usize>> = vec![Vec::new(); nu];
    for cell in 0..mesh.cell_count() {
        let udofs = p1_cell_dofs(mesh, cell);
        let pdofs = edge_cell_dofs(mesh, cell);
        for &i in &udofs {
            b_up_rows[i].extend_from_slice(&pdofs);
        }
    }
    let mut b_up = CsrBuilder::from_rows(nu, np, b_up_rows);
    for (cell, local) in locals.iter().enumerate() {
        let udofs = p1_cell_dofs(mesh, cell);
        let pdofs = edge_cell_dofs(mesh, cell);
        for (i, &gi) in udofs.iter().enumerate() {
            for (j, &gj) in udofs.iter().enumerate() {
                let v = local.uu[i * 12 + j];
                if v != 0.0 {
                    b_uu.add(gi, gj, v);
                }
            }
            for (j, &gj) in pdofs.iter().enumerate() {
                let v = local.up[i * 18 + j];
                if v != 0.0 {
                    b_up.add(gi, gj, v);
                }
            }
        }
    }
    let sym = assemble_sym_mass(p_space)?.matrix;
    let curl = assemble_curl_curl(p_space)?.matrix;
    let a_pp = sym.add_scaled(2.0, &curl, 1.0)?;
    Ok(MicromorphicBlocks {
        a_uu: b_uu.finish(),
        a_up: b_up.finish(),
        a_pp,
    })
}

/// Scalar `P1` stiffness with homogeneous Dirichlet rows eliminated; the
/// Riesz map behind the discrete negative-order norms (applied per matrix
/// component).
pub struct DirichletP1Stiffness {
    /// Interior-vertex scalar Laplacian.
    pub matrix: CsrMatrix,
    /// Interior vertex ids, ascending.
    pub interior: Vec<usize>,
    /// Vertex id -> interior index.
    pub vertex_index: Vec<Option<usize>>,
}

pub fn assemble_p1_dirichlet_stiffness(mesh: &Mesh) -> DirichletP1Stiffness {
    let boundary: std::collections::BTreeSet<usize> = mesh
        .boundary_faces
        .iter()
        .flat_map(|f| f.vertices)
        .collect();
    let mut interior = Vec::new();
    let mut vertex_index = vec![None; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        if !boundary.contains(&v) {
            vertex_index[v] = Some(interior.len());
            interior.push(v);
        }
    }
    let n = interior.len();
    let elements = (0..mesh.cell_count()).map(|c| {
        mesh.cells[c]
            .iter()
            .filter_map(|&v| vertex_index[v])
            .collect::<Vec<_>>()
    });
    let mut builder = CsrBuilder::from_elements(n, n, elements);
    for cell in 0..mesh.cell_count() {
        let vol = mesh.cell_volume(cell);
        let g = &mesh.geometry[cell].grad_bary;
        let verts = mesh.cells[cell];
        for i in 0..4 {
            let Some(ii) = vertex_index[verts[i]] else {
                continue;
            };
            for j in 0..4 {
                let Some(jj) = vertex_index[verts[j]] else {
                    continue;
                };
                builder.add(ii, jj, vol * g[i].dot(g[j]));
            }
        }
    }
    DirichletP1Stiffness {
        matrix: builder.finish(),
        interior,
        vertex_index,
    }
}

/// Block-diagonal expansion of the scalar Dirichlet stiffness over matrix
/// components: the vector Laplacian acting on componentwise-`P1` test
/// tensors.
pub fn h1_matrix_stiffness(p1: &DirichletP1Stiffness, components: usize) -> AssembledForm {
    let n = p1.matrix.n_rows();
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; n * components]; n * components];
    let dense = p1.matrix.to_dense();
    for c in 0..components {
        for i in 0..n {
            for j in 0..n {
                rows[c * n + i][c * n + j] = dense[i][j];
            }
        }
    }
    AssembledForm::checked(CsrMatrix::from_dense(&rows))
}

/// Full scalar `P1` mass matrix (all vertices).
pub fn assemble_p1_scalar_mass(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.vertex_count();
    let rule = QuadratureRule::tet_degree2();
    let elements = (0..mesh.cell_count()).map(|c| mesh.cells[c].to_vec());
    let mut builder = CsrBuilder::from_elements(n, n, elements);
    for cell in 0..mesh.cell_count() {
        let vol = mesh.cell_volume(cell);
        let verts = mesh.cells[cell];
        for (bary, w) in rule.points_weights() {
            for i in 0..4 {
                for j in 0..4 {
                    builder.add(verts[i], verts[j], w * vol * bary[i] * bary[j]);
                }
            }
        }
    }
    builder.finish()
}

/// Load vector `∫ <f, v> dx` against the vector `P1` basis.
pub fn assemble_p1_load(space: &FeSpace, f: impl Fn(Vec3) -> Vec3 + Sync) -> Result<Vec<f64>> {
    if space.kind() != SpaceKind::VectorP1 {
        return Err(Error::WrongSpace {
            expected: "vector-P1",
            got: "edge-matrix",
        });
    }
    let mesh = space.mesh().as_ref();
    let rule = QuadratureRule::tet_degree2();
    let locals: Vec<[f64; 12]> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        let mut local = [0.0f64; 12];
        for (bary, w) in rule.points_weights() {
            let x = mesh.point_in_cell(cell, *bary);
            let fx = f(x);
            for vi in 0..4 {
                for r in 0..3 {
                    local[3 * vi + r] += w * vol * fx.0[r] * bary[vi];
                }
            }
        }
        local
    });
    let mut out = vec![0.0; space.dof_count()];
    for (cell, local) in locals.iter().enumerate() {
        let verts = mesh.cells[cell];
        for vi in 0..4 {
            for r in 0..3 {
                out[3 * verts[vi] + r] += local[3 * vi + r];
            }
        }
    }
    Ok(out)
}

/// Load vector `∫ <F, Q> dx` against the edge-matrix basis.
pub fn assemble_edge_load(space: &FeSpace, f: impl Fn(Vec3) -> Mat3 + Sync) -> Result<Vec<f64>> {
    require_edge_space(space)?;
    let mesh = space.mesh().as_ref();
    let rule = QuadratureRule::tet_degree2();
    let locals: Vec<[f64; 18]> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        let basis = CellEdgeBasis::new(mesh, cell);
        let mut local = [0.0f64; 18];
        for (bary, w) in rule.points_weights() {
            let x = mesh.point_in_cell(cell, *bary);
            let fx = f(x);
            let vals = basis.values(mesh, cell, *bary);
            for k in 0..6 {
                for r in 0..3 {
                    local[3 * k + r] += w * vol * fx.row(r).dot(vals[k]);
                }
            }
        }
        local
    });
    let mut out = vec![0.0; space.dof_count()];
    for (cell, local) in locals.iter().enumerate() {
        let basis = &mesh.cell_edges[cell];
        for (k, &(e, _)) in basis.iter().enumerate() {
            for r in 0..3 {
                out[3 * e + r] += local[3 * k + r];
            }
        }
    }
    Ok(out)
}

/// Which pointwise tensor enters the p-functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPart {
    Full,
    Sym,
    Curl,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidP(p));
    }
    Ok(())
}

fn part_rule(p: f64) -> QuadratureRule {
    if p == 2.0 {
        QuadratureRule::tet_degree2()
    } else {
        QuadratureRule::tet_degree5()
    }
}

/// `∫ (|T|² + eps²)^{p/2} dx` with `T` in `{P, sym P, Curl P}`; `eps = 0`
/// gives the plain p-th power of the pointwise norm.
pub fn p_functional(field: &FieldDofs, p: f64, part: FieldPart, eps: f64) -> Result<f64> {
    check_p(p)?;
    require_edge_space(field.space())?;
    let mesh = field.space().mesh().as_ref();
    let rule = part_rule(p);
    let partials: Vec<f64> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        match part {
            FieldPart::Curl => {
                let c = field.eval_curl(cell).expect("edge space checked");
                let tsq = c.inner(&c) + eps * eps;
                vol * tsq.powf(0.5 * p)
            }
            FieldPart::Full | FieldPart::Sym => {
                let mut acc = 0.0;
                for (bary, w) in rule.points_weights() {
                    let m = field.eval_matrix(cell, *bary).expect("edge space checked");
                    let t = if part == FieldPart::Sym { m.sym() } else { m };
                    let tsq = t.inner(&t) + eps * eps;
                    acc += w * vol * tsq.powf(0.5 * p);
                }
                acc
            }
        }
    });
    Ok(partials.iter().sum())
}

/// Gradient of [`p_functional`] with respect to the DOFs, exact for the
/// eps-regularized integrand (up to the quadrature of the rule in use).
pub fn p_functional_gradient(
    field: &FieldDofs,
    p: f64,
    part: FieldPart,
    eps: f64,
) -> Result<Vec<f64>> {
    check_p(p)?;
    require_edge_space(field.space())?;
    let mesh = field.space().mesh().as_ref();
    let rule = part_rule(p);
    let locals: Vec<[f64; 18]> = par::map_indexed(mesh.cell_count(), |cell| {
        let vol = mesh.cell_volume(cell);
        let basis = CellEdgeBasis::new(mesh, cell);
        let mut local = [0.0f64; 18];
        match part {
            FieldPart::Curl => {
                let c = field.eval_curl(cell).expect("edge space checked");
                let tsq = c.inner(&c) + eps * eps;
                if tsq > 0.0 {
                    let scale = vol * p * tsq.powf(0.5 * p - 1.0);
                    for k in 0..6 {
                        for r in 0..3 {
                            local[3 * k + r] = scale * c.row(r).dot(basis.curls[k]);
                        }
                    }
                }
            }
            FieldPart::Full | FieldPart::Sym => {
                for (bary, w) in rule.points_weights() {
                    let m = field.eval_matrix(cell, *bary).expect("edge space checked");
                    let t = if part == FieldPart::Sym { m.sym() } else { m };
                    let tsq = t.inner(&t) + eps * eps;
                    if tsq <= 0.0 {
                        continue;
                    }
                    let scale = w * vol * p * tsq.powf(0.5 * p - 1.0);
                    let vals = basis.values(mesh, cell, *bary);
                    for k in 0..6 {
                        for r in 0..3 {
                            // <T, sym(e_r ⊗ w)> = <T, e_r ⊗ w> for symmetric T
                            local[3 * k + r] += scale * t.row(r).dot(vals[k]);
                        }
                    }
                }
            }
        }
        local
    });
    let mut out = vec![0.0; field.space().dof_count()];
    for (cell, local) in locals.iter().enumerate() {
        for (k, &(e, _)) in mesh.cell_edges[cell].iter().enumerate() {
            for r in 0..3 {
                out[3 * e + r] += local[3 * k + r];
            }
        }
    }
    Ok(out)
}

/// `sqrt(2)` shows up when converting between combined-quadratic and
/// sum-of-norms right-hand sides; kept here so reports can document it.
pub const NORM_SPLIT_FACTOR_P2: f64 = SQRT_2;
