//! The boundary-value solvers: the nonlinear curl-curl problems
//! `Curl(|Curl P|^{p-2} Curl P) + P = F` (and the `sym P` variant) through
//! regularized convex minimization, and the coupled displacement /
//! micro-distortion equilibrium, which shares one quadratic energy with the
//! static linear-hardening potential and reduces to a single SPD block
//! solve.

use std::sync::Arc;

use crate::fespace::{DofConstraints, FeSpace, FieldDofs};
use crate::forms::{
    assemble_curl_curl, assemble_edge_load, assemble_mass, assemble_micromorphic_blocks,
    assemble_p1_load, assemble_sym_mass, QuadratureRule,
};
use crate::korn::korn_constant_p2;
use crate::linalg::{
    assemble_symmetric_blocks, dot, norm2, CsrBuilder, CsrMatrix, SpdSolver,
};
use crate::mesh::{Mesh, RegionLabel};
use crate::par;
use crate::tensor3::{Mat3, Vec3};
use crate::{Error, Result};

/// Progress report of a minimization / linear solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_energy: f64,
    /// Energies of all accepted steps, nonincreasing across the whole run
    /// (continuation stages only shrink the regularized integrand).
    pub energy_history: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub backtracks: usize,
    /// Regularization path that was walked.
    pub continuation: Vec<f64>,
    /// Mass-norm distance between the final two continuation solutions.
    pub continuation_delta: f64,
    pub converged: bool,
    /// Smallest eigenvalue of the coercivity pencil, when the variant asks
    /// for the check.
    pub coercivity_lambda: Option<f64>,
    /// Per-block residuals of coupled solves (displacement, distortion).
    pub block_residuals: Option<(f64, f64)>,
    pub notes: Vec<String>,
}

impl SolveReport {
    fn new() -> SolveReport {
        SolveReport {
            final_energy: 0.0,
            energy_history: Vec::new(),
            residual_norm: 0.0,
            iterations: 0,
            backtracks: 0,
            continuation: Vec::new(),
            continuation_delta: 0.0,
            converged: false,
            coercivity_lambda: None,
            block_residuals: None,
            notes: Vec::new(),
        }
    }
}

/// Right-hand side of a tensor problem.
pub enum TensorForcing<'a> {
    Zero,
    /// `∫ <F, Q>` with a discrete field `F` in the same space.
    Field(&'a FieldDofs),
    /// `∫ <F(x), Q>` with an analytic field.
    Analytic(&'a (dyn Fn(Vec3) -> Mat3 + Sync)),
    /// A pre-assembled load vector over the full DOF layout.
    LoadVector(&'a [f64]),
}

/// Which quadratic term accompanies the curl energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcurlVariant {
    /// `(1/p)|Curl P|^p + |P|²/2 - <F,P>`.
    FullP,
    /// `(1/p)|Curl P|^p + |sym P|²/2 - <F,P>`; coercive through the
    /// tangential-trace estimate, which the report certifies by an
    /// eigenvalue check.
    SymP,
}

/// Solver knobs; the defaults implement the continuation/Newton scheme.
#[derive(Debug, Clone)]
pub struct PcurlOptions {
    pub eps_start: f64,
    pub eps_end: f64,
    pub max_newton_per_stage: usize,
    pub max_backtracks: usize,
    pub check_coercivity: bool,
}

impl Default for PcurlOptions {
    fn default() -> Self {
        PcurlOptions {
            eps_start: 1e-2,
            eps_end: 1e-10,
            max_newton_per_stage: 60,
            max_backtracks: 30,
            check_coercivity: true,
        }
    }
}

/// Curl-term energy, gradient and Hessian of the regularized integrand on
/// the constrained DOFs.
struct CurlTerm<'a> {
    mesh: &'a Mesh,
    space: &'a FeSpace,
    constraints: &'a DofConstraints,
    p: f64,
}

impl<'a> CurlTerm<'a> {
    fn energy(&self, field: &FieldDofs, eps: f64) -> f64 {
        let partials: Vec<f64> = par::map_indexed(self.mesh.cell_count(), |cell| {
            let c = field.eval_curl(cell).expect("edge field");
            let tsq = c.inner(&c) + eps * eps;
            self.mesh.cell_volume(cell) * tsq.powf(0.5 * self.p) / self.p
        });
        partials.iter().sum()
    }

    fn gradient(&self, field: &FieldDofs, eps: f64) -> Vec<f64> {
        let grad = crate::forms::p_functional_gradient(field, self.p, crate::forms::FieldPart::Curl, eps)
            .expect("edge field");
        // p_functional integrates |.|^p; the energy carries 1/p
        self.constraints
            .free_dofs()
            .iter()
            .map(|&d| grad[d] / self.p)
            .collect()
    }

    /// Assembles the (restricted) Hessian of the curl term at the current
    /// state: per cell
    /// `t^{p/2-2} [ (p-2) <C,Ci><C,Cj> + t <Ci,Cj> ]` with `t = |C|² + eps²`.
    fn hessian(&self, field: &FieldDofs, eps: f64) -> CsrMatrix {
        let mesh = self.mesh;
        let locals: Vec<[f64; 18 * 18]> = par::map_indexed(mesh.cell_count(), |cell| {
            let vol = mesh.cell_volume(cell);
            let basis = crate::fespace::CellEdgeBasis::new(mesh, cell);
            let c = field.eval_curl(cell).expect("edge field");
            let t = c.inner(&c) + eps * eps;
            let mut local = [0.0f64; 18 * 18];
            if t <= 0.0 {
                return local;
            }
            let t1 = t.powf(0.5 * self.p - 1.0);
            let t2 = (self.p - 2.0) * t.powf(0.5 * self.p - 2.0);
            // directional curls are e_r ⊗ curl_k
            let mut cdots = [0.0f64; 18];
            for k in 0..6 {
                for r in 0..3 {
                    cdots[3 * k + r] = c.row(r).dot(basis.curls[k]);
                }
            }
            for k in 0..6 {
                for l in 0..6 {
                    let cc = basis.curls[k].dot(basis.curls[l]);
                    for r in 0..3 {
                        for s in 0..3 {
                            let mut v = t2 * cdots[3 * k + r] * cdots[3 * l + s];
                            if r == s {
                                v += t1 * cc;
                            }
                            local[(3 * k + r) * 18 + (3 * l + s)] += vol * v;
                        }
                    }
                }
            }
            local
        });
        let n = self.space.dof_count();
        let mut builder = CsrBuilder::from_elements(
            n,
            n,
            (0..mesh.cell_count()).map(|c| {
                mesh.cell_edges[c]
                    .iter()
                    .flat_map(|&(e, _)| (0..3).map(move |r| 3 * e + r))
                    .collect::<Vec<_>>()
            }),
        );
        for (cell, local) in locals.iter().enumerate() {
            let dofs: Vec<usize> = mesh.cell_edges[cell]
                .iter()
                .flat_map(|&(e, _)| (0..3).map(move |r| 3 * e + r))
                .collect();
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    let v = local[i * 18 + j];
                    if v != 0.0 {
                        builder.add(gi, gj, v);
                    }
                }
            }
        }
        self.constraints.restrict_matrix(&builder.finish())
    }
}

/// Solves the regularized convex minimization of the curl-curl problem with
/// whole-boundary tangential constraints by continuation in the
/// regularization and damped Newton steps with an Armijo line search;
/// admissible exponents are `1 < p <= 2`.
pub fn solve_pcurlcurl(
    mesh: &Arc<Mesh>,
    forcing: TensorForcing<'_>,
    p: f64,
    variant: PcurlVariant,
    tol: f64,
    options: &PcurlOptions,
) -> Result<(FieldDofs, SolveReport)> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidP(p));
    }
    let space = FeSpace::edge_matrix(mesh.clone());
    let constraints = DofConstraints::eliminate(&space, RegionLabel::Boundary)?;
    let quad_full = match variant {
        PcurlVariant::FullP => assemble_mass(&space)?.matrix,
        PcurlVariant::SymP => assemble_sym_mass(&space)?.matrix,
    };
    let quad = constraints.restrict_matrix(&quad_full);

    let load_full: Vec<f64> = match forcing {
        TensorForcing::Zero => vec![0.0; space.dof_count()],
        TensorForcing::Field(f) => {
            if !f.space().same_mesh(&space) {
                return Err(Error::MeshMismatch);
            }
            assemble_mass(&space)?.matrix.mul_vec(&f.values)
        }
        TensorForcing::Analytic(f) => assemble_edge_load(&space, f)?,
        TensorForcing::LoadVector(b) => {
            if b.len() != space.dof_count() {
                return Err(Error::ShapeMismatch(
                    "load vector length must match the space".into(),
                ));
            }
            b.to_vec()
        }
    };
    let b = constraints.restrict_vec(&load_full);
    let b_norm = norm2(&b);

    let curl_term = CurlTerm {
        mesh: mesh.as_ref(),
        space: &space,
        constraints: &constraints,
        p,
    };
    let energy = |x: &[f64], eps: f64| -> f64 {
        let field = space.field_from_values(constraints.expand_vec(x));
        curl_term.energy(&field, eps) + 0.5 * quad.quadratic_form(x) - dot(&b, x)
    };
    let gradient = |x: &[f64], eps: f64| -> Vec<f64> {
        let field = space.field_from_values(constraints.expand_vec(x));
        let mut g = curl_term.gradient(&field, eps);
        let qx = quad.mul_vec(x);
        for i in 0..g.len() {
            g[i] += qx[i] - b[i];
        }
        g
    };

    // continuation path eps_start -> eps_end in factor-10 steps
    let mut eps_path = Vec::new();
    let mut e = options.eps_start;
    while e > options.eps_end * 1.000_001 {
        eps_path.push(e);
        e /= 10.0;
    }
    eps_path.push(options.eps_end);

    let mut report = SolveReport::new();
    report.continuation = eps_path.clone();
    let mut x = vec![0.0; constraints.n_free()];
    let mut previous_stage: Option<Vec<f64>> = None;
    let mut converged_all = true;

    for (stage, &eps) in eps_path.iter().enumerate() {
        let mut cur_energy = energy(&x, eps);
        report.energy_history.push(cur_energy);
        let mut stage_converged = false;
        for _newton in 0..options.max_newton_per_stage {
            let g = gradient(&x, eps);
            let gnorm = norm2(&g);
            if gnorm <= tol * (1.0 + b_norm) {
                stage_converged = true;
                break;
            }
            report.iterations += 1;
            let field = space.field_from_values(constraints.expand_vec(&x));
            let h_curl = curl_term.hessian(&field, eps);
            let hess = h_curl
                .add_scaled(1.0, &quad, 1.0)
                .unwrap_or_else(|_| h_curl.clone());
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let newton_dir = SpdSolver::new(&hess).and_then(|s| s.solve(&neg_g)).ok();
            let mut accepted = false;
            for dir in [newton_dir.clone(), Some(jacobi_direction(&hess, &neg_g))]
                .into_iter()
                .flatten()
            {
                let slope = dot(&g, &dir);
                if slope >= 0.0 {
                    continue;
                }
                let mut step = 1.0f64;
                for _bt in 0..options.max_backtracks {
                    let xn: Vec<f64> =
                        x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
                    let en = energy(&xn, eps);
                    if en <= cur_energy + 1e-4 * step * slope {
                        x = xn;
                        cur_energy = en;
                        report.energy_history.push(cur_energy);
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                    report.backtracks += 1;
                }
                if accepted {
                    break;
                }
            }
            if !accepted {
                // near the energy rounding floor the Armijo test cannot
                // resolve the predicted decrease; accept a full Newton step
                // that strictly shrinks the gradient instead
                if let Some(dir) = newton_dir {
                    let xn: Vec<f64> = x.iter().zip(&dir).map(|(&xi, &di)| xi + di).collect();
                    if norm2(&gradient(&xn, eps)) < 0.9 * gnorm {
                        cur_energy = energy(&xn, eps);
                        x = xn;
                        report.energy_history.push(cur_energy);
                        accepted = true;
                    }
                }
            }
            if !accepted {
                break;
            }
        }
        if !stage_converged {
            // the loop may have exited on the iteration budget
            let gnorm = norm2(&gradient(&x, eps));
            stage_converged = gnorm <= tol * (1.0 + b_norm);
            if !stage_converged {
                report
                    .notes
                    .push(format!("stage eps={eps:.1e} left gradient {gnorm:.3e}"));
            }
        }
        converged_all &= stage_converged;
        if stage + 2 == eps_path.len() {
            previous_stage = Some(x.clone());
        }
    }

    let final_eps = *eps_path.last().unwrap();
    report.residual_norm = norm2(&gradient(&x, final_eps));
    report.final_energy = energy(&x, final_eps);
    // the continuation stages are warm starts; the contract is the final
    // gradient norm
    report.converged = report.residual_norm <= tol * (1.0 + b_norm);
    if !converged_all {
        report
            .notes
            .push("an intermediate continuation stage exhausted its budget".into());
    }
    if let Some(prev) = previous_stage {
        let d: Vec<f64> = x.iter().zip(&prev).map(|(&a, &b)| a - b).collect();
        let mass_r = match variant {
            PcurlVariant::FullP => quad.clone(),
            PcurlVariant::SymP => constraints.restrict_matrix(&assemble_mass(&space)?.matrix),
        };
        report.continuation_delta = mass_r.quadratic_form(&d).max(0.0).sqrt();
    }
    if variant == PcurlVariant::SymP && options.check_coercivity {
        let est = korn_constant_p2(mesh, Some(RegionLabel::Boundary), 1, 1e-8, 7)?;
        let lam = est.lambda_min.unwrap_or(f64::NAN);
        report.coercivity_lambda = Some(lam);
        report
            .notes
            .push(format!("coercivity pencil smallest eigenvalue {lam:.6e}"));
    }
    if !report.converged {
        return Err(Error::NoConvergence {
            iterations: report.iterations,
            residual: report.residual_norm,
        });
    }
    Ok((
        space.field_from_values(constraints.expand_vec(&x)),
        report,
    ))
}

fn jacobi_direction(h: &CsrMatrix, neg_g: &[f64]) -> Vec<f64> {
    let d = h.diagonal();
    neg_g
        .iter()
        .zip(&d)
        .map(|(&g, &di)| if di > 0.0 { g / di } else { g })
        .collect()
}

/// Body force of the coupled solves.
pub enum VectorForcing<'a> {
    Zero,
    Constant(Vec3),
    Analytic(&'a (dyn Fn(Vec3) -> Vec3 + Sync)),
}

/// Minimizes the coupled energy
/// `∫ |sym(∇u - P)|²/2 + |sym P|²/2 + |Curl P|²/2 - <f, u>` with `u = 0` and
/// `P x ν = 0` on the Dirichlet region (the homogeneous-data case, where the
/// consistent tangential coupling reduces to a plain tangential constraint).
pub fn solve_micromorphic(
    mesh: &Arc<Mesh>,
    forcing: VectorForcing<'_>,
    gamma_d: RegionLabel,
    tol: f64,
) -> Result<(FieldDofs, FieldDofs, SolveReport)> {
    let u_space = FeSpace::vector_p1(mesh.clone());
    let p_space = FeSpace::edge_matrix(mesh.clone());
    let blocks = assemble_micromorphic_blocks(&u_space, &p_space)?;
    let u_bc = DofConstraints::eliminate(&u_space, gamma_d)?;
    let p_bc = DofConstraints::eliminate(&p_space, gamma_d)?;

    let load_full = match forcing {
        VectorForcing::Zero => vec![0.0; u_space.dof_count()],
        VectorForcing::Constant(c) => assemble_p1_load(&u_space, move |_| c)?,
        VectorForcing::Analytic(f) => assemble_p1_load(&u_space, f)?,
    };

    let a_uu = u_bc.restrict_matrix(&blocks.a_uu);
    let a_pp = p_bc.restrict_matrix(&blocks.a_pp);
    // rectangular block: restrict rows to free u, columns to free P
    let p_col_of: Vec<Option<usize>> = (0..p_space.dof_count())
        .map(|d| {
            p_bc.free_dofs()
                .binary_search(&d)
                .ok()
        })
        .collect();
    let a_up = blocks
        .a_up
        .restrict(u_bc.free_dofs(), &p_col_of, p_bc.n_free());
    let system = assemble_symmetric_blocks(&a_uu, &a_up, &a_pp)?;

    let nu = u_bc.n_free();
    let mut rhs = u_bc.restrict_vec(&load_full);
    rhs.extend(std::iter::repeat(0.0).take(p_bc.n_free()));

    let solver = SpdSolver::new(&system)?;
    let x = solver.solve(&rhs)?;

    let mut report = SolveReport::new();
    report.iterations = 1;
    report.final_energy = 0.5 * system.quadratic_form(&x) - dot(&rhs, &x);
    report.energy_history = vec![0.0, report.final_energy];
    let mut residual = system.mul_vec(&x);
    for (r, b) in residual.iter_mut().zip(&rhs) {
        *r -= b;
    }
    let res_u = norm2(&residual[..nu]);
    let res_p = norm2(&residual[nu..]);
    report.block_residuals = Some((res_u, res_p));
    report.residual_norm = norm2(&residual);
    let scale = 1.0 + norm2(&rhs);
    report.converged = res_u <= tol * scale && res_p <= tol * scale;
    if !report.converged {
        return Err(Error::NoConvergence {
            iterations: 1,
            residual: report.residual_norm,
        });
    }

    let u = u_space.field_from_values(u_bc.expand_vec(&x[..nu]));
    let p = p_space.field_from_values(p_bc.expand_vec(&x[nu..]));
    Ok((u, p, report))
}

/// The static linear-hardening potential has the same quadratic energy as
/// the coupled micro-distortion equilibrium; the solve delegates and the
/// report records the shared structure.
pub fn solve_plasticity_static(
    mesh: &Arc<Mesh>,
    forcing: VectorForcing<'_>,
    gamma_d: RegionLabel,
    tol: f64,
) -> Result<(FieldDofs, FieldDofs, SolveReport)> {
    let (u, p, mut report) = solve_micromorphic(mesh, forcing, gamma_d, tol)?;
    report.notes.push(
        "identical quadratic energy to the coupled equilibrium solve; shared kernel and solution"
            .into(),
    );
    Ok((u, p, report))
}

/// Weak-form residual of the balance of forces `Div(sym(∇u - P)) = f`: the
/// displacement block row of the solved system, reported as a norm.
pub fn balance_of_forces_residual(
    u: &FieldDofs,
    p: &FieldDofs,
    forcing: VectorForcing<'_>,
    gamma_d: RegionLabel,
) -> Result<f64> {
    let u_space = u.space();
    let p_space = p.space();
    if !u_space.same_mesh(p_space) {
        return Err(Error::MeshMismatch);
    }
    let blocks = assemble_micromorphic_blocks(u_space, p_space)?;
    let load_full = match forcing {
        VectorForcing::Zero => vec![0.0; u_space.dof_count()],
        VectorForcing::Constant(c) => assemble_p1_load(u_space, move |_| c)?,
        VectorForcing::Analytic(f) => assemble_p1_load(u_space, f)?,
    };
    let u_bc = DofConstraints::eliminate(u_space, gamma_d)?;
    let mut r = blocks.a_uu.mul_vec(&u.values);
    let cross = blocks.a_up.mul_vec(&p.values);
    for i in 0..r.len() {
        r[i] += cross[i] - load_full[i];
    }
    Ok(norm2(&u_bc.restrict_vec(&r)))
}

/// Builds the manufactured load for which a given constrained field is the
/// exact discrete solution of the `p = 2` full-variant problem:
/// `b = (mass + curl_curl) x*`.
pub fn manufactured_p2_load(target: &FieldDofs) -> Result<Vec<f64>> {
    let space = target.space();
    let mass = assemble_mass(space)?.matrix;
    let curl = assemble_curl_curl(space)?.matrix;
    let op = mass.add_scaled(1.0, &curl, 1.0)?;
    Ok(op.mul_vec(&target.values))
}

/// L2 distance of two discrete fields in one space (mass norm).
pub fn field_distance(a: &FieldDofs, b: &FieldDofs) -> Result<f64> {
    if !a.space().same_mesh(b.space()) {
        return Err(Error::MeshMismatch);
    }
    let mass = assemble_mass(a.space())?.matrix;
    let d: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| x - y)
        .collect();
    Ok(mass.quadratic_form(&d).max(0.0).sqrt())
}

/// Quadrature-evaluated coupled energy of explicit fields (used by tests and
/// refinement studies): `∫ |sym(∇u - P)|²/2 + |sym P|²/2 + |Curl P|²/2 -
/// <f, u>`.
pub fn coupled_energy(
    u: &FieldDofs,
    p: &FieldDofs,
    forcing: &VectorForcing<'_>,
) -> Result<f64> {
    if !u.space().same_mesh(p.space()) {
        return Err(Error::MeshMismatch);
    }
    let mesh = u.space().mesh().as_ref();
    let rule = QuadratureRule::tet_degree2();
    let mut acc = 0.0;
    for cell in 0..mesh.cell_count() {
        let vol = mesh.cell_volume(cell);
        let grad_u = u.eval_gradient(cell)?;
        let curl_p = p.eval_curl(cell)?;
        for (bary, w) in rule.points_weights() {
            let pm = p.eval_matrix(cell, *bary)?;
            let e = grad_u.sub(&pm).sym();
            let sp = pm.sym();
            let x = mesh.point_in_cell(cell, *bary);
            let f = match forcing {
                VectorForcing::Zero => Vec3::ZERO,
                VectorForcing::Constant(c) => *c,
                VectorForcing::Analytic(g) => g(x),
            };
            let uv = u.eval_vector(cell, *bary)?;
            acc += w
                * vol
                * (0.5 * e.inner(&e) + 0.5 * sp.inner(&sp) + 0.5 * curl_p.inner(&curl_p)
                    - f.dot(uv));
        }
    }
    Ok(acc)
}

/// Convenience: interpolates and constrains the standard manufactured
/// target field `anti((x3, 0, 0))` with zeroed boundary DOFs.
pub fn manufactured_target(mesh: &Arc<Mesh>) -> Result<FieldDofs> {
    let space = FeSpace::edge_matrix(mesh.clone());
    let mut f = space.interpolate_matrix(|x| crate::tensor3::anti(Vec3::new(x.0[2], 0.0, 0.0)))?;
    let bc = DofConstraints::eliminate(&space, RegionLabel::Boundary)?;
    bc.project_field(&mut f);
    Ok(f)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky_solve;

    fn cube(k: usize) -> Arc<Mesh> {
        Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), k))
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let mesh = cube(1);
        let (p, rep) = solve_pcurlcurl(
            &mesh,
            TensorForcing::Zero,
            2.0,
            PcurlVariant::FullP,
            1e-10,
            &PcurlOptions::default(),
        )
        .unwrap();
        assert!(p.values.iter().all(|&v| v.abs() < 1e-14));
        assert!(rep.final_energy.abs() < 1e-14);
        assert!(rep.converged);
    }

    #[test]
    fn p2_newton_matches_direct_linear_solve() {
        let mesh = cube(2);
        let target = manufactured_target(&mesh).unwrap();
        let b = manufactured_p2_load(&target).unwrap();
        let (p, rep) = solve_pcurlcurl(
            &mesh,
            TensorForcing::LoadVector(&b),
            2.0,
            PcurlVariant::FullP,
            1e-10,
            &PcurlOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        // direct solve oracle on the constrained system
        let space = FeSpace::edge_matrix(mesh.clone());
        let bc = DofConstraints::eliminate(&space, RegionLabel::Boundary).unwrap();
        let mass = assemble_mass(&space).unwrap().matrix;
        let curl = assemble_curl_curl(&space).unwrap().matrix;
        let opm = bc.restrict_matrix(&mass.add_scaled(1.0, &curl, 1.0).unwrap());
        let xr = cholesky_solve(&opm, &bc.restrict_vec(&b)).unwrap();
        let direct = space.field_from_values(bc.expand_vec(&xr));
        assert!(field_distance(&p, &direct).unwrap() < 1e-9);
        // and the manufactured field is recovered
        assert!(field_distance(&p, &target).unwrap() < 1e-8);
    }

    #[test]
    fn invalid_exponent_rejected() {
        let mesh = cube(1);
        for p in [1.0, 2.5, 0.5] {
            assert!(matches!(
                solve_pcurlcurl(
                    &mesh,
                    TensorForcing::Zero,
                    p,
                    PcurlVariant::FullP,
                    1e-8,
                    &PcurlOptions::default()
                ),
                Err(Error::InvalidP(_))
            ));
        }
    }

    #[test]
    fn p15_continuation_monotone_and_insensitive() {
        let mesh = cube(1);
        let forcing = |x: Vec3| {
            crate::tensor3::anti(Vec3::new(x.0[2], -x.0[0], 0.5)).scale(0.3)
        };
        let (_, rep) = solve_pcurlcurl(
            &mesh,
            TensorForcing::Analytic(&forcing),
            1.5,
            PcurlVariant::FullP,
            1e-9,
            &PcurlOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(
            rep.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12),
            "monotone energy"
        );
        assert!(rep.continuation_delta < 1e-6, "eps-insensitivity {}", rep.continuation_delta);
        assert_eq!(rep.continuation.len(), 9);
    }

    #[test]
    fn sym_variant_converges_with_coercivity_record() {
        let mesh = cube(1);
        let forcing = |x: Vec3| crate::tensor3::anti(Vec3::new(0.2, x.0[1], 0.0));
        let (_, rep) = solve_pcurlcurl(
            &mesh,
            TensorForcing::Analytic(&forcing),
            1.5,
            PcurlVariant::SymP,
            1e-9,
            &PcurlOptions::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert!(rep.coercivity_lambda.unwrap() > 0.0);
    }

    #[test]
    fn micromorphic_zero_force_zero_solution() {
        let mesh = cube(1);
        let (u, p, rep) =
            solve_micromorphic(&mesh, VectorForcing::Zero, RegionLabel::Boundary, 1e-10).unwrap();
        assert!(u.values.iter().all(|&v| v.abs() < 1e-12));
        assert!(p.values.iter().all(|&v| v.abs() < 1e-12));
        assert!(rep.final_energy.abs() < 1e-12);
    }

    #[test]
    fn micromorphic_constant_force_properties() {
        let mesh = cube(2);
        let (u, p, rep) = solve_micromorphic(
            &mesh,
            VectorForcing::Constant(Vec3::unit(2)),
            RegionLabel::Boundary,
            1e-9,
        )
        .unwrap();
        assert!(rep.final_energy < 0.0, "work is done: {}", rep.final_energy);
        let (ru, rp) = rep.block_residuals.unwrap();
        assert!(ru < 1e-9 && rp < 1e-9);
        // energy decreases from k=1 to k=2 (nested refinement)
        let mesh1 = cube(1);
        let (_, _, rep1) = solve_micromorphic(
            &mesh1,
            VectorForcing::Constant(Vec3::unit(2)),
            RegionLabel::Boundary,
            1e-9,
        )
        .unwrap();
        assert!(rep.final_energy <= rep1.final_energy + 1e-12);
        // quadrature energy agrees with the algebraic one
        let eq = coupled_energy(&u, &p, &VectorForcing::Constant(Vec3::unit(2))).unwrap();
        assert!((eq - rep.final_energy).abs() < 1e-10);
        // balance of forces in weak form
        let r = balance_of_forces_residual(
            &u,
            &p,
            VectorForcing::Constant(Vec3::unit(2)),
            RegionLabel::Boundary,
        )
        .unwrap();
        assert!(r < 1e-9);
    }

    #[test]
    fn plasticity_matches_micromorphic() {
        let mesh = cube(1);
        let f = VectorForcing::Constant(Vec3::new(0.3, -0.1, 1.0));
        let (u1, p1, _) =
            solve_micromorphic(&mesh, f, RegionLabel::Boundary, 1e-10).unwrap();
        let (u2, p2, rep) = solve_plasticity_static(
            &mesh,
            VectorForcing::Constant(Vec3::new(0.3, -0.1, 1.0)),
            RegionLabel::Boundary,
            1e-10,
        )
        .unwrap();
        let du: f64 = u1
            .values
            .iter()
            .zip(&u2.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        let dp: f64 = p1
            .values
            .iter()
            .zip(&p2.values)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        assert!(du < 1e-12 && dp < 1e-12);
        assert!(!rep.notes.is_empty());
    }
}
