//! Command implementations. Every command validates its configuration
//! before any compute, so invalid configs never produce partial output
//! files.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use korn_curl::korn::{
    korn_constant_p2_for, korn_ratio_maximize_p, verify_inequality_sample, KornOperator,
    RatioAscentOptions, SampleMode,
};
use korn_curl::mesh::{Mesh, RegionLabel};
use korn_curl::solvers::{
    solve_micromorphic, solve_pcurlcurl, solve_plasticity_static, PcurlOptions, PcurlVariant,
    TensorForcing, VectorForcing,
};
use korn_curl::tensor3::{
    anti, axl, axl_gradient_from_curl, check_observation_2_1, curl_from_axl_gradient,
    mat_cross_vec, product_identity, second_derivative_identity_residual, Mat3,
    QuadraticDisplacement, Vec3,
};
use korn_curl::vtk;
use korn_curl::Error;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    parse_sweep, parse_triple, Domain, RecordWriter, ResultRecord, RunConfig,
};
use crate::{MeshArgs, SolveProblem, EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_VIOLATION};

fn config_error(msg: &str) -> i32 {
    eprintln!("config error: {msg}");
    EXIT_CONFIG
}

fn map_solver_error(e: Error) -> i32 {
    match e {
        Error::NoConvergence { .. } => {
            eprintln!("solver error: {e}");
            EXIT_NO_CONVERGENCE
        }
        other => config_error(&other.to_string()),
    }
}

struct MeshSetup {
    mesh: Arc<Mesh>,
    domain: Domain,
    extent: [f64; 3],
    subdivisions: usize,
}

fn build_mesh(args: &MeshArgs, subdivisions: usize) -> Result<MeshSetup, i32> {
    if subdivisions < 1 {
        return Err(config_error("subdivisions must be >= 1"));
    }
    let domain = Domain::parse(&args.domain)
        .ok_or_else(|| config_error(&format!("unknown domain `{}`", args.domain)))?;
    let extent = parse_triple(&args.extent).map_err(|e| config_error(&e))?;
    if extent.iter().any(|&v| !(v > 0.0)) {
        return Err(config_error("extent must be positive componentwise"));
    }
    let mesh = match domain {
        Domain::Cube => Arc::new(Mesh::box_mesh(Vec3(extent), subdivisions)),
        Domain::Lshape => Arc::new(Mesh::lshape_mesh(subdivisions)),
    };
    Ok(MeshSetup {
        mesh,
        domain,
        extent,
        subdivisions,
    })
}

fn parse_region(s: &str) -> Result<RegionLabel, i32> {
    RegionLabel::parse(s).ok_or_else(|| config_error(&format!("unknown region `{s}`")))
}

fn check_p(p: f64) -> Result<(), i32> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(config_error(&format!("p must satisfy p > 1, got {p}")));
    }
    Ok(())
}

pub fn cmd_identities(seed: u64, samples: usize) -> Result<(), i32> {
    if samples == 0 {
        return Err(config_error("samples must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rv = |rng: &mut ChaCha8Rng| {
        Vec3([
            4.0 * (rng.random::<f64>() - 0.5),
            4.0 * (rng.random::<f64>() - 0.5),
            4.0 * (rng.random::<f64>() - 0.5),
        ])
    };
    let mut residuals: Vec<(&str, f64)> = Vec::new();
    let mut max_products = 0.0f64;
    let mut max_roundtrip = 0.0f64;
    let mut max_curlinv = 0.0f64;
    let mut obs_agreement = true;
    let mut max_secder = 0.0f64;
    for _ in 0..samples {
        let a = rv(&mut rng);
        let b = rv(&mut rng);
        max_products = max_products.max(
            product_identity(a, b)
                .sub(&mat_cross_vec(&anti(a), b))
                .max_abs(),
        );
        max_roundtrip = max_roundtrip.max(axl(&anti(a)).expect("skew").sub(a).norm());
        let mut g = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                g.0[i][j] = rng.random::<f64>() - 0.5;
            }
        }
        max_curlinv = max_curlinv.max(
            axl_gradient_from_curl(&curl_from_axl_gradient(&g))
                .sub(&g)
                .max_abs(),
        );
        let (l, r) = check_observation_2_1(a, b);
        obs_agreement &= l == r;
        let u = QuadraticDisplacement::random(|| 4.0 * (rng.random::<f64>() - 0.5));
        max_secder = max_secder.max(second_derivative_identity_residual(&u));
    }
    residuals.push(("product identity (anti a) x b = b⊗a - <b,a> id", max_products));
    residuals.push(("anti/axl round trip", max_roundtrip));
    residuals.push(("curl <-> axl-gradient round trip", max_curlinv));
    residuals.push(("second-derivative representation", max_secder));
    println!("identity suite: {samples} randomized inputs, seed {seed}");
    let mut ok = obs_agreement;
    for (name, r) in &residuals {
        let status = if *r < 1e-12 { "ok" } else { "FAIL" };
        println!("  {name:<48} max residual {r:.3e}  [{status}]");
        ok &= *r < 1e-12;
    }
    println!(
        "  {:<48} {}  [{}]",
        "rank-one equivalence agreement",
        if obs_agreement { "agree" } else { "disagree" },
        if obs_agreement { "ok" } else { "FAIL" }
    );
    if ok {
        Ok(())
    } else {
        eprintln!("identity suite failed");
        Err(1)
    }
}

pub struct KornArgs {
    pub mesh: MeshArgs,
    pub p: f64,
    pub region: String,
    pub no_bc: bool,
    pub sweep: Option<String>,
    pub eigs: usize,
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
    pub records: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

pub fn cmd_korn(args: KornArgs) -> Result<(), i32> {
    check_p(args.p)?;
    let region = if args.no_bc {
        None
    } else {
        Some(parse_region(&args.region)?)
    };
    if args.no_bc && args.p != 2.0 {
        return Err(config_error("the unconstrained kernel run requires p = 2"));
    }
    let levels: Vec<usize> = match &args.sweep {
        Some(s) => {
            let (lo, hi) = parse_sweep(s).map_err(|e| config_error(&e))?;
            (lo..=hi).collect()
        }
        None => vec![args.mesh.subdivisions],
    };
    // the whole config is validated before any output file is created
    for &k in &levels {
        if k < 1 {
            return Err(config_error("subdivisions must be >= 1"));
        }
    }
    Domain::parse(&args.mesh.domain)
        .ok_or_else(|| config_error(&format!("unknown domain `{}`", args.mesh.domain)))?;
    let extent = parse_triple(&args.mesh.extent).map_err(|e| config_error(&e))?;
    if extent.iter().any(|&v| !(v > 0.0)) {
        return Err(config_error("extent must be positive componentwise"));
    }
    let mut writer = RecordWriter::create(args.records.as_ref(), args.csv.as_ref())
        .map_err(|e| config_error(&format!("cannot open output: {e}")))?;

    for &k in &levels {
        let setup = build_mesh(&args.mesh, k)?;
        let start = Instant::now();
        let op = KornOperator::new(&setup.mesh, region).map_err(map_solver_error)?;
        let config = RunConfig {
            command: "korn".into(),
            domain: setup.domain,
            extent: setup.extent,
            subdivisions: k,
            p: args.p,
            region: region.map_or("none".to_string(), |r| r.name().to_string()),
            tol: args.tol,
            seed: args.seed,
            restarts: args.restarts,
            eigs: args.eigs,
            samples: 0,
            mode: None,
            variant: None,
            force: None,
            slack: None,
        };
        let mut record = ResultRecord::new(config);
        if args.p == 2.0 {
            let est = korn_constant_p2_for(&op, args.eigs, args.tol, args.seed)
                .map_err(map_solver_error)?;
            record.lambda_min = est.lambda_min;
            record.constant = Some(est.constant);
            record.kernel_dim = est.kernel_dim;
            record.sum_form_factor = Some(est.sum_form_factor);
            record.iterations = est.iterations;
            match est.kernel_dim {
                Some(dim) => println!(
                    "k={k}: kernel dimension {dim}, spectrum {:?}",
                    &est.eigenvalues[..est.eigenvalues.len().min(5)]
                ),
                None => println!(
                    "k={k}: lambda_min = {:.8e}, constant = {:.8} (x {:.4} against the sum form)",
                    est.lambda_min.unwrap_or(f64::NAN),
                    est.constant,
                    est.sum_form_factor
                ),
            }
        } else {
            let opts = RatioAscentOptions {
                restarts: args.restarts,
                seed: args.seed,
                ..Default::default()
            };
            let est =
                korn_ratio_maximize_p(&op, args.p, &opts, None).map_err(map_solver_error)?;
            record.ratio = Some(est.constant);
            record.constant = Some(est.constant);
            record.sum_form_factor = Some(est.sum_form_factor);
            record.iterations = est.iterations;
            println!(
                "k={k}: p={} best ratio = {:.8} over {} restarts (lower bound; x {:.4} against the sum form)",
                args.p, est.constant, args.restarts, est.sum_form_factor
            );
        }
        record.seconds = start.elapsed().as_secs_f64();
        if !record.all_finite() {
            return Err(config_error("non-finite scalar in the result record"));
        }
        writer
            .write(&record)
            .map_err(|e| config_error(&format!("cannot write records: {e}")))?;
    }
    writer
        .finish()
        .map_err(|e| config_error(&format!("cannot flush records: {e}")))?;
    Ok(())
}

pub fn cmd_solve(problem: SolveProblem) -> Result<(), i32> {
    match problem {
        SolveProblem::Pcurlcurl {
            mesh,
            p,
            variant,
            amplitude,
            tol,
            vtk: vtk_path,
            records,
        } => {
            check_p(p)?;
            if p > 2.0 {
                return Err(config_error("the curl-curl problem requires 1 < p <= 2"));
            }
            let variant_enum = match variant.as_str() {
                "full" => PcurlVariant::FullP,
                "sym" => PcurlVariant::SymP,
                other => return Err(config_error(&format!("unknown variant `{other}`"))),
            };
            let setup = build_mesh(&mesh, mesh.subdivisions)?;
            let mut writer = RecordWriter::create(records.as_ref(), None)
                .map_err(|e| config_error(&format!("cannot open output: {e}")))?;
            let start = Instant::now();
            let forcing =
                move |x: Vec3| anti(Vec3::new(x.0[2], -0.4 * x.0[0], 0.2)).scale(0.5 * amplitude);
            let (field, report) = solve_pcurlcurl(
                &setup.mesh,
                TensorForcing::Analytic(&forcing),
                p,
                variant_enum,
                tol,
                &PcurlOptions::default(),
            )
            .map_err(map_solver_error)?;
            println!(
                "pcurlcurl p={p} ({variant}): energy {:.8e}, residual {:.3e}, {} iterations, eps-delta {:.3e}",
                report.final_energy, report.residual_norm, report.iterations, report.continuation_delta
            );
            for n in &report.notes {
                println!("  note: {n}");
            }
            let config = RunConfig {
                command: "solve-pcurlcurl".into(),
                domain: setup.domain,
                extent: setup.extent,
                subdivisions: setup.subdivisions,
                p,
                region: "all".into(),
                tol,
                seed: 0,
                restarts: 0,
                eigs: 0,
                samples: 0,
                mode: None,
                variant: Some(variant),
                force: None,
                slack: None,
            };
            let mut record = ResultRecord::new(config);
            record.energy = Some(report.final_energy);
            record.residual = Some(report.residual_norm);
            record.continuation_delta = Some(report.continuation_delta);
            record.coercivity_lambda = report.coercivity_lambda;
            record.iterations = report.iterations;
            record.seconds = start.elapsed().as_secs_f64();
            writer
                .write(&record)
                .map_err(|e| config_error(&format!("cannot write records: {e}")))?;
            writer
                .finish()
                .map_err(|e| config_error(&format!("cannot flush records: {e}")))?;
            if let Some(path) = vtk_path {
                vtk::write_solution_vtk(&path, &setup.mesh, None, Some(&field))
                    .map_err(map_solver_error)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        SolveProblem::Micromorphic {
            mesh,
            force,
            region,
            tol,
            vtk: vtk_path,
            records,
        } => solve_coupled(mesh, force, region, tol, vtk_path, records, false),
        SolveProblem::Plasticity {
            mesh,
            force,
            region,
            tol,
            vtk: vtk_path,
            records,
        } => solve_coupled(mesh, force, region, tol, vtk_path, records, true),
    }
}

fn solve_coupled(
    mesh: MeshArgs,
    force: String,
    region: String,
    tol: f64,
    vtk_path: Option<PathBuf>,
    records: Option<PathBuf>,
    plasticity: bool,
) -> Result<(), i32> {
    let gamma = parse_region(&region)?;
    let f = parse_triple(&force).map_err(|e| config_error(&e))?;
    let setup = build_mesh(&mesh, mesh.subdivisions)?;
    let mut writer = RecordWriter::create(records.as_ref(), None)
        .map_err(|e| config_error(&format!("cannot open output: {e}")))?;
    let start = Instant::now();
    let forcing = VectorForcing::Constant(Vec3(f));
    let name = if plasticity { "plasticity" } else { "micromorphic" };
    let (u, p, report) = if plasticity {
        solve_plasticity_static(&setup.mesh, forcing, gamma, tol).map_err(map_solver_error)?
    } else {
        solve_micromorphic(&setup.mesh, forcing, gamma, tol).map_err(map_solver_error)?
    };
    let (ru, rp) = report.block_residuals.unwrap_or((0.0, 0.0));
    println!(
        "{name}: energy {:.8e}, block residuals ({:.3e}, {:.3e})",
        report.final_energy, ru, rp
    );
    for n in &report.notes {
        println!("  note: {n}");
    }
    let config = RunConfig {
        command: format!("solve-{name}"),
        domain: setup.domain,
        extent: setup.extent,
        subdivisions: setup.subdivisions,
        p: 2.0,
        region,
        tol,
        seed: 0,
        restarts: 0,
        eigs: 0,
        samples: 0,
        mode: None,
        variant: None,
        force: Some(f),
        slack: None,
    };
    let mut record = ResultRecord::new(config);
    record.energy = Some(report.final_energy);
    record.residual = Some(report.residual_norm);
    record.iterations = report.iterations;
    record.seconds = start.elapsed().as_secs_f64();
    writer
        .write(&record)
        .map_err(|e| config_error(&format!("cannot write records: {e}")))?;
    writer
        .finish()
        .map_err(|e| config_error(&format!("cannot flush records: {e}")))?;
    if let Some(path) = vtk_path {
        vtk::write_solution_vtk(&path, &setup.mesh, Some(&u), Some(&p))
            .map_err(map_solver_error)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub struct VerifyArgs {
    pub mesh: MeshArgs,
    pub p: f64,
    pub region: String,
    pub mode: String,
    pub samples: usize,
    pub slack: f64,
    pub tol: f64,
    pub seed: u64,
    pub records: Option<PathBuf>,
}

pub fn cmd_verify(args: VerifyArgs) -> Result<(), i32> {
    check_p(args.p)?;
    let region = parse_region(&args.region)?;
    let mode = SampleMode::parse(&args.mode)
        .ok_or_else(|| config_error(&format!("unknown mode `{}`", args.mode)))?;
    if args.samples == 0 {
        return Err(config_error("samples must be positive"));
    }
    let setup = build_mesh(&args.mesh, args.mesh.subdivisions)?;
    let mut writer = RecordWriter::create(args.records.as_ref(), None)
        .map_err(|e| config_error(&format!("cannot open output: {e}")))?;
    let start = Instant::now();
    let op = KornOperator::new(&setup.mesh, Some(region)).map_err(map_solver_error)?;
    let constant = if args.p == 2.0 {
        korn_constant_p2_for(&op, 1, args.tol, args.seed)
            .map_err(map_solver_error)?
            .constant
    } else {
        let opts = RatioAscentOptions {
            restarts: 10,
            seed: args.seed,
            ..Default::default()
        };
        korn_ratio_maximize_p(&op, args.p, &opts, None)
            .map_err(map_solver_error)?
            .constant
    };
    let check = verify_inequality_sample(
        &op,
        constant,
        args.p,
        mode,
        args.samples,
        args.seed,
        args.slack,
    )
    .map_err(map_solver_error)?;
    println!(
        "verify {} p={}: {} samples, {} violations, max ratio {:.6} vs constant {:.6}",
        mode.name(),
        args.p,
        check.samples,
        check.violations,
        check.max_ratio,
        constant
    );
    let config = RunConfig {
        command: "verify".into(),
        domain: setup.domain,
        extent: setup.extent,
        subdivisions: setup.subdivisions,
        p: args.p,
        region: args.region.clone(),
        tol: args.tol,
        seed: args.seed,
        restarts: 0,
        eigs: 0,
        samples: args.samples,
        mode: Some(mode.name().to_string()),
        variant: None,
        force: None,
        slack: Some(args.slack),
    };
    let mut record = ResultRecord::new(config);
    record.constant = Some(constant);
    record.violations = Some(check.violations);
    record.max_ratio = Some(check.max_ratio);
    record.mean_ratio = Some(check.mean_ratio);
    record.seconds = start.elapsed().as_secs_f64();
    writer
        .write(&record)
        .map_err(|e| config_error(&format!("cannot write records: {e}")))?;
    writer
        .finish()
        .map_err(|e| config_error(&format!("cannot flush records: {e}")))?;
    // violations are contractually zero at p = 2
    if args.p == 2.0 && check.violations > 0 {
        eprintln!("verification violated: {} of {} samples", check.violations, check.samples);
        return Err(EXIT_VIOLATION);
    }
    Ok(())
}

pub fn cmd_mesh(mesh: MeshArgs, vtk_path: PathBuf) -> Result<(), i32> {
    let setup = build_mesh(&mesh, mesh.subdivisions)?;
    vtk::write_mesh_vtk(&vtk_path, &setup.mesh)
        .map_err(|e| config_error(&format!("cannot write VTK: {e}")))?;
    println!(
        "wrote {} ({} vertices, {} cells, {} boundary faces)",
        vtk_path.display(),
        setup.mesh.vertex_count(),
        setup.mesh.cell_count(),
        setup.mesh.boundary_faces.len()
    );
    Ok(())
}
