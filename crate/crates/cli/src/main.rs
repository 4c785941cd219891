//! Command-line driver around the tensor-field toolkit: identity suites,
//! coercivity-constant estimation with refinement sweeps, the boundary-value
//! solvers and randomized inequality verification, plus VTK export.
//!
//! Exit codes: `0` success, `2` configuration error, `3` solver
//! non-convergence, `4` verification violation.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "korncurl",
    version,
    about = "Edge-element toolkit for incompatible tensor fields: coercivity constants, curl-curl and micro-distortion solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct MeshArgs {
    /// Domain shape.
    #[arg(long, default_value = "cube")]
    domain: String,
    /// Box extent `x,y,z` (cube domain only).
    #[arg(long, default_value = "1")]
    extent: String,
    /// Subdivisions per axis.
    #[arg(short = 'k', long, default_value_t = 2)]
    subdivisions: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-algebra identity suite and print a residual table.
    Identities {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Randomized inputs per identity.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Estimate the coercivity constant (eigenvalue path at p=2, ratio
    /// ascent otherwise); `--sweep` emits one record per level.
    Korn {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Boundary region carrying the tangential constraint.
        #[arg(long, default_value = "all")]
        region: String,
        /// Drop all constraints and report the numerical kernel instead.
        #[arg(long, default_value_t = false)]
        no_bc: bool,
        /// Refinement sweep `k1..k2` (overrides -k).
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, default_value_t = 1)]
        eigs: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// JSON Lines output path.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Summary CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve a boundary-value problem and optionally export VTK fields.
    Solve {
        #[command(subcommand)]
        problem: SolveProblem,
    },
    /// Randomized verification of the sampled inequality.
    Verify {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value = "all")]
        region: String,
        /// Sampling mode: random | compatible | skew.
        #[arg(long, default_value = "random")]
        mode: String,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 1e-8)]
        slack: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Export the mesh (cells plus labeled boundary faces) as legacy VTK.
    Mesh {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        vtk: PathBuf,
    },
}

#[derive(Subcommand)]
enum SolveProblem {
    /// Nonlinear curl-curl problem, `1 < p <= 2`.
    Pcurlcurl {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Quadratic term: `full` (identity on P) or `sym` (on sym P).
        #[arg(long, default_value = "full")]
        variant: String,
        /// Forcing amplitude of the built-in smooth right-hand side.
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        vtk: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Coupled displacement / micro-distortion equilibrium.
    Micromorphic {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Body force `fx,fy,fz` (or a single value, broadcast).
        #[arg(short = 'f', long, default_value = "0,0,1")]
        force: String,
        #[arg(long, default_value = "all")]
        region: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        vtk: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Static linear-hardening potential (same energy as `micromorphic`).
    Plasticity {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(short = 'f', long, default_value = "0,0,1")]
        force: String,
        #[arg(long, default_value = "all")]
        region: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        vtk: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

fn main() {
    // behave like a standard pipeline citizen: die silently on a closed pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Err(code) = run() {
        std::process::exit(code);
    }
}

fn run() -> Result<(), i32> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Identities { seed, samples } => commands::cmd_identities(seed, samples),
        Command::Korn {
            mesh,
            p,
            region,
            no_bc,
            sweep,
            eigs,
            restarts,
            tol,
            seed,
            records,
            csv,
        } => commands::cmd_korn(commands::KornArgs {
            mesh,
            p,
            region,
            no_bc,
            sweep,
            eigs,
            restarts,
            tol,
            seed,
            records,
            csv,
        }),
        Command::Solve { problem } => commands::cmd_solve(problem),
        Command::Verify {
            mesh,
            p,
            region,
            mode,
            samples,
            slack,
            tol,
            seed,
            records,
        } => commands::cmd_verify(commands::VerifyArgs {
            mesh,
            p,
            region,
            mode,
            samples,
            slack,
            tol,
            seed,
            records,
        }),
        Command::Mesh { mesh, vtk } => commands::cmd_mesh(mesh, vtk),
    }
}

/// `KORN_CURL_THREADS` caps the worker-thread count.
fn configure_threads() -> Result<(), i32> {
    let Ok(raw) = std::env::var("KORN_CURL_THREADS") else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n >= 1 => n,
        _ => {
            eprintln!("config error: KORN_CURL_THREADS must be a positive integer, got `{raw}`");
            return Err(EXIT_CONFIG);
        }
    };
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: could not configure the thread pool: {e}");
            return Err(EXIT_CONFIG);
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n; // sequential build: the cap is trivially honored
    }
    Ok(())
}
