//! Criterion benches of the data-parallel hot paths, comparing a
//! single-worker pool against the default pool.
//!
//! With the default `parallel` feature the two arms exercise the rayon path
//! at 1 and N workers; building with `--no-default-features` compiles the
//! sequential fallback, and both arms then measure identical code (results
//! are bit-identical either way).

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use std::sync::Arc;

use korn_curl::fespace::FeSpace;
use korn_curl::forms::{assemble_mass, assemble_sym_mass, p_functional_gradient, FieldPart};
use korn_curl::korn::{verify_inequality_sample, KornOperator, SampleMode};
use korn_curl::mesh::{Mesh, RegionLabel};
use korn_curl::tensor3::{anti, Vec3};

fn with_workers<R>(workers: usize, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("pool")
        .install(f)
}

fn num_workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn bench_assembly(c: &mut Criterion) {
    let mesh = Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 5));
    let space = FeSpace::edge_matrix(mesh);
    let mut group = c.benchmark_group("assemble_sym_mass_k5");
    for workers in [1usize, num_workers()] {
        group.bench_function(format!("{workers}_workers"), |b| {
            b.iter(|| with_workers(workers, || black_box(assemble_sym_mass(&space).unwrap())))
        });
    }
    group.finish();
}

fn bench_p_gradient(c: &mut Criterion) {
    let mesh = Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 5));
    let space = FeSpace::edge_matrix(mesh);
    let field = space
        .interpolate_matrix(|x| anti(Vec3::new(x.0[2], -x.0[0], 0.3 * x.0[1])))
        .unwrap();
    let mut group = c.benchmark_group("p_gradient_k5_p1.5");
    for workers in [1usize, num_workers()] {
        group.bench_function(format!("{workers}_workers"), |b| {
            b.iter(|| {
                with_workers(workers, || {
                    black_box(p_functional_gradient(&field, 1.5, FieldPart::Sym, 1e-10).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn bench_matvec(c: &mut Criterion) {
    let mesh = Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 6));
    let space = FeSpace::edge_matrix(mesh);
    let mass = assemble_mass(&space).unwrap().matrix;
    let x = vec![1.0; mass.n_cols()];
    let mut y = vec![0.0; mass.n_rows()];
    let mut group = c.benchmark_group("mass_matvec_k6");
    for workers in [1usize, num_workers()] {
        group.bench_function(format!("{workers}_workers"), |b| {
            b.iter(|| with_workers(workers, || mass.mul_vec_into(black_box(&x), &mut y)))
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let mesh = Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 2));
    let op = KornOperator::new(&mesh, Some(RegionLabel::Boundary)).unwrap();
    let mut group = c.benchmark_group("verify_500_samples_k2");
    group.sample_size(10);
    for workers in [1usize, num_workers()] {
        group.bench_function(format!("{workers}_workers"), |b| {
            b.iter(|| {
                with_workers(workers, || {
                    black_box(
                        verify_inequality_sample(
                            &op,
                            1.35,
                            2.0,
                            SampleMode::Random,
                            500,
                            9,
                            1e-8,
                        )
                        .unwrap(),
                    )
                })
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_assembly,
    bench_p_gradient,
    bench_matvec,
    bench_sampling
);
criterion_main!(benches);
