use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use facred_bench::workloads;
use facred_core::{
    build_extended_dual, run_facial_reduction, solve_conic_lp, solve_extended_dual, FraOptions,
    SolverOptions, Variant,
};

fn reduce(c: &mut Criterion) {
    let mut group = c.benchmark_group("reduce");
    for (name, p) in workloads() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &p, |b, p| {
            b.iter(|| run_facial_reduction(p, &FraOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn standard_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("ipm");
    for (name, p) in workloads() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &p, |b, p| {
            b.iter(|| solve_conic_lp(p, &SolverOptions::default()))
        });
    }
    group.finish();
}

fn extended(c: &mut Criterion) {
    let mut group = c.benchmark_group("extended_dual");
    group.sample_size(20);
    for (name, p) in workloads() {
        for variant in Variant::ALL {
            let prog = build_extended_dual(&p, variant, None).unwrap();
            group.bench_with_input(
                BenchmarkId::new(variant.to_string(), &name),
                &prog,
                |b, prog| b.iter(|| solve_extended_dual(prog, &FraOptions::default())),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, reduce, standard_solve, extended);
criterion_main!(benches);
