use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use plap_core::eigensolver::{find_lambda1, ShootingOptions};
use plap_core::numerics::tridiag::SymTridiag;
use plap_core::radial::{build_grid, DiscreteModel, Grading, GridEigenPair, OuterBoundary};
use plap_core::variational::{minimize_on_slice, EnergyContext, HSpec, SliceOptions};
use plap_core::weights::RadialWeight;
use plap_core::Params;

fn model(p: f64, m: usize) -> Arc<DiscreteModel> {
    let params = Params::new(p, 3).unwrap();
    let grid = build_grid(200.0, m, Grading::Geometric, 3).unwrap();
    Arc::new(DiscreteModel::new(grid, RadialWeight::LinearR4, params, OuterBoundary::Tail).unwrap())
}

fn shooting(c: &mut Criterion) {
    let mut group = c.benchmark_group("shooting");
    for p in [1.5, 2.0, 2.5] {
        let params = Params::new(p, 3).unwrap();
        group.bench_with_input(BenchmarkId::new("find_lambda1", p), &params, |b, params| {
            b.iter(|| {
                find_lambda1(&RadialWeight::LinearR4, params, &ShootingOptions::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn tridiagonal(c: &mut Criterion) {
    let mut group = c.benchmark_group("tridiagonal");
    for n in [1024, 8192] {
        let a = model(2.0, n).laplacian();
        let rhs = vec![1.0; a.len()];
        group.bench_with_input(BenchmarkId::new("solve_ldl", n), &a, |b, a: &SymTridiag| {
            b.iter(|| a.solve_ldl(black_box(&rhs)).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("sturm_count", n),
            &a,
            |b, a: &SymTridiag| b.iter(|| a.count_below(black_box(10.0))),
        );
    }
    group.finish();
}

fn discrete_energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("discrete_energy");
    for m in [512, 2048] {
        let md = model(1.5, m);
        let u: Vec<f64> = md
            .grid()
            .nodes()
            .iter()
            .map(|r| (1.0 - 1.0 / r) / r)
            .collect();
        group.bench_with_input(BenchmarkId::new("gradients", m), &u, |b, u| {
            b.iter(|| md.gradients(black_box(u)))
        });
        group.bench_with_input(BenchmarkId::new("hessians", m), &u, |b, u| {
            b.iter(|| md.hessians(black_box(u)))
        });
    }
    group.finish();
}

fn slice_minimizer(c: &mut Criterion) {
    let params = Params::new(1.5, 3).unwrap();
    let eig = find_lambda1(
        &RadialWeight::LinearR4,
        &params,
        &ShootingOptions::default(),
    )
    .unwrap();
    let md = model(1.5, 512);
    let ge = Arc::new(GridEigenPair::compute(md, Some(&|r| eig.phi(r))).unwrap());
    let h = HSpec::default().build(&ge).unwrap();
    let ctx = EnergyContext::new(ge, h).unwrap();
    let opts = SliceOptions::default();
    c.bench_function("slice_minimizer/p1.5_m512", |b| {
        b.iter(|| minimize_on_slice(black_box(0.5), &ctx, None, &opts).unwrap())
    });
}

criterion_group!(
    benches,
    shooting,
    tridiagonal,
    discrete_energy,
    slice_minimizer
);
criterion_main!(benches);
