use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gaplab::conditional::all_conditional_density_matrices;
use gaplab::ensembles::{draw_gap, random_density, sample_haar_onb, sample_haar_unitary, GapMethod, PreparedDensity};
use gaplab::experiments::HamiltonianConfig;
use gaplab::thermal::{build_composite, energy_shell, sample_shell_state};
use gaplab::RandomStream;
use std::hint::black_box;

fn gap_samplers(c: &mut Criterion) {
    let mut group = c.benchmark_group("gap_draw");
    for dim in [4, 32] {
        let mut s = RandomStream::new(1, 0);
        let rho = random_density(&mut s, dim, dim, "A").unwrap();
        let prep = PreparedDensity::new(&rho);
        for method in GapMethod::ALL {
            group.bench_with_input(BenchmarkId::new(method.name(), dim), &dim, |b, _| {
                let mut st = RandomStream::new(2, 0);
                b.iter(|| black_box(draw_gap(&mut st, &prep, method, 50.0).unwrap()));
            });
        }
    }
    group.finish();
}

fn haar(c: &mut Criterion) {
    let mut group = c.benchmark_group("haar_unitary");
    for dim in [16, 64, 256] {
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &d| {
            let mut st = RandomStream::new(3, 0);
            b.iter(|| black_box(sample_haar_unitary(&mut st, d)));
        });
    }
    group.finish();
}

fn partial_trace(c: &mut Criterion) {
    let mut st = RandomStream::new(4, 0);
    let sys = HamiltonianConfig::equal_spaced(2, 1.0).build(&mut st, "S").unwrap();
    let y = HamiltonianConfig::equal_spaced(64, 1.0).build(&mut st, "y").unwrap();
    let s = HamiltonianConfig::equal_spaced(64, 1.0).build(&mut st, "s").unwrap();
    let comp = build_composite(&build_composite(&sys, &y).unwrap(), &s).unwrap();
    let shell = energy_shell(&comp, 50.0, 40.0).unwrap();
    let psi = sample_shell_state(&mut st, &comp, &shell).unwrap();

    c.bench_function("shell_state/2x64x64", |b| {
        b.iter(|| black_box(sample_shell_state(&mut st, &comp, &shell).unwrap()))
    });
    c.bench_function("reduced_density/2x64x64", |b| {
        b.iter(|| black_box(psi.reduced_density(&["y", "s"]).unwrap()))
    });
    let onb = sample_haar_onb(&mut st, 64).relabeled("y");
    c.bench_function("conditional_dms/2x64x64", |b| {
        b.iter(|| black_box(all_conditional_density_matrices(&psi, &onb, "s").unwrap()))
    });
}

criterion_group!(benches, gap_samplers, haar, partial_trace);
criterion_main!(benches);
