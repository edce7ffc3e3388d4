use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use oms_bench::sphere_fixture;
use oms_core::gmra::{build_gmra, GmraParams};
use oms_core::harness::datasets::sample_sphere;
use oms_core::recovery::{select_center, CenterSigns, FeasibleCap, SearchMode, ORIGIN_TOL};
use oms_core::Ensemble;

fn quantize_and_hamming(c: &mut Criterion) {
    let ens = Ensemble::gaussian(2000, 20, 1).unwrap();
    let x = sample_sphere(2, 20, 2, 2).unwrap();
    let y0 = ens.quantize(x.point(0)).unwrap();
    let y1 = ens.quantize(x.point(1)).unwrap();
    c.bench_function("quantize m=2000 D=20", |b| b.iter(|| ens.quantize(black_box(x.point(0)))));
    c.bench_function("hamming m=2000", |b| b.iter(|| black_box(&y0).hamming(black_box(&y1))));
}

fn center_search(c: &mut Criterion) {
    let (_, gmra) = sphere_fixture(2000, 3);
    let ens = Ensemble::gaussian(1000, 20, 4).unwrap();
    let targets = sample_sphere(2, 20, 32, 5).unwrap();
    let bits: Vec<_> = targets.points().map(|x| ens.quantize(x).unwrap()).collect();
    let mut group = c.benchmark_group("select_center j=4");
    for mode in [SearchMode::Exhaustive, SearchMode::Beam(10)] {
        let signs = CenterSigns::build(&gmra, &ens, 4, mode).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| {
                for y in &bits {
                    black_box(select_center(&gmra, &signs, 4, y, mode).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn gmra_build(c: &mut Criterion) {
    let points = sample_sphere(2, 20, 2000, 6).unwrap();
    let mut group = c.benchmark_group("build_gmra");
    group.sample_size(10);
    group.bench_function("n=2000 j<=6", |b| {
        b.iter(|| build_gmra(black_box(&points), GmraParams::new(2).with_range(0, 6)).unwrap())
    });
    group.finish();
}

fn cap_solver(c: &mut Criterion) {
    let (_, gmra) = sphere_fixture(2000, 7);
    let level = gmra.level(4).unwrap();
    let cap = FeasibleCap::from_level(level, 0, ORIGIN_TOL).unwrap();
    let w: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("cap construction", |b| b.iter(|| FeasibleCap::from_level(level, black_box(0), ORIGIN_TOL)));
    c.bench_function("linear minimizer on cap", |b| b.iter(|| cap.minimize_linear(black_box(&w))));
}

criterion_group!(benches, quantize_and_hamming, center_search, gmra_build, cap_solver);
criterion_main!(benches);
