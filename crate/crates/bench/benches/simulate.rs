use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cogarch::cogarch::{simulate_exact, stationary_sigma0};
use cogarch::embedding::embed;
use cogarch::levy::{extract_innovations, simulate_levy_path};
use cogarch::Grid;
use cogarch_bench::{driver, truth};

fn simulate(c: &mut Criterion) {
    let (spec, params) = (driver(), truth());
    let sigma0 = stationary_sigma0(&params).unwrap();
    let grid = Grid::uniform(1000.0, 1000).unwrap();
    c.bench_function("levy_path/T1000", |b| {
        b.iter(|| simulate_levy_path(&spec, 1000.0, black_box(3)).unwrap())
    });
    let path = simulate_levy_path(&spec, 1000.0, 3).unwrap();
    c.bench_function("exact/T1000", |b| {
        b.iter(|| simulate_exact(black_box(&path), &params, &grid, sigma0).unwrap())
    });
    c.bench_function("embed/T1000", |b| {
        b.iter(|| {
            let innov = extract_innovations(black_box(&path), &grid, 0.0, &spec).unwrap();
            embed(&innov, &params, sigma0).unwrap()
        })
    });
}

criterion_group!(benches, simulate);
criterion_main!(benches);
