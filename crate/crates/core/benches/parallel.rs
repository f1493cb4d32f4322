//! Sequential against data-parallel execution for the two hot loops: error
//! scans over many `n` and grid refinement of a shift parameter.
//!
//! Build with `--no-default-features` to see both variants fall back to the
//! sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hrpart::analysis::{scan, Variant};
use hrpart::estimators::{Estimator, EstimatorKind};
use hrpart::fitting::{build_c1_series, grid_refine, GridConfig, GridModel, NRange};
use hrpart::{Execution, PartitionTable, Real};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_scan(c: &mut Criterion) {
    let table = PartitionTable::build(4000);
    let est = Estimator::published(EstimatorKind::Rh4);
    let range = NRange::new(1, 4000, 1).unwrap();
    let mut group = c.benchmark_group("scan_rh4_1_4000");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| scan(&table, &est, range, Variant::Rounded, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let table = PartitionTable::build(4000);
    let ns: Vec<u64> = (120..=4000).step_by(40).collect();
    let series = build_c1_series(&table, &ns, Execution::Parallel).unwrap();
    let model = GridModel::ShiftedPower { e: Real::ratio(1, 2) };
    let grid = GridConfig::new("0.5", "15", "0.1", 3).unwrap();
    let mut group = c.benchmark_group("grid_refine_c1");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| grid_refine(&series, &model, &grid, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scan, bench_grid);
criterion_main!(benches);
