use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpt_core::analysis::{scan, Engine, Grid, Measure, ScanPlan};
use qpt_core::freefermion::KOffset;
use qpt_core::hilbert::ModelSpec;
use qpt_core::par::Execution;

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel { threads: 0 })]
}

fn exact_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("xxz_n10_scan");
    group.sample_size(10);
    for (name, exec) in modes() {
        let mut plan = ScanPlan::new(
            ModelSpec::xxz(0.0, 10).unwrap(),
            "delta",
            Grid::new(0.5, 1.5, 0.1).unwrap(),
            vec![Measure::TauSef, Measure::E2v(1)],
            Engine::default(),
        );
        plan.execution = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &plan, |b, plan| b.iter(|| scan(plan).unwrap()));
    }
    group.finish();
}

fn free_fermion_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("xymi_n1001_scan");
    group.sample_size(10);
    for (name, exec) in modes() {
        let mut plan = ScanPlan::new(
            ModelSpec::xymi(0.5, 0.0, 0.5, 0.0, 1001).unwrap(),
            "lambda",
            Grid::new(-1.5, 0.5, 0.1).unwrap(),
            vec![Measure::TauSef, Measure::Qd(1)],
            Engine::FreeFermion { k_offset: KOffset::Auto },
        );
        plan.execution = exec;
        group.bench_with_input(BenchmarkId::from_parameter(name), &plan, |b, plan| b.iter(|| scan(plan).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, exact_scan, free_fermion_scan);
criterion_main!(benches);
