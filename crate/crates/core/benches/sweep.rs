use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use greenkde::datagen::sample_gaussian;
use greenkde::estimator::DensityModel;
use greenkde::exec::Execution;
use greenkde::neighbors::NeighborIndex;
use greenkde::sample::Dimension;
use greenkde::solver::{self, DipoleField, FitConfig, FitReport};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn field_sweep(c: &mut Criterion) {
    let dim = Dimension::new(2).unwrap();
    let mut group = c.benchmark_group("compute_fields");
    group.sample_size(10);
    for len in [500, 2000] {
        let sample = sample_gaussian(dim, len, 1.0, 1).unwrap();
        let index = NeighborIndex::new(sample.clone());
        let field = DipoleField::init(len, dim, 1);
        let radii = solver::exclusion_radii_sq(&index, 40, Execution::Sequential).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, len), &len, |b, _| {
                b.iter(|| solver::compute_fields(&sample, &field, &radii, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn batch_estimates(c: &mut Criterion) {
    let dim = Dimension::new(2).unwrap();
    let sample = sample_gaussian(dim, 2000, 1.0, 2).unwrap();
    let field = DipoleField::init(2000, dim, 2);
    let report = FitReport {
        iterations_used: 0,
        energy_initial: 0.0,
        energy_final: 0.0,
        mean_misalignment: 0.0,
        restart_energies: vec![0.0],
        converged: false,
    };
    let model = DensityModel::from_parts(sample, field, FitConfig::new(20, 2), 3, report).unwrap();
    let queries = sample_gaussian(dim, 1000, 1.5, 3).unwrap();
    let mut group = c.benchmark_group("estimate_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| model.estimate_batch_with(queries.coords(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, field_sweep, batch_estimates);
criterion_main!(benches);
