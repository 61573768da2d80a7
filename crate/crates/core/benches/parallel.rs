//! Data-parallel vs sequential execution of the Monte Carlo workloads:
//! a seeded episode batch and a slice of the lemma suite.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shillbid_core::distributions::ShillLowComponent;
use shillbid_core::harness::{map_cells, sweep, ExecMode, PolicySpec, SweepConfig};
use shillbid_core::verify::check_path_inverse;

fn sweep_config(exec: ExecMode) -> SweepConfig {
    SweepConfig {
        schema_version: 1,
        t_ladder: vec![500, 1000],
        gamma_ladder: vec![1.0],
        policies: vec![PolicySpec::RobustOnly, PolicySpec::ShillProof],
        seeds_per_cell: 4,
        master_seed: 7,
        shill_low: ShillLowComponent::AtomAtZero,
        cell: Some(2),
        constants: None,
        output_dir: None,
        exec,
    }
}

fn bench_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode_sweep");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::new("mode", format!("{mode:?}")),
            &mode,
            |b, &mode| {
                b.iter(|| sweep(&sweep_config(mode)).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_path_inverse(c: &mut Criterion) {
    let ks: Vec<usize> = (2..=120).collect();
    let betas = [1e-2, 1.0, 1e2];
    let mut group = c.benchmark_group("path_inverse_grid");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::new("mode", format!("{mode:?}")),
            &mode,
            |b, &mode| {
                b.iter(|| {
                    let reports =
                        map_cells(mode, ks.clone(), |&k| check_path_inverse(&[k], &betas, 4.0));
                    assert!(reports.iter().all(|r| r.pass));
                });
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_path_inverse);
criterion_main!(benches);
