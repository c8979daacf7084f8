use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use blocked_bandits::baselines::{EtcConfig, PbLatticeConfig};
use blocked_bandits::blattice::BlatticeConfig;
use blocked_bandits::env::{generate_instance, Dataset, GeneratorSpec};
use blocked_bandits::harness::Algorithm;
use blocked_bandits::par;

fn cells(seeds: u64) -> Vec<(GeneratorSpec, Algorithm, u64)> {
    let spec = GeneratorSpec::preset(Dataset::D2, 40, 40, 2, 20, 1);
    let algorithms = [
        Algorithm::Blattice(BlatticeConfig::default()),
        Algorithm::Etc(EtcConfig::with_rounds(5)),
        Algorithm::Pblattice(PbLatticeConfig::default()),
        Algorithm::Random,
    ];
    let mut out = Vec::new();
    for a in &algorithms {
        for s in 0..seeds {
            out.push((spec.clone(), a.clone(), s));
        }
    }
    out
}

fn run_cell(cell: &(GeneratorSpec, Algorithm, u64)) -> f64 {
    let (spec, alg, seed) = cell;
    let inst = generate_instance(spec, *seed).unwrap();
    alg.run(&inst, *seed).unwrap().trace.regret()
}

fn sweep_cells(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for seeds in [4u64, 16] {
        let work = cells(seeds);
        group.bench_with_input(BenchmarkId::new("parallel", work.len()), &work, |b, w| {
            b.iter(|| par::map(w, run_cell))
        });
        group.bench_with_input(BenchmarkId::new("sequential", work.len()), &work, |b, w| {
            b.iter(|| par::map_sequential(w, run_cell))
        });
    }
    group.finish();
}

criterion_main!(benches);
criterion_group!(benches, sweep_cells);
