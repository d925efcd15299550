//! Sequential vs. rayon execution of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use patch_core::discriminator::{run_folds_with_banks, FeatureBank, FoldConfig};
use patch_core::heightmap::{detrend_with, patchify_region, HeightMap, PatchSet, RegionSpec};
use patch_core::rad::monte_carlo_max_with;
use patch_core::synth::{gen_painting, preset_profiles};
use patch_core::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn painting(i: usize) -> HeightMap {
    let profile = &preset_profiles()[i];
    gen_painting(profile, 4.0, 4.0, 100.0, 0, &format!("bench-{i}")).unwrap()
}

fn patches(i: usize) -> PatchSet {
    let map = painting(i);
    patchify_region(&map, &RegionSpec::full(&map.source_id, &map), 0.5).unwrap()
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo_max");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "n108_k25_20k"), |b| {
            b.iter(|| monte_carlo_max_with(108, 25, 20_000, 1, black_box(exec)).unwrap())
        });
    }
    g.finish();
}

fn detrend(c: &mut Criterion) {
    let map = painting(0);
    let mut g = c.benchmark_group("detrend");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "4cm_r0.25"), |b| {
            b.iter(|| detrend_with(&map, 0.25, black_box(exec)).unwrap())
        });
    }
    g.finish();
}

fn feature_bank(c: &mut Criterion) {
    let set = patches(0);
    let mut g = c.benchmark_group("feature_bank");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "64_patches"), |b| {
            b.iter(|| FeatureBank::build(&set, black_box(exec)).unwrap())
        });
    }
    g.finish();
}

fn pairs(c: &mut Criterion) {
    let banks: Vec<FeatureBank> = (0..4)
        .map(|i| FeatureBank::build(&patches(i), Exec::Sequential).unwrap())
        .collect();
    let jobs: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
    let cfg = FoldConfig {
        folds: 4,
        epochs: 5,
        ..FoldConfig::default()
    };
    let mut g = c.benchmark_group("pair_folds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "6_pairs"), |b| {
            b.iter(|| {
                exec.map(&jobs, |&(a, b)| {
                    run_folds_with_banks(&banks[a], &banks[b], &cfg).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, detrend, feature_bank, pairs);
criterion_main!(benches);
