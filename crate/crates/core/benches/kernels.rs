//! Kernel benchmarks. Each group runs on the default rayon pool and on a
//! one-thread pool; build with `--no-default-features` for the sequential
//! code path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;
use rival_core::attention::{injected_attention, InjectionMode, SiteWeights, TokenMatrix};
use rival_core::denoiser::{Condition, Denoiser, DenoiserCall, ToyAttentionDenoiser, ToyConfig};
use rival_core::io::Raster;
use rival_core::latent::{adain, sample_standard_gaussian, stats};
use rival_core::metrics::kmeans_palette;
use rival_core::pipeline::{Pipeline, RivalConfig};
use rival_core::{par, NoiseSchedule, ScheduleParams, SeededRng, Shape};

fn pools() -> Vec<(String, ThreadPool)> {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let mode = if par::is_parallel() { "parallel" } else { "sequential" };
    let default = build(0);
    vec![(format!("{mode}/single"), build(1)), (format!("{mode}/pool{}", default.current_num_threads()), default)]
}

fn random_tokens(rng: &mut SeededRng, rows: usize, cols: usize) -> TokenMatrix {
    TokenMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.standard_normal()).collect()).unwrap()
}

fn attention(c: &mut Criterion) {
    let mut rng = SeededRng::new(1);
    let d = 8;
    let w = SiteWeights {
        w_q: random_tokens(&mut rng, d, d),
        w_k: random_tokens(&mut rng, d, d),
        w_v: random_tokens(&mut rng, d, d),
        w_o: random_tokens(&mut rng, d, d),
    };
    let v_g = random_tokens(&mut rng, 1024, d);
    let v_r = random_tokens(&mut rng, 1024, d);
    let mut group = c.benchmark_group("injected_attention_1024");
    for (label, pool) in pools() {
        for mode in [InjectionMode::Off, InjectionMode::Fuse] {
            group.bench_function(BenchmarkId::new(label.clone(), mode.as_str()), |b| {
                pool.install(|| b.iter(|| injected_attention(black_box(&v_g), Some(&v_r), mode, &w).unwrap()))
            });
        }
    }
    group.finish();
}

fn toy_predict(c: &mut Criterion) {
    let net = ToyAttentionDenoiser::new(ToyConfig { size: 32, ..Default::default() }).unwrap();
    let x = sample_standard_gaussian(net.shape(), &mut SeededRng::new(2));
    let cond = Condition::from_seed(1, 16);
    let mut group = c.benchmark_group("toy_predict_32x32");
    for (label, pool) in pools() {
        group.bench_function(label, |b| {
            pool.install(|| b.iter(|| net.predict(&DenoiserCall::new(black_box(&x), 500, &cond)).unwrap()))
        });
    }
    group.finish();
}

fn latent_ops(c: &mut Criterion) {
    let shape = Shape::new(4, 128, 128);
    let a = sample_standard_gaussian(shape, &mut SeededRng::new(3));
    let b = sample_standard_gaussian(shape, &mut SeededRng::new(4)).map(|v| 2.0 * v + 1.0);
    let mut group = c.benchmark_group("latent_4x128x128");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new(label.clone(), "stats"), |bench| {
            pool.install(|| bench.iter(|| stats(black_box(&a)).unwrap()))
        });
        group.bench_function(BenchmarkId::new(label, "adain"), |bench| {
            pool.install(|| bench.iter(|| adain(black_box(&a), &b).unwrap()))
        });
    }
    group.finish();
}

fn palette(c: &mut Criterion) {
    let mut rng = SeededRng::new(5);
    let image = Raster::new(128, 128, (0..128 * 128 * 3).map(|_| rng.below(256) as u8).collect()).unwrap();
    let mut group = c.benchmark_group("kmeans_palette_128x128");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(label, |b| {
            pool.install(|| b.iter(|| kmeans_palette(black_box(&image), 10, &mut SeededRng::new(0), 50).unwrap()))
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let schedule = NoiseSchedule::build(ScheduleParams { inference_steps: 20, ..Default::default() }).unwrap();
    let net = ToyAttentionDenoiser::new(ToyConfig { size: 16, ..Default::default() }).unwrap();
    let pipeline = Pipeline::new(&schedule, &net);
    let cond = Condition::from_seed(1, 16);
    let x0 = sample_standard_gaussian(net.shape(), &mut SeededRng::new(6));
    let chain = pipeline.invert(&x0, &cond).unwrap();
    let cfg = RivalConfig { steps: 20, t_align: 12, t_early: 12, ..Default::default() };
    let mut group = c.benchmark_group("rival_generate_16x16_T20");
    group.sample_size(10);
    for (label, pool) in pools() {
        group.bench_function(label, |b| {
            pool.install(|| b.iter(|| pipeline.rival_generate(&chain, &cond, &cfg, &mut SeededRng::new(0)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, attention, toy_predict, latent_ops, palette, generation);
criterion_main!(benches);
