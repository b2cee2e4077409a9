use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use leo_irs::beamforming::{brute_force_oracle, closed_form_solution, quantize_phases};
use leo_irs::channels::{build_channel_set, synthetic_los, SyntheticSizes};
use leo_irs::estimation::estimate_aoa;
use leo_irs::geometry::ArraySizes;
use leo_irs::rng::substream;
use leo_irs::{ScenarioConfig, TrainingConfig};

fn scenario(m: usize) -> ScenarioConfig {
    ScenarioConfig {
        arrays: ArraySizes { m1: m / 2, m2: m - m / 2, ..ArraySizes::default() },
        ..ScenarioConfig::default()
    }
}

fn channel_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("channel_set");
    for m in [500, 1000, 2800] {
        let cfg = scenario(m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &cfg, |b, cfg| {
            b.iter(|| build_channel_set(cfg, 10.0, cfg.kappa_linear(), &mut substream(0, "bench", &[])).unwrap())
        });
    }
    g.finish();
}

fn beam_design(c: &mut Criterion) {
    let cfg = scenario(1000);
    let cs = build_channel_set(&cfg, 10.0, cfg.kappa_linear(), &mut substream(0, "bench", &[])).unwrap();
    c.bench_function("closed_form/1000", |b| b.iter(|| closed_form_solution(black_box(&cs)).unwrap()));
    let sol = closed_form_solution(&cs).unwrap();
    c.bench_function("gain/1000", |b| b.iter(|| black_box(&sol).gain(&cs).unwrap()));
    c.bench_function("quantize/500x16", |b| b.iter(|| quantize_phases(black_box(&sol.theta1), 16).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let sizes = SyntheticSizes { n1: (2, 1), m1: (2, 1), n2: (2, 1), m2: (2, 1) };
    let cs = synthetic_los(&mut substream(1, "bench", &[]), sizes).unwrap();
    c.bench_function("oracle/k16_m2x2", |b| b.iter(|| brute_force_oracle(black_box(&cs), 16).unwrap()));
}

fn angle_search(c: &mut Criterion) {
    let cfg = scenario(1000);
    let cs = build_channel_set(&cfg, 10.0, f64::INFINITY, &mut substream(0, "bench", &[])).unwrap();
    let geom = cs.irs1_geom.clone().unwrap();
    let y = cs.a_i1.clone();
    let mut g = c.benchmark_group("aoa");
    for in_plane in [true, false] {
        let mut tc = TrainingConfig::new(cfg.arrays.m1, cfg.arrays.m2, 0.0);
        tc.in_plane = in_plane;
        let label = if in_plane { "azimuth_only" } else { "two_angle" };
        g.bench_function(label, |b| b.iter(|| estimate_aoa(black_box(&y), &geom, cs.wavelength_m, &tc).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, channel_build, beam_design, oracle, angle_search);
criterion_main!(benches);
