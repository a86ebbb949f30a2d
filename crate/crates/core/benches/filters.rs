use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rtdenoise::frame::ChannelKind;
use rtdenoise::par;
use rtdenoise::scene::presets::{self, PresetOptions};
use rtdenoise::scene::render_frame;
use rtdenoise::spatial;
use rtdenoise::temporal::{self, TemporalParams};
use rtdenoise::DenoiseConfig;

fn spatial_filters(c: &mut Criterion) {
    let size = 256;
    let scene = presets::by_name(
        "cubes-distance",
        &PresetOptions {
            width: size,
            height: size,
            frames: 1,
            roughness: Some(0.3),
            ..Default::default()
        },
    )
    .unwrap();
    let frame = render_frame(&scene, 0, 1, 7, false).unwrap();
    let params = TemporalParams::from_config(&DenoiseConfig::default());
    let t = temporal::temporal_pass(&frame.specular.data, &frame.gbuffer, None, &params);
    let color = t.color();

    let mut group = c.benchmark_group("denoise_channel_256");
    group.sample_size(10);
    for separable in [false, true] {
        let cfg = DenoiseConfig { separable, ..Default::default() };
        let kind = if separable { "separable" } else { "dense" };
        let run = || {
            spatial::denoise_channel(&color, &t.variance, &frame.gbuffer, ChannelKind::IndirectSpecular, &frame.shadow_angle, &cfg, false)
                .unwrap()
        };
        group.bench_function(BenchmarkId::new(kind, "parallel"), |b| b.iter(run));
        group.bench_function(BenchmarkId::new(kind, "sequential"), |b| {
            b.iter(|| par::run_sequential(run))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("temporal_pass_256");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| temporal::temporal_pass(&frame.specular.data, &frame.gbuffer, None, &params))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| par::run_sequential(|| temporal::temporal_pass(&frame.specular.data, &frame.gbuffer, None, &params)))
    });
    group.finish();
}

criterion_group!(benches, spatial_filters);
criterion_main!(benches);
