use criterion::{criterion_group, criterion_main, Criterion};
use ndif_core::data::{generate_synthetic_events, grid_event, Normalizer, SyntheticConfig};
use ndif_core::diffusion::{NoiseSchedule, OracleDenoiser};
use ndif_core::inpaint::{forecast, ForecastConfig};
use ndif_core::Tensor;

fn gridding(c: &mut Criterion) {
    let config = SyntheticConfig { n_events: 64, seed: 5, ..SyntheticConfig::default() };
    let events = generate_synthetic_events(&config).unwrap();
    let normalizer = Normalizer::fit(&events).unwrap();
    c.bench_function("grid_64_events", |b| {
        b.iter(|| {
            for e in &events {
                criterion::black_box(grid_event(e, &normalizer).unwrap());
            }
        })
    });
}

fn repaint_oracle(c: &mut Criterion) {
    let schedule = NoiseSchedule::default_linear();
    let oracle = OracleDenoiser::new(Tensor::full(&[1, 1, 168], 0.2), schedule.clone());
    let config = SyntheticConfig { n_events: 1, seed: 6, ..SyntheticConfig::default() };
    let events = generate_synthetic_events(&config).unwrap();
    let normalizer = Normalizer::fit(&events).unwrap();
    let grid = grid_event(&events[0], &normalizer).unwrap();
    let fc = ForecastConfig { num_samples: 8, ..ForecastConfig::default() };
    c.bench_function("forecast_oracle_n8_t50", |b| {
        b.iter(|| {
            criterion::black_box(
                forecast(&oracle, &schedule, &grid, &normalizer, 2.0, &fc).unwrap(),
            );
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = gridding, repaint_oracle
}
criterion_main!(benches);
