use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scbf_core::bounds::{prior_sample_size, solve_kappa, PosteriorInputs, PriorInputs};
use scbf_core::lp::{solve, DenseLp, LpOptions};
use scbf_core::pipeline::{Prepared, Timings};
use scbf_core::plant::collect;
use scbf_core::{DatasetRole, RoomTemperature, SynthesisConfig};

const ROOM: &str = include_str!("../../cli/configs/room-temp.cfg");

/// Box-bounded random LP: `cols` variables, `rows` random cuts.
fn random_lp(cols: usize, rows: usize, seed: u64) -> (DenseLp, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lp = DenseLp::with_capacity(cols, rows + 2 * cols);
    let mut e = vec![0.0; cols];
    for j in 0..cols {
        e[j] = 1.0;
        lp.push_row(&e, 10.0);
        e[j] = -1.0;
        lp.push_row(&e, 10.0);
        e[j] = 0.0;
    }
    let mut a = vec![0.0; cols];
    for _ in 0..rows {
        a.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        lp.push_row(&a, rng.random_range(0.5..2.0));
    }
    let c = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    (lp, c)
}

fn lp_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("lp");
    for &(cols, rows) in &[(13, 10_000), (13, 100_000), (40, 20_000)] {
        let (lp, obj) = random_lp(cols, rows, 7);
        let opts = LpOptions::default();
        g.bench_function(format!("{cols}x{rows}"), |b| {
            b.iter(|| solve(black_box(&lp), std::slice::from_ref(&obj), &opts).unwrap())
        });
    }
    g.finish();
}

fn room_pipeline(c: &mut Criterion) {
    let cfg = SynthesisConfig::from_toml(ROOM).unwrap();
    let prep = Prepared::new(&cfg).unwrap();
    let space = cfg.space();
    let data = collect(&RoomTemperature, &space, 20_000, 1, DatasetRole::Scenario).unwrap();

    let mut g = c.benchmark_group("room");
    g.sample_size(10);
    g.bench_function("collect_20000", |b| {
        b.iter(|| collect(&RoomTemperature, &space, 20_000, black_box(1), DatasetRole::Scenario).unwrap())
    });
    g.bench_function("assemble_20000", |b| b.iter(|| prep.problem(black_box(&data.samples)).unwrap()));
    g.bench_function("solve_20000", |b| {
        b.iter_batched(
            Timings::default,
            |mut t| prep.solve(&data.samples, &mut t).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("bounds");
    g.bench_function("prior_sample_size", |b| {
        b.iter(|| prior_sample_size(black_box(&PriorInputs { eps: 7.492e-6, beta: 0.05, dim: 13 })).unwrap())
    });
    g.bench_function("solve_kappa", |b| {
        let inputs = PosteriorInputs { n: 140_000, n0: 70_000, n_star: 2, r: 3, beta: 0.05 };
        b.iter(|| solve_kappa(black_box(&inputs)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, lp_solve, room_pipeline, bounds);
criterion_main!(benches);
