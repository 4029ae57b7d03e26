use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_oco::metrics::comparator_cumulative_losses;
use sparse_oco::streams::{
    sparse_parameter, AbsoluteDeviationConfig, AbsoluteDeviationStream, Objective, ReplayObjective,
};
use sparse_oco::{corners, Execution, ExpertGrid, ParamVector, SquintState};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn random_grid(dim: usize, k: usize, seed: u64) -> ExpertGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = corners(dim, 1.0).points().to_vec();
    while points.len() < k {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l1: f64 = raw.iter().map(|v: &f64| v.abs()).sum();
        points.push(ParamVector::new(raw.into_iter().map(|v| v / l1).collect()).unwrap());
    }
    ExpertGrid::uniform(points).unwrap()
}

fn squint_updates(c: &mut Criterion) {
    let dim = 50;
    let mut group = c.benchmark_group("squint_update");
    for k in [256, 4096] {
        let grid = random_grid(dim, k, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grads: Vec<ParamVector> = (0..64)
            .map(|_| ParamVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, _| {
                b.iter(|| {
                    let mut s = SquintState::with_horizon(grid.clone(), 4.0 / 3.0, 1 << 16, 1)
                        .unwrap()
                        .with_execution(exec);
                    for g in &grads {
                        s.update(g).unwrap();
                    }
                    black_box(s.predict().norm_l1())
                })
            });
        }
    }
    group.finish();
}

fn absolute_stream() -> AbsoluteDeviationStream {
    let theta = sparse_parameter(20, 3, 0.5, 3).unwrap();
    AbsoluteDeviationStream::new(AbsoluteDeviationConfig { theta_star: theta, rows: 20, seed: 3 }).unwrap()
}

fn replay_objective(c: &mut Criterion) {
    let stream = absolute_stream();
    let theta = ParamVector::basis(20, 0, 0.5);
    let mut group = c.benchmark_group("replay_objective");
    for upto in [1 << 12, 1 << 15] {
        for (name, exec) in MODES {
            let obj = ReplayObjective::new(&stream, upto).unwrap().with_execution(exec);
            group.bench_with_input(BenchmarkId::new(name, upto), &upto, |b, _| {
                b.iter(|| black_box(obj.evaluate(&theta).unwrap().0))
            });
        }
    }
    group.finish();
}

fn comparator_replay(c: &mut Criterion) {
    let stream = absolute_stream();
    let theta = ParamVector::basis(20, 1, -0.3);
    let mut group = c.benchmark_group("comparator_losses");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(comparator_cumulative_losses(&stream, &theta, 1 << 15, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = squint_updates, replay_objective, comparator_replay
}
criterion_main!(benches);
