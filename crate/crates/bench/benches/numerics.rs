use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ppopt_core::envsim::EnvKind;
use ppopt_core::nn::{mlp_backward, mlp_forward, Mlp, MlpSpec};
use ppopt_core::ppo::compute_gae;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = Mlp::init(MlpSpec::new(vec![11, 128, 128, 3]).unwrap(), "b", 1.0, &mut rng);
    let x: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = vec![1.0; 3];
    c.bench_function("mlp_forward 11x128x128x3", |b| b.iter(|| mlp_forward(&net.spec, &net.params, black_box(&x)).unwrap()));
    c.bench_function("mlp_backward 11x128x128x3", |b| {
        b.iter(|| mlp_backward(&net.spec, &net.params, black_box(&x), &u).unwrap())
    });
}

fn gae(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 2048;
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let term: Vec<bool> = (0..n).map(|_| rng.random_bool(0.02)).collect();
    let trunc = vec![false; n];
    c.bench_function("compute_gae 2048", |b| {
        b.iter(|| compute_gae(black_box(&r), &v, &term, &trunc, 0.0, 0.99, 0.95).unwrap())
    });
}

fn env_step(c: &mut Criterion) {
    for kind in [EnvKind::InvertedPendulum, EnvKind::DoublePendulum, EnvKind::HopperLite] {
        let mut env = kind.make();
        let act = vec![0.0; env.spec().action_dim];
        env.reset(0);
        c.bench_function(&format!("step {}", kind.as_str()), |b| {
            b.iter(|| {
                if env.step(black_box(&act)).unwrap().done() {
                    env.reset(0);
                }
            })
        });
    }
}

criterion_group!(benches, mlp, gae, env_step);
criterion_main!(benches);
