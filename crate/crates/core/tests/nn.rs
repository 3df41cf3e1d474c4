use ppopt_core::nn::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_net(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
    let spec = MlpSpec::new(dims.to_vec()).unwrap();
    let mut net = Mlp::init(spec, "l", 1.0, rng);
    // non-zero biases so every term of the gradient is exercised
    for l in net.params.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    net
}

/// Checks every parameter of `net` against central differences of `upstream · f(x)`.
fn check_gradients(net: &Mlp, x: &[f64], upstream: &[f64]) {
    let h = 1e-5;
    let analytic = mlp_backward(&net.spec, &net.params, x, upstream).unwrap();
    let objective = |p: &ParamStore| -> f64 {
        mlp_forward(&net.spec, p, x).unwrap().iter().zip(upstream).map(|(y, u)| y * u).sum()
    };
    let mut probe = net.params.clone();
    let n = probe.num_params();
    let grads: Vec<f64> = analytic.values().copied().collect();
    for i in 0..n {
        let orig = *probe.values().nth(i).unwrap();
        *probe.values_mut().nth(i).unwrap() = orig + h;
        let up = objective(&probe);
        *probe.values_mut().nth(i).unwrap() = orig - h;
        let down = objective(&probe);
        *probe.values_mut().nth(i).unwrap() = orig;
        let fd = (up - down) / (2.0 * h);
        let a = grads[i];
        if a.abs() < 1e-5 {
            assert!((a - fd).abs() < 1e-7, "param {i}: analytic {a} fd {fd}");
        } else {
            let rel = (a - fd).abs() / a.abs().max(fd.abs());
            assert!(rel < 1e-4, "param {i}: analytic {a} fd {fd} rel {rel}");
        }
    }
}

#[test]
fn small_tanh_net_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = random_net(&[4, 8, 1], &mut rng);
    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    check_gradients(&net, &x, &[1.0]);
}

#[test]
fn random_networks_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..8 {
        let dims = [rng.random_range(1..=16), rng.random_range(1..=64), rng.random_range(1..=64), rng.random_range(1..=8)];
        let net = random_net(&dims, &mut rng);
        let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..dims[3]).map(|_| rng.random_range(-1.0..1.0)).collect();
        check_gradients(&net, &x, &u);
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = random_net(&[5, 12, 3], &mut rng);
    let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = [0.3, -1.0, 0.7];
    let cache = net.forward_cached(&x).unwrap();
    let mut sink = net.params.zeros_like();
    let dx = net.backward_accumulate(&cache, &u, &mut sink);
    let f = |x: &[f64]| -> f64 { net.forward(x).unwrap().iter().zip(&u).map(|(y, w)| y * w).sum() };
    for i in 0..5 {
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += 1e-6;
        b[i] -= 1e-6;
        assert!(((f(&a) - f(&b)) / 2e-6 - dx[i]).abs() < 1e-8);
    }
}

#[test]
fn forward_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = random_net(&[4, 8, 8, 1], &mut rng);
    let x = [0.2, -0.4, 0.9, -1.1];
    let l = net.params.layers();
    let mut h1 = [0.0; 8];
    for r in 0..8 {
        let mut z = l[0].bias[r];
        for c in 0..4 {
            z += l[0].weight[r * 4 + c] * x[c];
        }
        h1[r] = z.tanh();
    }
    let mut h2 = [0.0; 8];
    for r in 0..8 {
        let mut z = l[1].bias[r];
        for c in 0..8 {
            z += l[1].weight[r * 8 + c] * h1[c];
        }
        h2[r] = z.tanh();
    }
    let mut y = l[2].bias[0];
    for c in 0..8 {
        y += l[2].weight[c] * h2[c];
    }
    let out = net.forward(&x).unwrap();
    assert!((out[0] - y).abs() < 1e-14, "{} vs {y}", out[0]);
}

#[test]
fn empty_bytes_are_truncated() {
    assert!(matches!(deserialize_params(&[]), Err(FormatError::Truncated { .. })));
}

#[test]
fn file_round_trip_preserves_forward_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = random_net(&[4, 16, 16, 2], &mut rng);
    net.params.round_to_f32();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.pptw");
    write_param_file(&path, &net.params, &[0.5, -0.25]).unwrap();
    let loaded = read_param_file(&path).unwrap();
    let reloaded = Mlp::new(net.spec.clone(), loaded.params).unwrap();
    let x = [0.1, 0.2, -0.3, 0.4];
    assert_eq!(net.forward(&x).unwrap(), reloaded.forward(&x).unwrap());
    assert_eq!(loaded.log_std, vec![0.5, -0.25]);
}

#[test]
fn frozen_group_isolation_on_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut net = random_net(&[3, 6, 2], &mut rng);
    let before = net.params.clone();
    let grads = mlp_backward(&net.spec, &net.params, &[1.0, -1.0, 0.5], &[1.0, 1.0]).unwrap();
    let rates: LayerRates = [("l0".to_string(), 0.0), ("l1".to_string(), 1e-2)].into_iter().collect();
    let mut adam = AdamState::default();
    for _ in 0..5 {
        adam.step(&mut net.params, &grads, &rates).unwrap();
    }
    assert_eq!(net.params.layers()[0], before.layers()[0]);
    assert_ne!(net.params.layers()[1], before.layers()[1]);
    assert_eq!(adam.steps(), 5);
}

fn f32_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()).prop_map(f64::from), len)
}

fn f32_store() -> impl Strategy<Value = (ParamStore, Vec<f64>)> {
    (prop::collection::vec(1usize..6, 2..5), 0usize..4).prop_flat_map(|(dims, ls)| {
        let shapes: Vec<(usize, usize)> = dims.windows(2).map(|w| (w[1], w[0])).collect();
        let layers: Vec<_> = shapes.iter().map(|&(r, c)| (f32_vec(r * c), f32_vec(r))).collect();
        (layers, f32_vec(ls)).prop_map(move |(lv, log_std)| {
            let layers = lv
                .into_iter()
                .zip(&shapes)
                .enumerate()
                .map(|(k, ((w, b), &(r, c)))| Layer::new(format!("layer{k}"), r, c, w, b).unwrap())
                .collect();
            (ParamStore::new(layers).unwrap(), log_std)
        })
    })
}

proptest! {
    #[test]
    fn serialization_round_trip_is_bit_exact((store, log_std) in f32_store()) {
        let bytes = serialize_params(&store, &log_std);
        let back = deserialize_params(&bytes).unwrap();
        let same_bits = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        let orig: Vec<f64> = store.values().copied().collect();
        let got: Vec<f64> = back.params.values().copied().collect();
        prop_assert!(same_bits(&orig, &got));
        prop_assert!(same_bits(&log_std, &back.log_std));
        prop_assert_eq!(back.params.dims(), store.dims());
    }

    #[test]
    fn any_truncation_is_rejected((store, log_std) in f32_store(), cut in 0.0f64..1.0) {
        let bytes = serialize_params(&store, &log_std);
        let n = ((bytes.len() as f64) * cut) as usize;
        prop_assert!(deserialize_params(&bytes[..n.min(bytes.len() - 1)]).is_err());
    }
}
