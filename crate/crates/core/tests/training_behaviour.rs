use blockcirc::network::Stage;
use blockcirc::{
    evaluate, grad_check, init_network, quantize_network, synth_dataset, train, Dataset, Network, NetworkSpec, TrainConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(lr: f64, epochs: usize, batch: usize, seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: lr, epochs, batch_size: batch, seed, ..Default::default() }
}

#[test]
fn single_sample_loss_decreases_monotonically() {
    let spec = NetworkSpec::mlp(4, &[], 2, 2).unwrap();
    let mut net = init_network::<f64>(&spec, 3).unwrap();
    let data = Dataset::new(vec![4], vec![0.5, -1.0, 0.25, 2.0], vec![1], 2).unwrap();
    let report = train(&mut net, &data, None, &cfg(0.05, 200, 1, 0)).unwrap();
    let losses = report.losses();
    assert_eq!(losses.len(), 200);
    for w in losses[10..].windows(2) {
        assert!(w[1] < w[0], "{} then {}", w[0], w[1]);
    }
    // A memorized single sample is classified correctly.
    assert_eq!(evaluate(&net, &data).unwrap(), 1.0);
}

fn xor_dataset(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let b: f64 = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        features.extend([a, b]);
        labels.push(usize::from(a * b > 0.0));
    }
    Dataset::new(vec![2], features, labels, 2).unwrap()
}

#[test]
fn xor_is_learned_by_a_tiny_circulant_mlp() {
    let data = xor_dataset(200, 1);
    let spec = NetworkSpec::mlp(2, &[16], 2, 2).unwrap();
    let mut net = init_network::<f64>(&spec, 5).unwrap();
    let report = train(&mut net, &data, None, &cfg(0.1, 500, 10, 2)).unwrap();
    let epoch = report.epochs.iter().position(|e| e.accuracy >= 0.95);
    assert!(epoch.is_some(), "final accuracy {}", report.accuracy);
}

#[test]
fn well_separated_clusters_reach_99_percent() {
    let data = synth_dataset::<f64>(11, 200, 4, 8, 10.0).unwrap();
    let test = synth_dataset::<f64>(12, 100, 4, 8, 10.0).unwrap();
    let spec = NetworkSpec::mlp(8, &[16], 4, 4).unwrap();
    let mut net = init_network::<f64>(&spec, 1).unwrap();
    let report = train(&mut net, &data, Some(&test), &cfg(0.05, 10, 16, 3)).unwrap();
    assert!(report.accuracy >= 0.99, "accuracy {}", report.accuracy);

    // 16-bit storage costs at most one point here.
    let q = quantize_network(&net).unwrap();
    let deq = blockcirc::quantize::dequantize_network(&net, &q).unwrap();
    let drop = report.accuracy - evaluate(&deq, &test).unwrap();
    assert!(drop <= 0.01, "drop {drop}");
}

#[test]
fn zero_separation_stays_at_chance() {
    let data = synth_dataset::<f64>(21, 300, 4, 8, 0.0).unwrap();
    let test = synth_dataset::<f64>(22, 500, 4, 8, 0.0).unwrap();
    let spec = NetworkSpec::mlp(8, &[16], 4, 4).unwrap();
    let mut net = init_network::<f64>(&spec, 1).unwrap();
    train(&mut net, &data, None, &cfg(0.05, 5, 16, 3)).unwrap();
    let acc = evaluate(&net, &test).unwrap();
    assert!((acc - 0.25).abs() <= 0.05, "accuracy {acc}");
}

#[test]
fn permuted_labels_give_chance_accuracy() {
    let data = synth_dataset::<f64>(31, 400, 4, 8, 10.0).unwrap();
    let spec = NetworkSpec::mlp(8, &[16], 4, 4).unwrap();
    let mut net = init_network::<f64>(&spec, 1).unwrap();
    train(&mut net, &data, None, &cfg(0.05, 5, 16, 3)).unwrap();
    let mut labels = data.labels().to_vec();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let permuted = data.with_labels(labels).unwrap();
    let acc = evaluate(&net, &permuted).unwrap();
    assert!((acc - 0.25).abs() <= 0.05, "accuracy {acc}");
    assert_eq!(evaluate(&net, &permuted).unwrap(), acc);
}

#[test]
fn smaller_blocks_fit_at_least_as_well() {
    let data = synth_dataset::<f64>(41, 100, 4, 16, 2.0).unwrap();
    let final_loss = |k: usize| {
        let spec = NetworkSpec::mlp(16, &[32], 4, k).unwrap();
        let mut net = init_network::<f64>(&spec, 2).unwrap();
        let report = train(&mut net, &data, None, &cfg(0.05, 20, 16, 4)).unwrap();
        *report.losses().last().unwrap()
    };
    let (small, large) = (final_loss(2), final_loss(8));
    assert!(small <= large + 0.1, "k=2 loss {small}, k=8 loss {large}");
}

#[test]
fn training_in_single_precision_tracks_double() {
    let data = synth_dataset::<f64>(51, 100, 3, 6, 6.0).unwrap();
    let spec = NetworkSpec::mlp(6, &[12], 3, 2).unwrap();
    let mut net64 = init_network::<f64>(&spec, 9).unwrap();
    let mut net32 = init_network::<f32>(&spec, 9).unwrap();
    let c = cfg(0.05, 5, 10, 1);
    let r64 = train(&mut net64, &data, None, &c).unwrap();
    let r32 = train(&mut net32, &data.cast::<f32>(), None, &c).unwrap();
    for (a, b) in r64.losses().iter().zip(r32.losses()) {
        assert!((a - b).abs() < 1e-3 * a.max(1.0), "{a} vs {b}");
    }
}

fn random_mlp(seed: u64) -> (Network<f64>, Vec<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = rng.random_range(3..=10);
    let hidden = rng.random_range(4..=12);
    let classes = rng.random_range(2..=5);
    let k = [1, 2, 3, 4][seed as usize % 4];
    let spec = NetworkSpec::mlp(inputs, &[hidden], classes, k).unwrap();
    let mut net = init_network::<f64>(&spec, seed).unwrap();
    // Non-zero biases so every parameter kind carries gradient.
    let params: Vec<f64> = net.parameters().iter().map(|&p| p + rng.random_range(-0.1..0.1)).collect();
    net.set_parameters(&params).unwrap();
    let x = (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect();
    (net, x, rng.random_range(0..classes))
}

#[test]
fn grad_check_passes_on_random_tiny_networks() {
    for seed in 0..25 {
        let (net, x, label) = random_mlp(seed);
        let report = grad_check(&net, &x, label, 1e-6, 1e-5).unwrap();
        assert!(report.passed, "seed {seed}: {:e}", report.max_rel_error);
        assert_eq!(report.entries.len(), net.param_count());
    }
}

#[test]
fn grad_check_on_a_convolutional_network() {
    let spec: NetworkSpec = "input shape=6x6x2\nconv r=3 out=4 k=2\nmaxpool window=2\nfc out=3 k=2 act=identity".parse().unwrap();
    let net = init_network::<f64>(&spec, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<f64> = (0..72).map(|_| rng.random_range(-1.0..1.0)).collect();
    let report = grad_check(&net, &x, 2, 1e-6, 1e-5).unwrap();
    assert!(report.passed, "{:e}", report.max_rel_error);
}

#[test]
fn grad_check_in_a_dead_relu_region() {
    let spec = NetworkSpec::mlp(4, &[6], 3, 2).unwrap();
    let mut net = init_network::<f64>(&spec, 7).unwrap();
    let Stage::Fc(hidden) = &net.stages()[0] else { panic!() };
    let hidden_count = hidden.weights().param_count() + hidden.bias().len();
    let mut params = net.parameters();
    // Push every hidden bias far negative so no unit fires.
    for p in &mut params[hidden_count - 6..hidden_count] {
        *p = -50.0;
    }
    net.set_parameters(&params).unwrap();
    let report = grad_check(&net, &[0.3, -0.2, 0.1, 0.4], 1, 1e-6, 1e-5).unwrap();
    for e in &report.entries[..hidden_count] {
        assert_eq!(e.analytic, 0.0);
        assert!((e.analytic - e.numeric).abs() < 1e-9);
    }
    assert!(report.max_abs_error < 1e-9);
}

#[test]
fn grad_check_step_sweep_is_not_pathological() {
    for seed in 0..5 {
        let (net, x, label) = random_mlp(100 + seed);
        let errs: Vec<f64> = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| grad_check(&net, &x, label, h, 1.0).unwrap().max_rel_error)
            .collect();
        // The middle step may not be worse than 10× both neighbours.
        assert!(errs[1] <= 10.0 * errs[0].max(errs[2]), "seed {seed}: {errs:?}");
    }
}
