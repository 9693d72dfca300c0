use super::*;
use crate::losses::{SmoothingParam, TrainingLoss};
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(features: usize, hidden: &[usize], batch_norm: bool, dropout: f64, bins: usize) -> NetworkSpec {
    NetworkSpec {
        features,
        hidden: hidden.to_vec(),
        batch_norm,
        dropout,
        outputs: bins,
        head: Head::Quantile,
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn random_labels(rows: usize, bins: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, bins);
    for r in 0..rows {
        let raw: Vec<f64> = (0..bins).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        m.row_mut(r).iter_mut().zip(&raw).for_each(|(o, v)| *o = v / total);
    }
    m
}

#[test]
fn zero_network_predicts_uniform_histograms() {
    let net = Network::zeroed(spec(3, &[8, 8], true, 0.0, 4)).unwrap();
    let x = Matrix::from_rows(&[[0.3, -2.0, 5.0]]);
    let trace = net.forward(&x, Some(&[0.7]), Mode::Eval, None).unwrap();
    assert_eq!(trace.density().unwrap().row(0), &[0.25; 4]);
    assert_eq!(trace.cumulative().unwrap().row(0), &[0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn eval_forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::new(spec(2, &[16, 16], true, 0.5, 5), &mut rng).unwrap();
    let x = random_matrix(10, 2, &mut rng);
    let taus: Vec<f64> = (0..10).map(|i| 0.05 + 0.09 * i as f64).collect();
    let a = net.forward(&x, Some(&taus), Mode::Eval, None).unwrap();
    let b = net.forward(&x, Some(&taus), Mode::Eval, None).unwrap();
    assert_eq!(a.cumulative(), b.cumulative());
}

#[test]
fn outputs_are_valid_cumulative_histograms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let net = Network::new(spec(3, &[12, 12], trial % 2 == 0, 0.0, 7), &mut rng).unwrap();
        // Large inputs produce extreme logits.
        let x = Matrix::from_vec(32, 3, (0..96).map(|_| rng.random_range(-50.0..50.0)).collect());
        let taus: Vec<f64> = (0..32).map(|_| rng.random_range(0.001..0.999)).collect();
        for mode in [Mode::Eval, Mode::Train] {
            let trace = net.forward(&x, Some(&taus), mode, None).unwrap();
            for row in trace.cumulative().unwrap().row_iter() {
                assert_eq!(row[6], 1.0);
                assert!(row.windows(2).all(|w| w[1] >= w[0]));
                assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
                assert!(row.iter().all(|v| v.is_finite()));
            }
        }
    }
}

#[test]
fn forward_validates_shapes() {
    let net = Network::zeroed(spec(2, &[4], false, 0.0, 3)).unwrap();
    let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]);
    assert_eq!(
        net.forward(&x, Some(&[0.5]), Mode::Eval, None).unwrap_err(),
        NnError::DimensionMismatch { expected: 2, got: 3 }
    );
    let x = Matrix::from_rows(&[[1.0, 2.0]]);
    assert_eq!(net.forward(&x, None, Mode::Eval, None).unwrap_err(), NnError::MissingTau);
    let dropout_net = Network::zeroed(spec(2, &[4], false, 0.3, 3)).unwrap();
    assert_eq!(
        dropout_net.forward(&x, Some(&[0.5]), Mode::Train, None).unwrap_err(),
        NnError::MissingRng
    );
}

#[test]
fn zero_loss_gradient_gives_zero_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Network::new(spec(2, &[8, 8], true, 0.0, 4), &mut rng).unwrap();
    let x = random_matrix(6, 2, &mut rng);
    let trace = net.forward(&x, Some(&[0.5; 6]), Mode::Train, None).unwrap();
    let grads = net.backward(&trace, &Matrix::zeros(6, 4)).unwrap();
    assert_eq!(grads.max_abs(), 0.0);
    assert_eq!(grads.tensors().len(), net.parameters().len());
}

#[test]
fn backward_rejects_foreign_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = Network::new(spec(2, &[8], false, 0.0, 4), &mut rng).unwrap();
    let b = Network::new(spec(2, &[6], false, 0.0, 4), &mut rng).unwrap();
    let x = random_matrix(3, 2, &mut rng);
    let trace = a.forward(&x, Some(&[0.5; 3]), Mode::Train, None).unwrap();
    assert_eq!(b.backward(&trace, &Matrix::zeros(3, 4)).unwrap_err(), NnError::StaleTrace);
}

/// Mean smoothed-EMPL loss of the whole network, as a function of its parameters.
fn network_loss(net: &Network, x: &Matrix, taus: &[f64], labels: &Matrix, loss: TrainingLoss) -> f64 {
    let trace = net.forward(x, Some(taus), Mode::Train, None).unwrap();
    let density = trace.density().unwrap();
    (0..x.rows())
        .map(|r| loss.value(labels.row(r), density.row(r), taus[r]).unwrap())
        .sum::<f64>()
        / x.rows() as f64
}

fn max_relative_fd_error(net: &mut Network, x: &Matrix, taus: &[f64], labels: &Matrix, loss: TrainingLoss) -> f64 {
    let trace = net.forward(x, Some(taus), Mode::Train, None).unwrap();
    let (_, grads) = quantile_objective(net, &trace, labels, taus, loss).unwrap();
    let step = 1e-5;
    let mut worst = 0.0f64;
    let count = net.parameters().len();
    for t in 0..count {
        let len = net.parameters()[t].len();
        for i in 0..len {
            let orig = net.parameters()[t][i];
            net.parameters_mut()[t][i] = orig + step;
            let up = network_loss(net, x, taus, labels, loss);
            net.parameters_mut()[t][i] = orig - step;
            let down = network_loss(net, x, taus, labels, loss);
            net.parameters_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads.tensors()[t][i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_without_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let loss = TrainingLoss::EmplSmoothed(SmoothingParam::new(0.01).unwrap());
    for _ in 0..5 {
        let mut net = Network::new(spec(3, &[8], false, 0.0, 4), &mut rng).unwrap();
        let x = random_matrix(1, 3, &mut rng);
        let taus = [rng.random_range(0.05..0.95)];
        let labels = random_labels(1, 4, &mut rng);
        let err = max_relative_fd_error(&mut net, &x, &taus, &labels, loss);
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn gradients_match_finite_differences_with_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for loss in [
        TrainingLoss::EmplSmoothed(SmoothingParam::new(0.01).unwrap()),
        TrainingLoss::Em2,
        TrainingLoss::CrossEntropy,
        TrainingLoss::Mse,
    ] {
        let mut net = Network::new(spec(3, &[8, 8], true, 0.0, 4), &mut rng).unwrap();
        let x = random_matrix(12, 3, &mut rng);
        let taus: Vec<f64> = (0..12).map(|_| rng.random_range(0.05..0.95)).collect();
        let labels = random_labels(12, 4, &mut rng);
        let err = max_relative_fd_error(&mut net, &x, &taus, &labels, loss);
        assert!(err < 1e-4, "{}: relative error {err}", loss.name());
    }
}

#[test]
fn batch_norm_on_identical_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = Network::new(spec(2, &[8], true, 0.0, 3), &mut rng).unwrap();
    let x = Matrix::from_rows(&[[0.3, 0.9]; 5]);
    let trace = net.forward(&x, Some(&[0.4; 5]), Mode::Train, None).unwrap();
    let xhat = trace.layers[0].normalized.as_ref().unwrap();
    assert!(xhat.as_slice().iter().all(|v| v.abs() < 1e-6));
    let labels = random_labels(5, 3, &mut rng);
    let loss = TrainingLoss::EmplSmoothed(SmoothingParam::new(0.01).unwrap());
    let (_, grads) = quantile_objective(&net, &trace, &labels, &[0.4; 5], loss).unwrap();
    // tensors: W, b, scale, shift, W_out, b_out
    assert!(grads.tensors()[2].iter().all(|g| g.abs() < 1e-6));
}

#[test]
fn dropout_is_inverted_and_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut net = Network::new(spec(2, &[16], false, 0.5, 3), &mut rng).unwrap();
    // Make the hidden activations strictly positive so every unit matters.
    net.hidden[0].dense.bias.iter_mut().for_each(|b| *b = 1.0);
    let x = Matrix::from_rows(&[[0.2, -0.1]]);
    let eval = net.forward(&x, Some(&[0.5]), Mode::Eval, None).unwrap();
    let target = eval.layers[0].output().row(0).to_vec();
    let draws = 10_000;
    let mut mean = alloc::vec![0.0; 16];
    for _ in 0..draws {
        let t = net.forward(&x, Some(&[0.5]), Mode::Train, Some(&mut rng)).unwrap();
        mean.iter_mut().zip(t.layers[0].output().row(0)).for_each(|(m, v)| *m += v / draws as f64);
    }
    for (m, e) in mean.iter().zip(&target) {
        assert!((m - e).abs() <= 0.02 * e.abs(), "mean {m} vs eval {e}");
    }
}

#[test]
fn batch_norm_eval_ignores_batch_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = Network::new(spec(2, &[8, 8], true, 0.0, 4), &mut rng).unwrap();
    let train_x = random_matrix(64, 2, &mut rng);
    let trace = net.forward(&train_x, Some(&[0.5; 64]), Mode::Train, None).unwrap();
    net.update_running_stats(&trace).unwrap();
    let probe = [0.1, 0.2];
    let alone = net.predict_one(&probe, 0.3).unwrap();
    let mut others = random_matrix(9, 2, &mut rng);
    others.row_mut(4).copy_from_slice(&probe);
    let mut taus = [0.8; 9];
    taus[4] = 0.3;
    let batched = net.predict(&others, &taus).unwrap();
    assert_eq!(batched.row(4), alone.as_slice());
}

#[test]
fn adam_leaves_parameters_alone_for_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut net = Network::new(spec(2, &[4], true, 0.0, 3), &mut rng).unwrap();
    let before = net.clone();
    let mut state = AdamState::new(&net, AdamConfig::default());
    let zeros = Gradients(net.parameters().iter().map(|p| alloc::vec![0.0; p.len()]).collect());
    for _ in 0..5 {
        adam_step(&mut net, &zeros, &mut state).unwrap();
    }
    assert_eq!(net, before);
    assert_eq!(state.step, 5);
}

#[test]
fn adam_first_step_and_steady_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = Network::new(spec(1, &[2], false, 0.0, 2), &mut rng).unwrap();
    let config = AdamConfig::default();
    let mut state = AdamState::new(&net, config);
    // A fixed, mixed-sign gradient with entries of very different scale.
    let grads = Gradients(
        net.parameters()
            .iter()
            .enumerate()
            .map(|(t, p)| (0..p.len()).map(|i| if (t + i) % 2 == 0 { 3e-3 } else { -40.0 }).collect())
            .collect(),
    );
    let start: Vec<Vec<f64>> = net.parameters().iter().map(|p| p.to_vec()).collect();
    adam_step(&mut net, &grads, &mut state).unwrap();
    for ((p, s), g) in net.parameters().iter().zip(&start).zip(grads.tensors()) {
        for i in 0..p.len() {
            // m_hat = g, v_hat = g^2 after bias correction.
            let expected = -config.learning_rate * g[i] / (g[i].abs() + config.epsilon);
            assert!((p[i] - s[i] - expected).abs() < 1e-15);
        }
    }
    let mut previous: Vec<Vec<f64>> = net.parameters().iter().map(|p| p.to_vec()).collect();
    for step in 2..=1000 {
        adam_step(&mut net, &grads, &mut state).unwrap();
        if step == 1000 {
            for (p, q) in net.parameters().iter().zip(&previous) {
                for i in 0..p.len() {
                    let magnitude = (p[i] - q[i]).abs();
                    assert!((magnitude / config.learning_rate - 1.0).abs() < 0.01);
                }
            }
        }
        previous = net.parameters().iter().map(|p| p.to_vec()).collect();
    }
}

#[test]
fn adam_rejects_mismatched_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut net = Network::new(spec(1, &[2], false, 0.0, 2), &mut rng).unwrap();
    let mut state = AdamState::new(&net, AdamConfig::default());
    let bad = Gradients(alloc::vec![alloc::vec![0.0; 3]]);
    assert_eq!(adam_step(&mut net, &bad, &mut state), Err(NnError::ShapeMismatch));
}

struct Noise {
    bins: usize,
}

impl DataSource for Noise {
    fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch {
        let mut r = ChaCha8Rng::seed_from_u64(rng.next_u64());
        Batch {
            features: random_matrix(size, 2, &mut r),
            labels: random_labels(size, self.bins, &mut r),
        }
    }
}

#[test]
fn zero_iterations_leave_the_network_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut net = Network::new(spec(2, &[8], true, 0.1, 3), &mut rng).unwrap();
    let before = net.clone();
    let schedule = Schedule {
        iterations: 0,
        ..Schedule::default()
    };
    let curve = train(&mut net, &mut Noise { bins: 3 }, TrainingLoss::Empl, TauPolicy::Uniform, &schedule, &mut rng).unwrap();
    assert!(curve.points.is_empty());
    assert_eq!(net, before);
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut net = Network::new(spec(2, &[8, 8], true, 0.2, 3), &mut rng).unwrap();
        let schedule = Schedule {
            iterations: 50,
            batch_size: 16,
            log_interval: 10,
            ..Schedule::default()
        };
        let curve = train(&mut net, &mut Noise { bins: 3 }, TrainingLoss::Empl, TauPolicy::Uniform, &schedule, &mut rng).unwrap();
        (net, curve)
    };
    let (net_a, curve_a) = run();
    let (net_b, curve_b) = run();
    assert_eq!(curve_a.points.len(), 5);
    assert_eq!(curve_a, curve_b);
    assert_eq!(net_a, net_b);
}

#[test]
fn training_reduces_the_loss_on_a_learnable_task() {
    // Label: all mass in bin 0 when the first feature is negative, else bin 2.
    struct Step;
    impl DataSource for Step {
        fn next_batch(&mut self, size: usize, rng: &mut dyn RngCore) -> Batch {
            let mut features = Matrix::zeros(size, 2);
            let mut labels = Matrix::zeros(size, 3);
            for r in 0..size {
                let v = rng.random_range(-1.0..1.0);
                features.row_mut(r)[0] = v;
                labels.row_mut(r)[if v < 0.0 { 0 } else { 2 }] = 1.0;
            }
            Batch { features, labels }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut net = Network::new(spec(2, &[16], false, 0.0, 3), &mut rng).unwrap();
    let schedule = Schedule {
        iterations: 400,
        batch_size: 64,
        log_interval: 100,
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
        ..Schedule::default()
    };
    let curve = train(&mut net, &mut Step, TrainingLoss::W1, TauPolicy::Fixed(crate::histogram::QuantileLevel::MEDIAN), &schedule, &mut rng).unwrap();
    assert!(curve.points[3].1 < 0.25 * curve.points[0].1, "{:?}", curve.points);
}

#[test]
fn shape_check_catches_tampered_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = Network::new(spec(2, &[4, 3], true, 0.0, 5), &mut rng).unwrap();
    assert_eq!(net.check_shapes(), Ok(()));
    net.hidden[0].dense.bias.pop();
    assert_eq!(net.check_shapes(), Err(NnError::ShapeMismatch));
}
