use approx::assert_abs_diff_eq;
use mfbn::activation::{sigmoid, ActivationKind};
use mfbn::exact::{exact_log_partition, log_likelihood};
use mfbn::harness::{random_dag, RandomNetSpec};
use mfbn::learning::{bars_dataset, loglik_gradient, train, true_loglik, Batch, TrainConfig};
use mfbn::meanfield::Scheme;
use mfbn::{BeliefNetwork, ClampContext, Edge, SolverOptions};

#[test]
fn bars_empty_image_frequency() {
    let data = bars_dataset(100_000, 4, 99).unwrap();
    let empty = data.iter().filter(|p| p.iter().all(|&b| b == 0)).count() as f64 / data.len() as f64;
    // sd of the estimate is about 7.7e-4
    assert!((empty - 0.0625).abs() < 0.003, "{empty}");
}

#[test]
fn bars_images_are_unions_of_same_orientation_bars() {
    for img in bars_dataset(2_000, 4, 5).unwrap() {
        let px = |r: usize, c: usize| img[r * 4 + c];
        let rows_uniform = (0..4).all(|r| (0..4).all(|c| px(r, c) == px(r, 0)));
        let cols_uniform = (0..4).all(|c| (0..4).all(|r| px(r, c) == px(0, c)));
        assert!(rows_uniform || cols_uniform, "{img:?}");
    }
}

#[test]
fn independent_bias_gradient() {
    let h = [0.3, -1.1, 0.8];
    let net = BeliefNetwork::new(ActivationKind::Sigmoid, h.to_vec(), vec![], vec![0, 1, 2]).unwrap();
    let v = [1u8, 0, 1];
    for scheme in Scheme::ALL {
        let g = loglik_gradient(&net, &v, scheme, &SolverOptions::default()).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(g.biases[i], f64::from(v[i]) - sigmoid(h[i]), epsilon = 1e-12);
        }
    }
}

#[test]
fn true_loglik_of_independent_units() {
    let h = [0.5, -0.25, 1.5, 0.0];
    let net = BeliefNetwork::new(ActivationKind::Sigmoid, h.to_vec(), vec![], vec![1, 2, 3]).unwrap();
    let patterns = vec![vec![1, 0, 1], vec![0, 0, 0], vec![1, 1, 0]];
    let closed: f64 = patterns
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(k, &b)| {
                    let f = sigmoid(h[k + 1]);
                    if b == 1 { f.ln() } else { (1.0 - f).ln() }
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / 3.0;
    assert_abs_diff_eq!(true_loglik(&net, &patterns).unwrap(), closed, epsilon = 1e-13);
}

#[test]
fn true_loglik_single_pattern_is_clamped_partition() {
    let net = random_dag(
        &RandomNetSpec {
            n_units: 8,
            activation: ActivationKind::NoisyOr,
            scale: 1.0,
            edge_prob: 0.5,
            n_visible: 3,
        },
        4,
    )
    .unwrap();
    let p = vec![1u8, 0, 1];
    let ctx = ClampContext::clamped(&net, &p).unwrap();
    let ll = true_loglik(&net, std::slice::from_ref(&p)).unwrap();
    assert_abs_diff_eq!(ll, exact_log_partition(&ctx).unwrap(), epsilon = 1e-14);
    assert!(ll <= 0.0);
}

/// Mean-field ignores posterior correlations, which are first order in the weights, so the
/// gradient error shrinks with the weight scale; in the weak regime it stays within 2e-3.
#[test]
fn gradient_approximates_exact_log_likelihood_gradient_for_small_weights() {
    const H: f64 = 1e-5;
    let mut previous = f64::INFINITY;
    for scale in [1.0, 0.3, 0.1, 0.03] {
        let net = BeliefNetwork::new(
            ActivationKind::Sigmoid,
            vec![0.2, -0.3, 0.1, 0.4, -0.2],
            vec![
                Edge::new(2, 0, 0.1 * scale),
                Edge::new(3, 0, -0.15 * scale),
                Edge::new(3, 1, 0.12 * scale),
                Edge::new(4, 1, 0.08 * scale),
                Edge::new(4, 2, -0.1 * scale),
            ],
            vec![3, 4],
        )
        .unwrap();
        let v = [1u8, 0];
        let g = loglik_gradient(&net, &v, Scheme::G12, &SolverOptions::default()).unwrap();
        let weights: Vec<f64> = net.edges().iter().map(|e| e.weight).collect();
        let mut worst: f64 = 0.0;
        for k in 0..weights.len() {
            let ll = |d: f64| {
                let mut w = weights.clone();
                w[k] += d;
                log_likelihood(&net.with_parameters(&w, net.biases()).unwrap(), &v).unwrap()
            };
            worst = worst.max((g.weights[k] - (ll(H) - ll(-H)) / (2.0 * H)).abs());
        }
        assert!(worst < previous, "scale {scale}: {worst}");
        if scale <= 0.3 {
            assert!(worst <= 2e-3, "scale {scale}: {worst}");
        }
        previous = worst;
    }
}

fn small_config() -> TrainConfig {
    let mut cfg = TrainConfig::new(ActivationKind::Sigmoid);
    cfg.epochs = 5;
    cfg.learning_rate = 0.5;
    cfg
}

fn layered_start() -> BeliefNetwork {
    let mut edges = Vec::new();
    for child in 2..6 {
        for parent in 0..2 {
            edges.push(Edge::new(child, parent, 0.05 * (child as f64 - 2.0 * parent as f64 - 2.5)));
        }
    }
    BeliefNetwork::new(ActivationKind::Sigmoid, vec![0.0; 6], edges, vec![2, 3, 4, 5]).unwrap()
}

#[test]
fn zero_epochs_leaves_network_unchanged() {
    let net = layered_start();
    let data = bars_dataset(20, 2, 1).unwrap();
    let mut cfg = small_config();
    cfg.epochs = 0;
    let (trained, history) = train(&net, &data, &cfg).unwrap();
    assert_eq!(trained, net);
    assert_eq!(history.records.len(), 1);
    assert_eq!(history.records[0].epoch, 0);
    assert_abs_diff_eq!(history.records[0].mean_true_loglik, true_loglik(&net, &data).unwrap(), epsilon = 1e-14);
}

#[test]
fn training_is_deterministic() {
    let net = layered_start();
    let data = bars_dataset(40, 2, 3).unwrap();
    for batch in [Batch::Full, Batch::Size(7)] {
        let cfg = TrainConfig { batch, ..small_config() };
        let a = train(&net, &data, &cfg).unwrap();
        let b = train(&net, &data, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}

#[test]
fn training_improves_likelihood() {
    let net = layered_start();
    let mut data = vec![vec![1, 1, 0, 0]; 30];
    data.extend(vec![vec![0, 0, 1, 1]; 10]);
    let cfg = TrainConfig { epochs: 30, learning_rate: 1.0, ..small_config() };
    let (_, history) = train(&net, &data, &cfg).unwrap();
    let first = history.records.first().unwrap().mean_true_loglik;
    let last = history.records.last().unwrap().mean_true_loglik;
    assert!(last > first + 0.5, "{first} -> {last}");
    assert!(history.records.windows(2).all(|w| w[0].epoch < w[1].epoch));
}

/// Only biases learn on a weightless net, so each unit's firing probability should reach the
/// empirical frequency of its pixel.
#[test]
fn bias_only_learning_reaches_empirical_means() {
    for act in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        let h0 = match act {
            ActivationKind::Sigmoid => 0.0,
            ActivationKind::NoisyOr => 0.5,
        };
        let net = BeliefNetwork::new(act, vec![h0; 4], vec![], vec![0, 1, 2, 3]).unwrap();
        let data = bars_dataset(200, 2, 11).unwrap();
        let cfg = TrainConfig {
            epochs: 3000,
            learning_rate: 0.5,
            learn_weights: false,
            eval_every: 1000,
            ..TrainConfig::new(act)
        };
        let (trained, _) = train(&net, &data, &cfg).unwrap();
        for i in 0..4 {
            let empirical = data.iter().filter(|p| p[i] == 1).count() as f64 / data.len() as f64;
            assert_abs_diff_eq!(act.f(trained.bias(i)), empirical, epsilon = 1e-3);
        }
    }
}

#[test]
fn noisy_or_training_keeps_parameters_non_negative() {
    let mut edges = Vec::new();
    for child in 1..5 {
        edges.push(Edge::new(child, 0, 0.05));
    }
    let net = BeliefNetwork::new(ActivationKind::NoisyOr, vec![0.5; 5], edges, vec![1, 2, 3, 4]).unwrap();
    let data = bars_dataset(50, 2, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        learning_rate: 1.0,
        ..TrainConfig::new(ActivationKind::NoisyOr)
    };
    let (trained, history) = train(&net, &data, &cfg).unwrap();
    assert!(trained.edges().iter().all(|e| e.weight >= 0.0));
    assert!(trained.biases().iter().all(|&h| h > 0.0));
    assert!(history.records.iter().all(|r| r.mean_true_loglik.is_finite()));
}

#[test]
fn mismatched_pattern_length_rejected() {
    let net = layered_start();
    assert!(train(&net, &[vec![0, 1]], &small_config()).is_err());
    assert!(loglik_gradient(&net, &[0, 1, 1], Scheme::G11, &SolverOptions::default()).is_err());
}
