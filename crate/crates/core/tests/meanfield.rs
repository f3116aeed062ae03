use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use mfbn::activation::{sigmoid, ActivationKind};
use mfbn::exact::{exact_log_partition, factorial_expectation};
use mfbn::format::read_network;
use mfbn::harness::{random_clamp_and_means, random_dag, relative_error, RandomNetSpec};
use mfbn::meanfield::{
    central_moment_x, error_metric, evaluate, g_coefficient, objective, solve_fixed_point,
    Descent, Scheme, SolverOptions,
};
use mfbn::net::{energy, mean_field_input, taylor_energy};
use mfbn::{BeliefNetwork, ClampContext, MeanVector, State};

fn dag(seed: u64, n: usize, activation: ActivationKind, scale: f64, n_visible: usize) -> BeliefNetwork {
    random_dag(
        &RandomNetSpec {
            n_units: n,
            activation,
            scale,
            edge_prob: 0.6,
            n_visible,
        },
        seed,
    )
    .unwrap()
}

fn fixtures() -> Vec<(String, BeliefNetwork, Scheme)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let scheme: Scheme = name.rsplit('_').next().unwrap().parse().unwrap();
            (name, read_network(&p).unwrap(), scheme)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn plain() -> SolverOptions {
    SolverOptions {
        descent: Descent::Off,
        ..Default::default()
    }
}

#[test]
fn second_moment_matches_enumeration() {
    for seed in 0..10 {
        let net = dag(seed, 4, ActivationKind::Sigmoid, 2.0, 0);
        let (_, u) = random_clamp_and_means(&net, seed).unwrap();
        for i in 0..4 {
            let x2 = factorial_expectation(&u, |s| {
                let x: f64 = net.parents(i).iter().map(|e| e.weight * (s[e.parent] - u.get(e.parent))).sum();
                x * x
            })
            .unwrap();
            assert_abs_diff_eq!(central_moment_x(&net, &u, i, 2).unwrap(), x2, epsilon = 1e-12);
            assert_abs_diff_eq!(central_moment_x(&net, &u, i, 1).unwrap(), 0.0, epsilon = 1e-15);
        }
    }
}

#[test]
fn second_coefficient_is_curvature_of_log_score() {
    const H: f64 = 1e-4;
    for act in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        for seed in 0..10 {
            let net = dag(seed, 5, act, 1.5, 0);
            let (_, u) = random_clamp_and_means(&net, seed).unwrap();
            for i in 0..5 {
                let m = mean_field_input(&net, &u, i);
                let ui = u.get(i);
                let g0 = |x: f64| {
                    let (lf, l1f) = act.log_probs(x);
                    ui * lf + (1.0 - ui) * l1f
                };
                let fd = (g0(m + H) - 2.0 * g0(m) + g0(m - H)) / (H * H);
                assert!(relative_error(g_coefficient(&net, &u, i, 2).unwrap(), fd) < 1e-6);
                let fd1 = (g0(m + H) - g0(m - H)) / (2.0 * H);
                assert!(relative_error(g_coefficient(&net, &u, i, 1).unwrap(), fd1) < 1e-6);
            }
        }
    }
}

#[test]
fn g12_subtracts_half_curvature_times_variance() {
    for act in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        for seed in 0..10 {
            let net = dag(seed, 6, act, 2.0, 2);
            let (_, u) = random_clamp_and_means(&net, seed).unwrap();
            let correction: f64 = (0..6)
                .map(|i| 0.5 * g_coefficient(&net, &u, i, 2).unwrap() * central_moment_x(&net, &u, i, 2).unwrap())
                .sum();
            let g11 = objective(&net, &u, Scheme::G11).unwrap();
            let g12 = objective(&net, &u, Scheme::G12).unwrap();
            assert_abs_diff_eq!(g12, g11 - correction, epsilon = 1e-12);
        }
    }
}

/// The order-2 expansion misses the true energy by `O(beta^3)`: halving beta divides the
/// remainder by about 8 once beta is small.
#[test]
fn taylor_remainder_is_third_order() {
    for act in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        for seed in 0..6 {
            let net = dag(seed, 5, act, 1.5, 0);
            let (_, u) = random_clamp_and_means(&net, seed).unwrap();
            let state = State::from_code(seed * 7 + 3, 5);
            let beta_energy = |beta: f64| -> f64 {
                let s = state.as_f64();
                (0..5)
                    .map(|i| {
                        let x: f64 = net.parents(i).iter().map(|e| e.weight * (s[e.parent] - u.get(e.parent))).sum();
                        let (lf, l1f) = act.log_probs(mean_field_input(&net, &u, i) + beta * x);
                        -(s[i] * lf + (1.0 - s[i]) * l1f)
                    })
                    .sum()
            };
            assert_abs_diff_eq!(beta_energy(1.0), energy(&net, &state), epsilon = 1e-12);
            let rem = |beta: f64| (beta_energy(beta) - taylor_energy(&net, &u, &state, beta, 2).unwrap()).abs();
            let (r1, r2) = (rem(0.02), rem(0.01));
            if r1 > 1e-11 {
                let ratio = r1 / r2;
                assert!((6.0..10.0).contains(&ratio), "ratio {ratio} for seed {seed}");
            }
            let first = |beta: f64| (beta_energy(beta) - taylor_energy(&net, &u, &state, beta, 1).unwrap()).abs();
            assert!(first(0.01) >= r2);
        }
    }
}

#[test]
fn independent_units_converge_immediately_to_exact_answer() {
    for act in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        let net = BeliefNetwork::new(act, vec![0.7, 0.2, 1.1, 0.4], vec![], vec![3]).unwrap();
        let ctx = ClampContext::clamped(&net, &[1]).unwrap();
        let ln_z = exact_log_partition(&ctx).unwrap();
        for scheme in Scheme::ALL {
            let res = solve_fixed_point(&net, &ctx, scheme, &SolverOptions::default()).unwrap();
            assert!(res.converged && res.iterations <= 2, "{scheme}: {res:?}");
            for i in 0..3 {
                assert_abs_diff_eq!(res.u.get(i), act.f(net.bias(i)), epsilon = 1e-12);
            }
            assert_abs_diff_eq!(error_metric(res.objective, ln_z).unwrap(), 0.0, epsilon = 1e-10);
        }
    }
}

/// The stationarity condition of the sigmoid `Ĝ12` written out by hand:
/// `logit u_k = M̄_k + sum over children i of w_ik [u_i - σ(M̄_i)]
///  + 1/2 sum_i [σ''(M̄_i) w_ik ... ]`, checked here through a finite difference of `Ĝ12`
/// minus the entropy rather than through the library's own gradient.
#[test]
fn sigmoid_g12_fixed_point_satisfies_stationarity() {
    const H: f64 = 1e-6;
    for seed in 0..20 {
        let net = dag(seed, 7, ActivationKind::Sigmoid, 1.0, 3);
        let (ctx, _) = random_clamp_and_means(&net, seed).unwrap();
        let res = solve_fixed_point(&net, &ctx, Scheme::G12, &SolverOptions::default()).unwrap();
        assert!(res.converged);
        for k in res.u.free_indices() {
            let shifted = |d: f64| {
                let mut v = res.u.values().to_vec();
                v[k] += d;
                let u = res.u.with_free_values(&v).unwrap();
                let uk = u.get(k);
                objective(&net, &u, Scheme::G12).unwrap()
                    - (uk * uk.ln() + (1.0 - uk) * (1.0 - uk).ln())
            };
            let energy_slope = (shifted(H) - shifted(-H)) / (2.0 * H);
            let uk = res.u.get(k);
            let predicted = sigmoid(-energy_slope);
            assert!((uk - predicted).abs() < 1e-6, "seed {seed} unit {k}: {uk} vs {predicted}");
        }
        let ev = evaluate(&net, &res.u, Scheme::G12).unwrap();
        for k in res.u.free_indices() {
            assert!(ev.du[k].abs() < 1e-6);
        }
    }
}

#[test]
fn solver_never_moves_pinned_units() {
    for seed in 0..20 {
        let act = if seed % 2 == 0 { ActivationKind::Sigmoid } else { ActivationKind::NoisyOr };
        let net = dag(seed, 8, act, 3.0, 4);
        let (ctx, _) = random_clamp_and_means(&net, seed).unwrap();
        for scheme in Scheme::ALL {
            let res = solve_fixed_point(&net, &ctx, scheme, &SolverOptions::default()).unwrap();
            assert!(ctx.matches(&res.u));
        }
    }
}

/// Re-solving after a small bias change moves `Ĝ` by the frozen-`u` parameter gradient.
#[test]
fn envelope_property() {
    const H: f64 = 1e-5;
    for seed in 0..10 {
        let net = dag(seed, 6, ActivationKind::Sigmoid, 1.0, 2);
        let values = vec![1, 0];
        let opts = SolverOptions { tol: 1e-12, ..Default::default() };
        let solve = |n: &BeliefNetwork| {
            let ctx = ClampContext::clamped(n, &values).unwrap();
            let r = solve_fixed_point(n, &ctx, Scheme::G12, &opts).unwrap();
            assert!(r.converged);
            r
        };
        let base = solve(&net);
        let ev = evaluate(&net, &base.u, Scheme::G12).unwrap();
        for i in 0..net.n_units() {
            let shifted = |d: f64| {
                let mut n = net.clone();
                n.set_bias(i, net.bias(i) + d);
                solve(&n).objective
            };
            let total = (shifted(H) - shifted(-H)) / (2.0 * H);
            assert_abs_diff_eq!(total, ev.dh[i], epsilon = 1e-5);
        }
    }
}

#[test]
fn curated_nets_oscillate_under_plain_iteration() {
    let list = fixtures();
    assert!(list.len() >= 5);
    for (name, net, scheme) in &list {
        let ctx = ClampContext::zeros(net);
        let opts = SolverOptions { max_restarts: 0, ..plain() };
        let res = solve_fixed_point(net, &ctx, *scheme, &opts).unwrap();
        assert!(!res.converged, "{name} converged without restarts: {res:?}");
        assert!(res.cycles_detected >= 1, "{name}: {res:?}");
    }
}

#[test]
fn curated_nets_converge_after_restart() {
    for (name, net, scheme) in fixtures() {
        let ctx = ClampContext::zeros(&net);
        let res = solve_fixed_point(&net, &ctx, scheme, &plain()).unwrap();
        assert!(res.converged, "{name}: {res:?}");
        assert!(res.cycles_detected >= 1 && res.restarts >= 1, "{name}: {res:?}");
        assert!(!res.guarded);
        let ev = evaluate(&net, &res.u, scheme).unwrap();
        for k in res.u.free_indices() {
            let step = (sigmoid(logit(res.u.get(k)) - ev.du[k]) - res.u.get(k)).abs();
            assert!(step <= 1e-7, "{name} unit {k}: residual step {step}");
        }
    }
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

#[test]
fn starting_point_does_not_change_a_unique_fixed_point() {
    let net = dag(5, 8, ActivationKind::Sigmoid, 0.5, 3);
    let ctx = ClampContext::clamped(&net, &[0, 1, 1]).unwrap();
    let a = solve_fixed_point(&net, &ctx, Scheme::G22, &SolverOptions::default()).unwrap();
    let b = solve_fixed_point(
        &net,
        &ctx,
        Scheme::G22,
        &SolverOptions {
            init: mfbn::meanfield::Init::ForwardPass,
            ..Default::default()
        },
    )
    .unwrap();
    for i in 0..net.n_units() {
        assert_abs_diff_eq!(a.u.get(i), b.u.get(i), epsilon = 1e-7);
    }
}

#[test]
fn mean_vectors_stay_inside_the_unit_interval() {
    let net = dag(2, 6, ActivationKind::Sigmoid, 8.0, 2);
    let ctx = ClampContext::clamped(&net, &[1, 1]).unwrap();
    for scheme in Scheme::ALL {
        let res = solve_fixed_point(&net, &ctx, scheme, &SolverOptions::default()).unwrap();
        for i in res.u.free_indices() {
            assert!(res.u.get(i) > 0.0 && res.u.get(i) < 1.0);
        }
        let _ = MeanVector::new(res.u.values().to_vec(), res.u.pinned().to_vec()).unwrap();
    }
}
