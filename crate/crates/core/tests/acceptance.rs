//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//! Run with `cargo test -p mfbn-core --test acceptance`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mfbn::exact::{
    covariance_and_hessian_check, exact_log_partition, exact_ls, factorial_expectation,
    gibbs_free_energy, oracle_objective,
};
use mfbn::format::read_network;
use mfbn::harness::{
    gradient_deviation, random_clamp_and_means, random_dag, run_learning, run_noisyor_table,
    run_sigmoid_table, ClampLabel, ErrorStats, ExperimentConfig, LearningConfig, RandomNetSpec,
};
use mfbn::meanfield::{evaluate, objective, solve_fixed_point, Descent, Scheme, SolverOptions};
use mfbn::net::energy;
use mfbn::{ActivationKind, BeliefNetwork, ClampContext, MeanVector, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACTIVATIONS: [ActivationKind; 2] = [ActivationKind::Sigmoid, ActivationKind::NoisyOr];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Random DAG with `n` units, weights drawn at one of three scales.
fn net(seed: u64, n: usize, activation: ActivationKind) -> BeliefNetwork {
    let scale = [0.5, 2.0, 5.0][(seed % 3) as usize];
    random_dag(
        &RandomNetSpec {
            n_units: n,
            activation,
            scale,
            edge_prob: 0.6,
            n_visible: (seed as usize / 3) % (n / 2 + 1),
        },
        seed,
    )
    .expect("valid spec")
}

fn size(seed: u64, max: usize) -> usize {
    2 + (seed as usize * 7919) % (max - 1)
}

fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for act in ACTIVATIONS {
        for seed in 0..100 {
            let n = net(seed, size(seed, 12), act);
            worst = worst.max(exact_log_partition(&ClampContext::unclamped(&n)).unwrap().abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |ln Z| {worst:.2e} over 200 nets (tol 1e-9)"))
}

fn first_order_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for act in ACTIVATIONS {
        for seed in 0..200 {
            let n = net(seed, size(seed, 10), act);
            let (_, u) = random_clamp_and_means(&n, seed).unwrap();
            for scheme in [Scheme::G11, Scheme::G12] {
                let d = objective(&n, &u, scheme).unwrap() - oracle_objective(&n, &u, scheme).unwrap();
                worst = worst.max(d.abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} over 400 pairs (tol 1e-9)"))
}

fn second_order_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for act in ACTIVATIONS {
        for seed in 0..200 {
            let n = net(seed, size(seed, 10), act);
            let (_, u) = random_clamp_and_means(&n, seed).unwrap();
            let d = objective(&n, &u, Scheme::G22).unwrap() - oracle_objective(&n, &u, Scheme::G22).unwrap();
            worst = worst.max(d.abs());
        }
    }
    outcome(worst <= 1e-8, format!("max deviation {worst:.2e} over 400 pairs (tol 1e-8)"))
}

fn sandwich() -> Outcome {
    let (mut slack, mut ls_dev, mut unconverged) = (0.0f64, 0.0f64, 0);
    for seed in 0..50u64 {
        let act = ACTIVATIONS[(seed % 2) as usize];
        let n = net(seed, size(seed, 8), act);
        let (ctx, _) = random_clamp_and_means(&n, seed).unwrap();
        let neg_ln_z = -exact_log_partition(&ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let free: Vec<f64> = (0..ctx.n_free()).map(|_| rng.random_range(0.05..0.95)).collect();
            let u = ctx.mean_vector_from(&free).unwrap();
            let g1 = gibbs_free_energy(&ctx, &u, 1.0).unwrap();
            let g0 = gibbs_free_energy(&ctx, &u, 0.0).unwrap();
            if !(g1.converged && g0.converged) {
                unconverged += 1;
                continue;
            }
            let mean_e = factorial_expectation(&u, |s| {
                energy(&n, &State::new(s.iter().map(|&x| x as u8).collect()).unwrap())
            })
            .unwrap();
            let upper = g0.value + mean_e;
            slack = slack.max(neg_ln_z - g1.value).max(g1.value - upper);
            ls_dev = ls_dev.max((upper - exact_ls(&ctx, &u).unwrap()).abs());
        }
    }
    outcome(
        slack <= 1e-7 && ls_dev <= 1e-10 && unconverged == 0,
        format!(
            "worst violation {slack:.2e} (tol 1e-7), ls identity {ls_dev:.2e} (tol 1e-10), \
             {unconverged} unconverged inversions, 250 points"
        ),
    )
}

fn hessian_identity() -> Outcome {
    let (mut worst, mut min_eig) = (0.0f64, f64::INFINITY);
    for seed in 0..20u64 {
        let n = net(seed, size(seed, 6), ACTIVATIONS[(seed % 2) as usize]);
        let (ctx, u) = random_clamp_and_means(&n, seed).unwrap();
        if ctx.n_free() == 0 {
            let u = MeanVector::free(vec![0.4; n.n_units()]).unwrap();
            let rep = covariance_and_hessian_check(&ClampContext::unclamped(&n), &u, 1.0).unwrap();
            worst = worst.max(rep.identity_error);
            min_eig = min_eig.min(rep.min_eigenvalue);
            continue;
        }
        let rep = covariance_and_hessian_check(&ctx, &u, 1.0).unwrap();
        worst = worst.max(rep.identity_error);
        min_eig = min_eig.min(rep.min_eigenvalue);
    }
    outcome(
        worst <= 1e-4 && min_eig > 0.0,
        format!("max |BH - I| {worst:.2e} (tol 1e-4), smallest Hessian eigenvalue {min_eig:.3e}"),
    )
}

fn gradient_checks() -> Outcome {
    let (mut du, mut dp) = (0.0f64, 0.0f64);
    for act in ACTIVATIONS {
        for seed in 0..50 {
            let n = net(seed, size(seed, 10), act);
            let (_, u) = random_clamp_and_means(&n, seed).unwrap();
            for scheme in Scheme::ALL {
                let (a, b) = gradient_deviation(&n, &u, scheme).unwrap();
                du = du.max(a);
                dp = dp.max(b);
            }
        }
    }
    outcome(
        du <= 1e-5 && dp <= 1e-5,
        format!("max relative error: means {du:.2e}, parameters {dp:.2e} (tol 1e-5)"),
    )
}

struct Tables {
    sigmoid_small: ErrorStats,
    sigmoid_large: ErrorStats,
    noisy_small: ErrorStats,
    noisy_large: ErrorStats,
    sigmoid_time: Duration,
    noisy_time: Duration,
}

fn run_tables() -> Tables {
    let start = Instant::now();
    let sigmoid_small = run_sigmoid_table(&ExperimentConfig::sigmoid(1.0)).unwrap().1;
    let sigmoid_large = run_sigmoid_table(&ExperimentConfig::sigmoid(5.0)).unwrap().1;
    let sigmoid_time = start.elapsed();
    let start = Instant::now();
    let noisy_small = run_noisyor_table(&ExperimentConfig::noisy_or(0.0, 0.25)).unwrap().1;
    let noisy_large = run_noisyor_table(&ExperimentConfig::noisy_or(0.2, 0.8)).unwrap().1;
    Tables {
        sigmoid_small,
        sigmoid_large,
        noisy_small,
        noisy_large,
        sigmoid_time,
        noisy_time: start.elapsed(),
    }
}

fn mean(stats: &ErrorStats, scheme: Scheme, clamp: ClampLabel) -> f64 {
    stats.get(scheme, clamp).expect("cell present").mean_err
}

/// Compares each cell with its reference; returns (all within, report).
fn compare(rows: &[(&str, &ErrorStats, ClampLabel, Scheme, f64, f64)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(label, stats, clamp, scheme, reference, tol) in rows {
        let cell = stats.get(scheme, clamp).expect("cell present");
        let hit = (cell.mean_err - reference).abs() <= tol;
        ok &= hit;
        parts.push(format!(
            "{label} {scheme} {:+.4} vs {reference:+.4}±{tol}{}{}",
            cell.mean_err,
            if cell.unconverged > 0 { format!(" ({} unconverged)", cell.unconverged) } else { String::new() },
            if hit { "" } else { " MISS" }
        ));
    }
    (ok, parts.join("; "))
}

fn table_one(t: &Tables) -> Outcome {
    let z = ClampLabel::Zeros;
    let (ok, report) = compare(&[
        ("small", &t.sigmoid_small, z, Scheme::G11, -0.0404, 0.01),
        ("small", &t.sigmoid_small, z, Scheme::G12, 0.0155, 0.01),
        ("small", &t.sigmoid_small, z, Scheme::G22, 0.0029, 0.01),
        ("large", &t.sigmoid_large, z, Scheme::G11, -0.0440, 0.02),
        ("large", &t.sigmoid_large, z, Scheme::G12, 0.0231, 0.02),
        ("large", &t.sigmoid_large, z, Scheme::G22, -0.0456, 0.02),
    ]);
    let fast = t.sigmoid_time < Duration::from_secs(600);
    outcome(ok && fast, format!("{report}; {:.0?} (limit 10 min)", t.sigmoid_time))
}

fn table_two(t: &Tables) -> Outcome {
    let (mx, mn) = (ClampLabel::Max, ClampLabel::Min);
    let (s, l) = (&t.noisy_small, &t.noisy_large);
    let (ok, report) = compare(&[
        ("[0,0.25] max", s, mx, Scheme::G11, 0.001, 0.02),
        ("[0,0.25] max", s, mx, Scheme::G12, 0.028, 0.02),
        ("[0,0.25] max", s, mx, Scheme::G22, 0.445, 0.08),
        ("[0,0.25] min", s, mn, Scheme::G11, -0.061, 0.02),
        ("[0,0.25] min", s, mn, Scheme::G12, 0.011, 0.02),
        ("[0,0.25] min", s, mn, Scheme::G22, 0.320, 0.08),
        ("[0.2,0.8] max", l, mx, Scheme::G11, -0.156, 0.02),
        ("[0.2,0.8] max", l, mx, Scheme::G12, 0.052, 0.02),
        ("[0.2,0.8] max", l, mx, Scheme::G22, 0.090, 0.08),
        ("[0.2,0.8] min", l, mn, Scheme::G11, -0.029, 0.02),
        ("[0.2,0.8] min", l, mn, Scheme::G12, 0.015, 0.02),
        ("[0.2,0.8] min", l, mn, Scheme::G22, 0.211, 0.08),
    ]);
    let fast = t.noisy_time < Duration::from_secs(900);
    outcome(ok && fast, format!("{report}; {:.0?} (limit 15 min)", t.noisy_time))
}

fn orderings(t: &Tables) -> Outcome {
    let abs = |s: &ErrorStats, scheme, clamp| mean(s, scheme, clamp).abs();
    let z = ClampLabel::Zeros;
    let mut checks = vec![(
        "sigmoid small: |G22| < |G12|".to_string(),
        abs(&t.sigmoid_small, Scheme::G22, z) < abs(&t.sigmoid_small, Scheme::G12, z),
    )];
    checks.push((
        "sigmoid large: |G12| < |G22|".to_string(),
        abs(&t.sigmoid_large, Scheme::G12, z) < abs(&t.sigmoid_large, Scheme::G22, z),
    ));
    for (name, stats) in [("noisy-or [0,0.25]", &t.noisy_small), ("noisy-or [0.2,0.8]", &t.noisy_large)] {
        for clamp in [ClampLabel::Max, ClampLabel::Min] {
            checks.push((
                format!("{name} {}: |G12| < |G22|", clamp.name()),
                abs(stats, Scheme::G12, clamp) < abs(stats, Scheme::G22, clamp),
            ));
        }
    }
    let ok = checks.iter().all(|c| c.1);
    let report: Vec<String> = checks
        .iter()
        .map(|(l, hit)| format!("{l} {}", if *hit { "holds" } else { "FAILS" }))
        .collect();
    outcome(ok, report.join("; "))
}

fn learning() -> Outcome {
    let start = Instant::now();
    let cfg = LearningConfig::bars(ActivationKind::Sigmoid);
    let (_, history) = run_learning(&cfg, None).unwrap();
    let elapsed = start.elapsed();
    let records = &history.records;
    let first = records.first().unwrap().mean_true_loglik;
    let last = records.last().unwrap().mean_true_loglik;
    let late: Vec<_> = records.iter().filter(|r| r.epoch >= 10).collect();
    let increasing = late.windows(2).all(|w| w[1].mean_true_loglik > w[0].mean_true_loglik);
    let gain = last - first;
    outcome(
        increasing && gain >= 0.5 && elapsed < Duration::from_secs(1200) && records.last().unwrap().epoch == 100,
        format!(
            "{first:.4} -> {last:.4} nats/pattern (gain {gain:.3}, need 0.5), strictly increasing \
             after epoch 10: {increasing}, {:.0?} (limit 20 min)",
            elapsed
        ),
    )
}

fn cycle_heuristic() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    let plain = SolverOptions {
        descent: Descent::Off,
        ..Default::default()
    };
    let (mut oscillating, mut resolved) = (0, 0);
    let mut misses = Vec::new();
    for path in &names {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let scheme: Scheme = name.rsplit('_').next().unwrap().parse().unwrap();
        let n = read_network(path).unwrap();
        let ctx = ClampContext::zeros(&n);
        let without = solve_fixed_point(&n, &ctx, scheme, &SolverOptions { max_restarts: 0, ..plain.clone() }).unwrap();
        if !without.converged && without.cycles_detected > 0 {
            oscillating += 1;
        } else {
            misses.push(format!("{name} does not oscillate persistently"));
        }
        let with = solve_fixed_point(&n, &ctx, scheme, &plain).unwrap();
        let ev = evaluate(&n, &with.u, scheme).unwrap();
        let order_one = with.u.free_indices().iter().all(|&k| {
            let u = with.u.get(k);
            let next = mfbn::activation::sigmoid((u / (1.0 - u)).ln() - ev.du[k]);
            (next - u).abs() <= 1e-7
        });
        if with.converged && with.restarts > 0 && order_one {
            resolved += 1;
        } else {
            misses.push(format!("{name} not resolved by restart"));
        }
    }
    let total = names.len();
    outcome(
        total >= 5 && oscillating == total && resolved == total,
        format!(
            "{resolved}/{total} curated nets reach an order-1 fixed point after restart, \
             {oscillating}/{total} oscillate without it{}",
            if misses.is_empty() { String::new() } else { format!(" ({})", misses.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut timed = |id: u32, name: &'static str, f: &dyn Fn() -> Outcome, limit: Option<Duration>| {
        let start = Instant::now();
        let mut o = f();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > limit {
                o.passed = false;
                o.detail.push_str(&format!("; took {took:.1?}, limit {limit:?}"));
            }
        }
        let line = format!("{} criterion {id:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        println!("{line}");
        results.push((id, name, o, took));
    };
    timed(1, "normalization", &normalization, Some(Duration::from_secs(10)));
    timed(2, "first-order oracle", &first_order_oracle, Some(Duration::from_secs(60)));
    timed(3, "second-order oracle", &second_order_oracle, Some(Duration::from_secs(120)));
    timed(4, "variational sandwich", &sandwich, None);
    timed(5, "hessian identity", &hessian_identity, None);
    timed(6, "gradient checks", &gradient_checks, None);
    let tables = run_tables();
    timed(7, "sigmoid error table", &|| table_one(&tables), None);
    timed(8, "noisy-or error table", &|| table_two(&tables), None);
    timed(9, "scheme orderings", &|| orderings(&tables), None);
    timed(10, "bars learning", &learning, None);
    timed(11, "oscillation restart", &cycle_heuristic, None);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
