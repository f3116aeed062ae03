use serde::Serialize;

use crate::activation::ActivationKind;
use crate::clamp::ClampContext;
use crate::error::Result;
use crate::exact::{
    covariance_and_hessian_check, exact_log_partition, exact_ls, factorial_expectation,
    gibbs_free_energy, oracle_objective,
};
use crate::meanfield::{
    evaluate, objective, objective_with_flipped_second_order, solve_fixed_point, Scheme,
    SolverOptions,
};
use crate::net::{energy_of_values, BeliefNetwork, MeanVector};

use super::random::{random_clamp_and_means, random_dag, RandomNetSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    /// Largest network drawn (number of units).
    pub size_bound: usize,
    /// Random networks per property and activation.
    pub cases: usize,
    pub seed: u64,
    /// Replace `Ĝ12` by a variant with the second-order sign flipped, to show the oracle
    /// checks catch it.
    pub mutation: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            size_bound: 8,
            cases: 20,
            seed: 0,
            mutation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub name: &'static str,
    pub tolerance: f64,
    pub cases: usize,
    pub failures: usize,
    /// Largest deviation seen (same units as `tolerance`).
    pub max_deviation: f64,
    /// Seeds of failing cases, for reproduction.
    pub failing_seeds: Vec<u64>,
}

impl PropertyReport {
    fn new(name: &'static str, tolerance: f64) -> Self {
        PropertyReport {
            name,
            tolerance,
            cases: 0,
            failures: 0,
            max_deviation: 0.0,
            failing_seeds: Vec::new(),
        }
    }

    fn record(&mut self, seed: u64, deviation: f64) {
        self.cases += 1;
        self.max_deviation = self.max_deviation.max(deviation);
        if !(deviation <= self.tolerance) {
            self.failures += 1;
            self.failing_seeds.push(seed);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub properties: Vec<PropertyReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }
}

/// `|a - b| / max(|a|, |b|, 1)`: relative for large values, absolute near zero.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn spec_for(seed: u64, bound: usize, activation: ActivationKind) -> RandomNetSpec {
    let n_units = 2 + (seed as usize % (bound.max(3) - 1));
    RandomNetSpec {
        n_units,
        activation,
        scale: if seed % 2 == 0 { 1.0 } else { 3.0 },
        edge_prob: 0.6,
        n_visible: (seed as usize / 3) % (n_units / 2 + 1),
    }
}

fn value(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme, mutation: bool) -> Result<f64> {
    if mutation && scheme == Scheme::G12 {
        objective_with_flipped_second_order(net, u, scheme)
    } else {
        objective(net, u, scheme)
    }
}

/// Central-difference check of `dĜ/du` and `dĜ/d(w, h)`; returns the worst relative error
/// over both.
pub fn gradient_deviation(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme) -> Result<(f64, f64)> {
    const H: f64 = 1e-6;
    let ev = evaluate(net, u, scheme)?;
    let mut worst_u: f64 = 0.0;
    for i in u.free_indices() {
        let mut plus = u.values().to_vec();
        let mut minus = plus.clone();
        plus[i] += H;
        minus[i] -= H;
        let fp = objective(net, &u.with_free_values(&plus)?, scheme)?;
        let fm = objective(net, &u.with_free_values(&minus)?, scheme)?;
        worst_u = worst_u.max(relative_error(ev.du[i], (fp - fm) / (2.0 * H)));
    }
    let weights: Vec<f64> = net.edges().iter().map(|e| e.weight).collect();
    let biases = net.biases().to_vec();
    let mut worst_p: f64 = 0.0;
    for k in 0..weights.len() + biases.len() {
        let shifted = |d: f64| -> Result<f64> {
            let (mut w, mut h) = (weights.clone(), biases.clone());
            if k < w.len() {
                w[k] += d;
            } else {
                h[k - w.len()] += d;
            }
            objective(&net.with_parameters(&w, &h)?, u, scheme)
        };
        let fd = (shifted(H)? - shifted(-H)?) / (2.0 * H);
        let analytic = if k < weights.len() { ev.dw[k] } else { ev.dh[k - weights.len()] };
        worst_p = worst_p.max(relative_error(analytic, fd));
    }
    Ok((worst_u, worst_p))
}

/// Runs every oracle property over seeded random networks of both activations.
pub fn run_validation_suite(config: &ValidationConfig) -> Result<ValidationReport> {
    let bound = config.size_bound.max(3);
    let mut norm = PropertyReport::new("normalization", 1e-9);
    let mut first = PropertyReport::new("first_order_oracle", 1e-9);
    let mut second = PropertyReport::new("second_order_oracle", 1e-8);
    let mut sandwich = PropertyReport::new("sandwich", 1e-7);
    let mut ls = PropertyReport::new("ls_identity", 1e-10);
    let mut hessian = PropertyReport::new("hessian_identity", 1e-4);
    let mut grad_u = PropertyReport::new("gradient_means", 1e-5);
    let mut grad_p = PropertyReport::new("gradient_params", 1e-5);
    let mut pinned = PropertyReport::new("pinned_units_fixed", 0.0);

    for activation in [ActivationKind::Sigmoid, ActivationKind::NoisyOr] {
        for case in 0..config.cases as u64 {
            let seed = config.seed.wrapping_mul(1_000_003).wrapping_add(case);
            let spec = spec_for(seed, bound, activation);
            let net = random_dag(&spec, seed)?;

            let ln_z = exact_log_partition(&ClampContext::unclamped(&net))?;
            norm.record(seed, ln_z.abs());

            let (ctx, u) = random_clamp_and_means(&net, seed)?;
            for scheme in [Scheme::G11, Scheme::G12] {
                let got = value(&net, &u, scheme, config.mutation)?;
                first.record(seed, (got - oracle_objective(&net, &u, scheme)?).abs());
            }
            let g22 = objective(&net, &u, Scheme::G22)?;
            second.record(seed, (g22 - oracle_objective(&net, &u, Scheme::G22)?).abs());

            let neg_ln_zc = -exact_log_partition(&ctx)?;
            let g1 = gibbs_free_energy(&ctx, &u, 1.0)?;
            let g0 = gibbs_free_energy(&ctx, &u, 0.0)?;
            let mean_energy = factorial_expectation(&u, |s| energy_of_values(&net, s))?;
            let upper = g0.value + mean_energy;
            let violation = (neg_ln_zc - g1.value).max(g1.value - upper).max(0.0);
            sandwich.record(
                seed,
                if g1.converged && g0.converged { violation } else { f64::INFINITY },
            );
            ls.record(seed, (upper - exact_ls(&ctx, &u)?).abs());

            if ctx.n_free() <= 6 {
                let rep = covariance_and_hessian_check(&ctx, &u, 1.0)?;
                let dev = if rep.min_eigenvalue > 0.0 { rep.identity_error } else { f64::INFINITY };
                hessian.record(seed, dev);
            }

            for scheme in Scheme::ALL {
                let (du, dp) = gradient_deviation(&net, &u, scheme)?;
                grad_u.record(seed, du);
                grad_p.record(seed, dp);
            }

            let res = solve_fixed_point(&net, &ctx, Scheme::G12, &SolverOptions::default())?;
            let moved = net
                .visible()
                .iter()
                .map(|&v| (res.u.get(v) - u.get(v)).abs())
                .fold(0.0, f64::max);
            pinned.record(seed, moved);
        }
    }
    Ok(ValidationReport {
        properties: vec![norm, first, second, sandwich, ls, hessian, grad_u, grad_p, pinned],
    })
}
