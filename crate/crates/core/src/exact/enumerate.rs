use crate::clamp::ClampContext;
use crate::error::{Error, Result};
use crate::net::{energy_of_values, BeliefNetwork, MeanVector};

/// Hard limit on the number of summed-over units.
pub const ENUMERATION_BOUND: usize = 24;
/// Above this many free units enumeration logs a warning.
pub const ENUMERATION_WARN: usize = 16;

pub(crate) fn check_bound(free: usize) -> Result<()> {
    if free > ENUMERATION_BOUND {
        return Err(Error::TooLarge {
            free,
            bound: ENUMERATION_BOUND,
        });
    }
    if free > ENUMERATION_WARN {
        log::warn!("enumerating 2^{free} states");
    }
    Ok(())
}

/// Calls `visit` once per assignment of the `free` units, with the remaining entries of
/// `base` left untouched. States are visited in binary-counter order (bit k of the counter
/// is unit `free[k]`), so every sum built on top of this is order-deterministic.
pub(crate) fn for_each_state(base: &[f64], free: &[usize], mut visit: impl FnMut(&[f64])) {
    let mut s = base.to_vec();
    for &i in free {
        s[i] = 0.0;
    }
    let total = 1u64 << free.len();
    for code in 0..total {
        if code > 0 {
            // code - 1 -> code: the trailing ones flip to zero and the next bit is set.
            let k = code.trailing_zeros() as usize;
            for &i in &free[..k] {
                s[i] = 0.0;
            }
            s[free[k]] = 1.0;
        }
        visit(&s);
    }
}

/// Base state for a clamp: pinned units at their observations, free units at zero.
pub(crate) fn clamp_base(ctx: &ClampContext<'_>) -> Vec<f64> {
    (0..ctx.net().n_units())
        .map(|i| ctx.pinned_value(i).map_or(0.0, f64::from))
        .collect()
}

/// Streaming `ln sum exp(x)` with a fixed accumulation order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// `ln Z` (unclamped) or `ln Z_c` (clamped) by summing over every free state.
pub fn exact_log_partition(ctx: &ClampContext<'_>) -> Result<f64> {
    exact_log_partition_gamma(ctx, 1.0)
}

/// `ln Z_gamma = ln sum_s exp(-gamma E(s))` over the free units of `ctx`.
pub fn exact_log_partition_gamma(ctx: &ClampContext<'_>, gamma: f64) -> Result<f64> {
    let free = ctx.free_units();
    check_bound(free.len())?;
    let net = ctx.net();
    let mut acc = LogSumExp::new();
    for_each_state(&clamp_base(ctx), &free, |s| {
        acc.add(-gamma * energy_of_values(net, s))
    });
    Ok(acc.value())
}

/// Posterior means of every unit given the clamp (pinned units report their observation).
pub fn exact_marginals(ctx: &ClampContext<'_>) -> Result<MeanVector> {
    let free = ctx.free_units();
    check_bound(free.len())?;
    let net = ctx.net();
    let ln_z = exact_log_partition(ctx)?;
    let mut means = vec![0.0; net.n_units()];
    for_each_state(&clamp_base(ctx), &free, |s| {
        let p = (-energy_of_values(net, s) - ln_z).exp();
        for &i in &free {
            means[i] += p * s[i];
        }
    });
    let mut u = clamp_base(ctx);
    const EDGE: f64 = 1e-15;
    for &i in &free {
        u[i] = means[i].clamp(EDGE, 1.0 - EDGE);
    }
    MeanVector::new(u, (0..net.n_units()).map(|i| ctx.pinned_value(i).is_some()).collect())
}

/// `sum_s g(s) prod_i u_i^s_i (1 - u_i)^(1 - s_i)` over the free entries of `u`; pinned
/// entries stay at their values. `g` receives the state as 0.0/1.0 values.
pub fn factorial_expectation(u: &MeanVector, g: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let free = u.free_indices();
    check_bound(free.len())?;
    let mut total = 0.0;
    for_each_state(u.values(), &free, |s| {
        total += factorial_weight(u, &free, s) * g(s);
    });
    Ok(total)
}

pub(crate) fn factorial_weight(u: &MeanVector, free: &[usize], s: &[f64]) -> f64 {
    free.iter()
        .map(|&i| if s[i] != 0.0 { u.get(i) } else { 1.0 - u.get(i) })
        .product()
}

/// `sum_i [u_i ln u_i + (1 - u_i) ln(1 - u_i)]` over free entries; this is `G(u, 0)`.
pub fn neg_entropy(u: &MeanVector) -> f64 {
    u.free_indices()
        .into_iter()
        .map(|i| {
            let x = u.get(i);
            x * x.ln() + (1.0 - x) * (1.0 - x).ln()
        })
        .sum()
}

/// Naive mean-field free energy `<E>_q + sum_i [u_i ln u_i + (1 - u_i) ln(1 - u_i)]` with the
/// expectation taken exactly under the factorial distribution `q` of `u`.
pub fn exact_ls(ctx: &ClampContext<'_>, u: &MeanVector) -> Result<f64> {
    if !ctx.matches(u) {
        return Err(Error::Config(
            "mean vector does not pin the clamp's units to its observations".into(),
        ));
    }
    let net = ctx.net();
    let mean_energy = factorial_expectation(u, |s| energy_of_values(net, s))?;
    Ok(mean_energy + neg_entropy(u))
}

/// Exact ln-likelihood `ln P(v)` of a pattern of visible values.
pub fn log_likelihood(net: &BeliefNetwork, pattern: &[u8]) -> Result<f64> {
    exact_log_partition(&ClampContext::clamped(net, pattern)?)
}
