use std::collections::VecDeque;

use crate::activation::sigmoid;
use crate::clamp::ClampContext;
use crate::error::{Error, Result};
use crate::net::{BeliefNetwork, MeanVector};

use super::objective::{evaluate_with, Request};
use super::Scheme;

/// Free means are kept inside `[MEAN_EDGE, 1 - MEAN_EDGE]`.
pub const MEAN_EDGE: f64 = 1e-9;

/// Consecutive guarded sweeps with a sub-tolerance step but a non-zero residual after which
/// the solve is abandoned.
const STALL_SWEEPS: usize = 50;

/// Starting point of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Every free unit at 0.5.
    UniformHalf,
    /// `u_i = f(M̄_i)` computed top-down.
    ForwardPass,
    /// A full-length vector; pinned entries are ignored.
    Given(Vec<f64>),
}

/// When coordinate updates are required to lower Ĝ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descent {
    /// Plain fixed-point iteration with oscillation restarts only.
    Off,
    /// Switch to guarded updates once a restart fails to break an oscillation, or after a
    /// tenth of `max_iter` sweeps without convergence.
    Fallback,
    /// Guarded updates from the first sweep.
    Always,
}

/// Order in which free units are updated within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// One unit at a time in topological order, each seeing the latest values.
    Sequential,
    /// All units from the previous sweep's values.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm step (and residual) tolerance.
    pub tol: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
    pub init: Init,
    /// `u <- (1 - damping) * update + damping * u`.
    pub damping: f64,
    /// Period of the oscillation being watched for.
    pub cycle_window: usize,
    pub cycle_tol: f64,
    /// Samples along the segment between the two oscillating vectors.
    pub line_search_points: usize,
    pub max_restarts: usize,
    pub descent: Descent,
    pub schedule: Schedule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 10_000,
            init: Init::UniformHalf,
            damping: 0.0,
            cycle_window: 2,
            cycle_tol: 1e-6,
            line_search_points: 101,
            max_restarts: 100,
            descent: Descent::Fallback,
            schedule: Schedule::Sequential,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Config(format!("damping {} not in [0, 1)", self.damping)));
        }
        if self.cycle_window < 2 {
            return Err(Error::Config("cycle window must be at least 2".into()));
        }
        if self.line_search_points < 2 {
            return Err(Error::Config("line search needs at least 2 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: MeanVector,
    /// Ĝ at `u`.
    pub objective: f64,
    /// Sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm over free units of `u_i - sigma(logit u_i - dĜ/du_i)`.
    pub residual: f64,
    pub cycles_detected: usize,
    pub restarts: usize,
    /// Whether guarded (objective-decreasing) updates were in force at the end.
    pub guarded: bool,
}

/// Sequential (topological order) iteration of `u_i <- sigma(-d(Ĝ - G(u,0))/du_i)`, the
/// stationarity condition of Ĝ solved for `u_i`. An order-2 oscillation is broken by
/// restarting from the point on the segment between the two vectors with the lowest Ĝ.
pub fn solve_fixed_point(
    net: &BeliefNetwork,
    clamp: &ClampContext<'_>,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if !std::ptr::eq(clamp.net(), net) && clamp.net() != net {
        return Err(Error::Config("clamp context belongs to a different network".into()));
    }
    scheme.check(net.activation())?;
    let free = clamp.free_units();
    let mut u = initial_means(net, clamp, &opts.init)?;

    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(opts.cycle_window + 1);
    let mut iterations = 0;
    let mut cycles_detected = 0;
    let mut restarts = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut guarded = opts.descent == Descent::Always;
    let patience = (opts.max_iter / 10).max(1);
    let mut stalled = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let before: Vec<f64> = u.values().to_vec();
        if !guarded && opts.schedule == Schedule::Parallel {
            let ev = evaluate_with(net, &u, scheme, Request::MEANS)?;
            for &k in &free {
                let uk = before[k];
                let target = sigmoid((uk / (1.0 - uk)).ln() - ev.du[k]);
                let next = (1.0 - opts.damping) * target + opts.damping * uk;
                u.set(k, next.clamp(MEAN_EDGE, 1.0 - MEAN_EDGE));
            }
        } else {
        for &k in &free {
            if guarded {
                guarded_update(net, &mut u, scheme, k)?;
            } else {
                let target = update_target(net, &u, scheme, k)?;
                let next = (1.0 - opts.damping) * target + opts.damping * u.get(k);
                u.set(k, next.clamp(MEAN_EDGE, 1.0 - MEAN_EDGE));
            }
        }
        }
        let step = sup_diff(u.values(), &before, &free);
        if step <= opts.tol {
            residual = fixed_point_residual(net, &u, scheme, &free)?;
            if residual <= opts.tol {
                converged = true;
                break;
            }
            stalled += 1;
        } else {
            stalled = 0;
        }
        if guarded {
            // Guarded steps only shrink near a point the objective cannot leave: a minimum
            // pressed against the mean bounds rather than a stationary point.
            if stalled >= STALL_SWEEPS {
                break;
            }
            continue;
        }
        if opts.descent == Descent::Fallback && iterations >= patience {
            guarded = true;
            continue;
        }

        history.push_back(before);
        if history.len() > opts.cycle_window {
            history.pop_front();
        }
        if history.len() == opts.cycle_window {
            // history[0] is u_{t - window}, history.back() is u_{t - 1}.
            let lagged = &history[0];
            let previous = history.back().expect("non-empty");
            if sup_diff(u.values(), lagged, &free) <= opts.cycle_tol
                && sup_diff(u.values(), previous, &free) > opts.cycle_tol
            {
                cycles_detected += 1;
                if opts.descent == Descent::Fallback && restarts > 0 {
                    guarded = true;
                } else if restarts < opts.max_restarts {
                    restarts += 1;
                    u = segment_minimum(net, &u, previous, scheme, opts.line_search_points)?;
                }
                history.clear();
            }
        }
    }
    if !converged {
        residual = fixed_point_residual(net, &u, scheme, &free)?;
        converged = residual <= opts.tol && iterations < opts.max_iter;
    }
    let objective = evaluate_with(net, &u, scheme, Request::VALUE)?.value;
    Ok(SolveResult {
        u,
        objective,
        iterations,
        converged,
        residual,
        cycles_detected,
        restarts,
        guarded,
    })
}

fn initial_means(net: &BeliefNetwork, clamp: &ClampContext<'_>, init: &Init) -> Result<MeanVector> {
    let mut u = clamp.mean_vector(0.5)?;
    match init {
        Init::UniformHalf => {}
        Init::ForwardPass => {
            for k in clamp.free_units() {
                let x = net.field(u.values(), k);
                let (f, _, _) = net.activation().floored_probs(x);
                u.set(k, f.clamp(MEAN_EDGE, 1.0 - MEAN_EDGE));
            }
        }
        Init::Given(values) => {
            if values.len() != net.n_units() {
                return Err(Error::Dimension {
                    what: "initial means",
                    got: values.len(),
                    expected: net.n_units(),
                });
            }
            for k in clamp.free_units() {
                if !(values[k] > 0.0 && values[k] < 1.0) {
                    return Err(Error::InvalidMean {
                        index: k + 1,
                        value: values[k],
                        reason: "initial means must lie strictly inside (0, 1)",
                    });
                }
                u.set(k, values[k].clamp(MEAN_EDGE, 1.0 - MEAN_EDGE));
            }
        }
    }
    Ok(u)
}

/// `sigma(logit u_k - dĜ/du_k)`: the value of `u_k` that zeroes the gradient with every other
/// coordinate (and the non-entropy part's dependence on `u_k`) frozen.
fn update_target(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme, k: usize) -> Result<f64> {
    let ev = evaluate_with(net, u, scheme, Request::MEANS)?;
    let uk = u.get(k);
    Ok(sigmoid((uk / (1.0 - uk)).ln() - ev.du[k]))
}

/// Moves `u_k` toward its fixed-point target, halving the step until Ĝ decreases
/// sufficiently. Leaves `u_k` unchanged if no decrease is found.
fn guarded_update(net: &BeliefNetwork, u: &mut MeanVector, scheme: Scheme, k: usize) -> Result<()> {
    let ev = evaluate_with(net, u, scheme, Request::MEANS)?;
    let uk = u.get(k);
    let target = sigmoid((uk / (1.0 - uk)).ln() - ev.du[k]).clamp(MEAN_EDGE, 1.0 - MEAN_EDGE);
    let delta = target - uk;
    let decrease = ev.du[k] * delta;
    if delta == 0.0 || decrease >= 0.0 {
        return Ok(());
    }
    let mut t = 1.0;
    for _ in 0..60 {
        u.set(k, uk + t * delta);
        let value = evaluate_with(net, u, scheme, Request::VALUE)?.value;
        if value <= ev.value + 1e-4 * t * decrease {
            return Ok(());
        }
        t *= 0.5;
    }
    u.set(k, uk);
    Ok(())
}

fn fixed_point_residual(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme, free: &[usize]) -> Result<f64> {
    let ev = evaluate_with(net, u, scheme, Request::MEANS)?;
    Ok(free
        .iter()
        .map(|&k| {
            let uk = u.get(k);
            (uk - sigmoid((uk / (1.0 - uk)).ln() - ev.du[k])).abs()
        })
        .fold(0.0, f64::max))
}

fn sup_diff(a: &[f64], b: &[f64], free: &[usize]) -> f64 {
    free.iter().map(|&k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
}

/// Lowest-objective point among `points` evenly spaced samples on the segment `[current, other]`.
fn segment_minimum(
    net: &BeliefNetwork,
    current: &MeanVector,
    other: &[f64],
    scheme: Scheme,
    points: usize,
) -> Result<MeanVector> {
    let mut best: Option<(f64, MeanVector)> = None;
    for p in 0..points {
        let t = p as f64 / (points - 1) as f64;
        let vals: Vec<f64> = current
            .values()
            .iter()
            .zip(other)
            .map(|(&a, &b)| ((1.0 - t) * a + t * b).clamp(MEAN_EDGE, 1.0 - MEAN_EDGE))
            .collect();
        let cand = current.with_free_values(&vals)?;
        let val = evaluate_with(net, &cand, scheme, Request::VALUE)?.value;
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, cand));
        }
    }
    Ok(best.expect("at least two samples").1)
}
