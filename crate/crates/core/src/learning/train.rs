use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::clamp::ClampContext;
use crate::error::{Error, Result};
use crate::exact::log_likelihood;
use crate::meanfield::{evaluate, solve_fixed_point, Init, Scheme, SolveResult, SolverOptions};
use crate::net::BeliefNetwork;

use super::Pattern;

/// Smallest bias a noisy-or unit may take during training; at zero its firing probability
/// would sit on the probability floor.
pub const NOISY_OR_MIN_BIAS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    Full,
    /// Consecutive slices of a per-epoch seeded shuffle.
    Size(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scheme: Scheme,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: Batch,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Evaluate every this many epochs (and always after the last).
    pub eval_every: usize,
    /// With `false` only biases are updated.
    pub learn_weights: bool,
}

impl TrainConfig {
    pub fn new(activation: ActivationKind) -> Self {
        TrainConfig {
            scheme: Scheme::G12,
            learning_rate: default_learning_rate(activation),
            epochs: 100,
            batch: Batch::Full,
            seed: 0,
            solver: SolverOptions::default(),
            eval_every: 1,
            learn_weights: true,
        }
    }

    pub fn validate(&self, activation: ActivationKind) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.batch == Batch::Size(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.scheme.check(activation)?;
        self.solver.validate()
    }
}

pub fn default_learning_rate(activation: ActivationKind) -> f64 {
    match activation {
        ActivationKind::Sigmoid => 0.05,
        ActivationKind::NoisyOr => 0.01,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    /// Mean exact `ln P(v)` over the dataset.
    pub mean_true_loglik: f64,
    /// Mean `-Ĝ` over the patterns whose solve converged.
    pub mean_objective: f64,
    /// Patterns skipped because their solve did not converge.
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

/// `-dĜ/dw` (per edge) and `-dĜ/dh` at the solved means, i.e. the mean-field estimate of the
/// gradient of `ln P(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub objective: f64,
    pub solve: SolveResult,
}

pub fn loglik_gradient(
    net: &BeliefNetwork,
    pattern: &[u8],
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<ParamGradient> {
    let ctx = ClampContext::clamped(net, pattern)?;
    let solve = solve_fixed_point(net, &ctx, scheme, opts)?;
    if !solve.converged {
        return Err(Error::NotConverged {
            residual: solve.residual,
            iterations: solve.iterations,
        });
    }
    let ev = evaluate(net, &solve.u, scheme)?;
    Ok(ParamGradient {
        weights: ev.dw.iter().map(|g| -g).collect(),
        biases: ev.dh.iter().map(|g| -g).collect(),
        objective: ev.value,
        solve,
    })
}

/// Mean exact log-likelihood of the patterns.
pub fn true_loglik(net: &BeliefNetwork, patterns: &[Pattern]) -> Result<f64> {
    if patterns.is_empty() {
        return Err(Error::Empty);
    }
    let lls: Vec<Result<f64>> = patterns.par_iter().map(|p| log_likelihood(net, p)).collect();
    let mut total = 0.0;
    for ll in lls {
        total += ll?;
    }
    Ok(total / patterns.len() as f64)
}

struct PassResult {
    /// Per pattern, `None` when skipped.
    grads: Vec<Option<ParamGradient>>,
}

impl PassResult {
    fn unconverged(&self) -> usize {
        self.grads.iter().filter(|g| g.is_none()).count()
    }

    fn mean_objective(&self) -> f64 {
        let vals: Vec<f64> = self.grads.iter().flatten().map(|g| -g.objective).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn solve_pass(
    net: &BeliefNetwork,
    patterns: &[Pattern],
    indices: &[usize],
    config: &TrainConfig,
    warm: &[Option<Vec<f64>>],
) -> Result<PassResult> {
    let grads: Vec<Result<Option<ParamGradient>>> = indices
        .par_iter()
        .map(|&p| {
            let mut opts = config.solver.clone();
            if let Some(u) = &warm[p] {
                opts.init = Init::Given(u.clone());
            }
            match loglik_gradient(net, &patterns[p], config.scheme, &opts) {
                Ok(g) => Ok(Some(g)),
                Err(Error::NotConverged { .. }) | Err(Error::Domain(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    Ok(PassResult {
        grads: grads.into_iter().collect::<Result<_>>()?,
    })
}

fn apply_update(
    net: &BeliefNetwork,
    pass: &PassResult,
    config: &TrainConfig,
) -> Result<BeliefNetwork> {
    let used: Vec<&ParamGradient> = pass.grads.iter().flatten().collect();
    if used.is_empty() {
        return Ok(net.clone());
    }
    let scale = config.learning_rate / used.len() as f64;
    let mut weights: Vec<f64> = net.edges().iter().map(|e| e.weight).collect();
    let mut biases = net.biases().to_vec();
    for g in &used {
        if config.learn_weights {
            for (w, d) in weights.iter_mut().zip(&g.weights) {
                *w += scale * d;
            }
        }
        for (h, d) in biases.iter_mut().zip(&g.biases) {
            *h += scale * d;
        }
    }
    if net.activation() == ActivationKind::NoisyOr {
        weights.iter_mut().for_each(|w| *w = w.max(0.0));
        biases.iter_mut().for_each(|h| *h = h.max(NOISY_OR_MIN_BIAS));
    }
    net.with_parameters(&weights, &biases)
}

/// Gradient ascent on the mean-field estimate of the mean log-likelihood. Each pattern's
/// solve starts from its previous solution. Deterministic for a given configuration.
pub fn train(
    net: &BeliefNetwork,
    patterns: &[Pattern],
    config: &TrainConfig,
) -> Result<(BeliefNetwork, TrainHistory)> {
    config.validate(net.activation())?;
    if patterns.is_empty() {
        return Err(Error::Empty);
    }
    for p in patterns {
        if p.len() != net.visible().len() {
            return Err(Error::Dimension {
                what: "pattern",
                got: p.len(),
                expected: net.visible().len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..patterns.len()).collect();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; patterns.len()];
    let mut net = net.clone();
    let mut history = TrainHistory::default();

    for epoch in 0..=config.epochs {
        let evaluate_now = epoch % config.eval_every == 0 || epoch == config.epochs;
        let training = epoch < config.epochs;
        if !evaluate_now && !training {
            break;
        }
        let batches: Vec<Vec<usize>> = match config.batch {
            Batch::Full => vec![order.clone()],
            Batch::Size(b) => {
                order.shuffle(&mut rng);
                order.chunks(b).map(<[usize]>::to_vec).collect()
            }
        };
        let true_ll = if evaluate_now {
            Some(true_loglik(&net, patterns)?)
        } else {
            None
        };
        let mut skipped = 0;
        let mut objective_sum = 0.0;
        let mut objective_n = 0;
        let mut record_objective = None;
        for (k, batch) in batches.iter().enumerate() {
            let pass = solve_pass(&net, patterns, batch, config, &warm)?;
            for (&p, g) in batch.iter().zip(&pass.grads) {
                if let Some(g) = g {
                    warm[p] = Some(g.solve.u.values().to_vec());
                }
            }
            skipped += pass.unconverged();
            if k == 0 && config.batch == Batch::Full {
                record_objective = Some(pass.mean_objective());
            } else {
                objective_sum += pass.grads.iter().flatten().map(|g| -g.objective).sum::<f64>();
                objective_n += pass.grads.iter().flatten().count();
            }
            if training {
                net = apply_update(&net, &pass, config)?;
            }
        }
        if skipped > 0 {
            log::info!("epoch {epoch}: {skipped} patterns skipped (solver did not converge)");
        }
        if let Some(mean_true_loglik) = true_ll {
            // With minibatches the objective is averaged over the epoch's changing parameters.
            let mean_objective =
                record_objective.unwrap_or(objective_sum / objective_n.max(1) as f64);
            history.records.push(HistoryRecord {
                epoch,
                mean_true_loglik,
                mean_objective,
                unconverged: skipped,
            });
        }
    }
    Ok((net, history))
}
