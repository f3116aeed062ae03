use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::clamp::ClampContext;
use crate::error::{Error, Result};
use crate::exact::exact_log_partition;
use crate::meanfield::{error_metric, solve_fixed_point, Scheme, SolverOptions};
use crate::net::{BeliefNetwork, Edge};

/// Which visible assignments each generated network is evaluated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampPolicy {
    /// Every visible unit observed as 0.
    Zeros,
    /// The visible states with the largest and smallest `ln Z_c`.
    ExtremeLnZ,
}

/// Label of one clamp within a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClampLabel {
    Zeros,
    Max,
    Min,
}

impl ClampLabel {
    pub fn name(self) -> &'static str {
        match self {
            ClampLabel::Zeros => "zeros",
            ClampLabel::Max => "max",
            ClampLabel::Min => "min",
        }
    }
}

impl ClampPolicy {
    pub fn labels(self) -> &'static [ClampLabel] {
        match self {
            ClampPolicy::Zeros => &[ClampLabel::Zeros],
            ClampPolicy::ExtremeLnZ => &[ClampLabel::Max, ClampLabel::Min],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Layer sizes from the top layer down; the last layer is visible.
    pub topology: Vec<usize>,
    pub activation: ActivationKind,
    pub weight_range: (f64, f64),
    pub bias_range: (f64, f64),
    pub n_networks: usize,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub clamp_policy: ClampPolicy,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    /// Sigmoid 2x4x6 nets, weights and biases uniform on `[-scale, scale]`, bottom layer clamped to 0.
    pub fn sigmoid(scale: f64) -> Self {
        ExperimentConfig {
            topology: vec![2, 4, 6],
            activation: ActivationKind::Sigmoid,
            weight_range: (-scale, scale),
            bias_range: (-scale, scale),
            n_networks: 1000,
            master_seed: 1,
            schemes: Scheme::ALL.to_vec(),
            clamp_policy: ClampPolicy::Zeros,
            solver: SolverOptions::default(),
        }
    }

    /// Noisy-or 2x4x6 nets with all parameters uniform on `[lo, hi]`, clamped at the extreme-`ln Z` states.
    pub fn noisy_or(lo: f64, hi: f64) -> Self {
        ExperimentConfig {
            topology: vec![2, 4, 6],
            activation: ActivationKind::NoisyOr,
            weight_range: (lo, hi),
            bias_range: (lo, hi),
            n_networks: 1000,
            master_seed: 1,
            schemes: Scheme::ALL.to_vec(),
            clamp_policy: ClampPolicy::ExtremeLnZ,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topology.len() < 2 || self.topology.contains(&0) {
            return Err(Error::Config(format!(
                "topology needs at least two non-empty layers, got {:?}",
                self.topology
            )));
        }
        for (what, (lo, hi)) in [("weight", self.weight_range), ("bias", self.bias_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{what} range [{lo}, {hi}] is not valid")));
            }
            if self.activation == ActivationKind::NoisyOr && lo < 0.0 {
                return Err(Error::Config(format!(
                    "noisy-or {what} range [{lo}, {hi}] must be non-negative"
                )));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        for s in &self.schemes {
            s.check(self.activation)?;
        }
        self.solver.validate()
    }

    pub fn n_units(&self) -> usize {
        self.topology.iter().sum()
    }
}

fn uniform(lo: f64, hi: f64) -> Uniform<f64> {
    Uniform::new_inclusive(lo, hi).expect("range checked by validate")
}

/// Network `index` of the experiment: adjacent layers fully connected, parameters i.i.d.
/// uniform. Depends only on `(master_seed, index)`.
pub fn random_layered(config: &ExperimentConfig, index: u64) -> Result<BeliefNetwork> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index);
    let n = config.n_units();
    let bias_dist = uniform(config.bias_range.0, config.bias_range.1);
    let weight_dist = uniform(config.weight_range.0, config.weight_range.1);
    let biases: Vec<f64> = (0..n).map(|_| bias_dist.sample(&mut rng)).collect();

    let mut starts = Vec::with_capacity(config.topology.len());
    let mut acc = 0;
    for &size in &config.topology {
        starts.push(acc);
        acc += size;
    }
    let mut edges = Vec::new();
    for layer in 1..config.topology.len() {
        let (p0, c0) = (starts[layer - 1], starts[layer]);
        for child in c0..c0 + config.topology[layer] {
            for parent in p0..p0 + config.topology[layer - 1] {
                edges.push(Edge::new(child, parent, weight_dist.sample(&mut rng)));
            }
        }
    }
    let last = *starts.last().expect("validated");
    BeliefNetwork::new(config.activation, biases, edges, (last..n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Converged after at least one oscillation restart.
    Restarted,
    Unconverged,
    /// The objective could not be evaluated (e.g. a floored probability).
    Failed,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, SolveStatus::Converged | SolveStatus::Restarted)
    }
}

/// One row of `raw.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub net_index: u64,
    pub clamp: ClampLabel,
    pub scheme: Scheme,
    pub ln_z_exact: f64,
    pub g_hat: f64,
    pub err: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

fn extreme_clamps(net: &BeliefNetwork) -> Result<[(ClampLabel, Vec<u8>); 2]> {
    let nv = net.visible().len();
    if nv > 20 {
        return Err(Error::TooLarge { free: nv, bound: 20 });
    }
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut worst: Option<(f64, Vec<u8>)> = None;
    for code in 0..1u64 << nv {
        let v: Vec<u8> = (0..nv).map(|b| ((code >> b) & 1) as u8).collect();
        let lz = exact_log_partition(&ClampContext::clamped(net, &v)?)?;
        if best.as_ref().is_none_or(|(b, _)| lz > *b) {
            best = Some((lz, v.clone()));
        }
        if worst.as_ref().is_none_or(|(w, _)| lz < *w) {
            worst = Some((lz, v));
        }
    }
    Ok([
        (ClampLabel::Max, best.expect("at least one state").1),
        (ClampLabel::Min, worst.expect("at least one state").1),
    ])
}

/// Every (clamp, scheme) row for one network.
pub fn evaluate_network(config: &ExperimentConfig, index: u64) -> Result<Vec<RunRecord>> {
    let net = random_layered(config, index)?;
    let clamps = match config.clamp_policy {
        ClampPolicy::Zeros => vec![(ClampLabel::Zeros, vec![0; net.visible().len()])],
        ClampPolicy::ExtremeLnZ => extreme_clamps(&net)?.to_vec(),
    };
    let mut rows = Vec::with_capacity(clamps.len() * config.schemes.len());
    for (label, values) in clamps {
        let ctx = ClampContext::clamped(&net, &values)?;
        let ln_z = exact_log_partition(&ctx)?;
        for &scheme in &config.schemes {
            let row = match solve_fixed_point(&net, &ctx, scheme, &config.solver) {
                Ok(res) => {
                    let status = match (res.converged, res.restarts) {
                        (false, _) => SolveStatus::Unconverged,
                        (true, 0) => SolveStatus::Converged,
                        (true, _) => SolveStatus::Restarted,
                    };
                    RunRecord {
                        net_index: index,
                        clamp: label,
                        scheme,
                        ln_z_exact: ln_z,
                        g_hat: res.objective,
                        err: error_metric(res.objective, ln_z).unwrap_or(f64::NAN),
                        iterations: res.iterations,
                        status,
                    }
                }
                Err(e) => {
                    log::warn!("net {index} {} {scheme}: {e}", label.name());
                    RunRecord {
                        net_index: index,
                        clamp: label,
                        scheme,
                        ln_z_exact: ln_z,
                        g_hat: f64::NAN,
                        err: f64::NAN,
                        iterations: 0,
                        status: SolveStatus::Failed,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs every network of the experiment on the current rayon pool. Rows are ordered by
/// `(net_index, clamp, scheme)` regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let per_net: Vec<Result<Vec<RunRecord>>> = (0..config.n_networks as u64)
        .into_par_iter()
        .map(|i| evaluate_network(config, i))
        .collect();
    let mut rows = Vec::with_capacity(config.n_networks * config.schemes.len() * 2);
    for r in per_net {
        rows.extend(r?);
    }
    Ok(rows)
}

pub const HISTOGRAM_BINS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Summary of one (scheme, clamp) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub clamp: ClampLabel,
    /// Mean of the error over converged solves.
    pub mean_err: f64,
    pub n: usize,
    pub unconverged: usize,
    /// Converged solves that needed an oscillation restart.
    pub cycles: usize,
    #[serde(skip)]
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub cells: Vec<SchemeStats>,
}

impl ErrorStats {
    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut keys: Vec<(Scheme, ClampLabel)> = records.iter().map(|r| (r.scheme, r.clamp)).collect();
        keys.sort_by_key(|&(s, c)| (s as u8, c));
        keys.dedup();
        let cells = keys
            .into_iter()
            .map(|(scheme, clamp)| {
                let rows: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.scheme == scheme && r.clamp == clamp)
                    .collect();
                let errs: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.status.is_converged() && r.err.is_finite())
                    .map(|r| r.err)
                    .collect();
                SchemeStats {
                    scheme,
                    clamp,
                    mean_err: errs.iter().sum::<f64>() / errs.len() as f64,
                    n: errs.len(),
                    unconverged: rows.len() - errs.len(),
                    cycles: rows.iter().filter(|r| r.status == SolveStatus::Restarted).count(),
                    histogram: histogram(&errs, HISTOGRAM_BINS),
                }
            })
            .collect();
        ErrorStats { cells }
    }

    pub fn get(&self, scheme: Scheme, clamp: ClampLabel) -> Option<&SchemeStats> {
        self.cells.iter().find(|c| c.scheme == scheme && c.clamp == clamp)
    }
}

/// `bins` equal-width bins spanning the observed range of `values`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 / bins as f64 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_lo: lo + k as f64 * width,
            bin_hi: lo + (k + 1) as f64 * width,
            count,
        })
        .collect()
}

pub fn run_sigmoid_table(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, ErrorStats)> {
    if config.activation != ActivationKind::Sigmoid {
        return Err(Error::Config("sigmoid table needs sigmoid activation".into()));
    }
    let records = run_experiment(config)?;
    let stats = ErrorStats::from_records(&records);
    Ok((records, stats))
}

pub fn run_noisyor_table(config: &ExperimentConfig) -> Result<(Vec<RunRecord>, ErrorStats)> {
    if config.activation != ActivationKind::NoisyOr {
        return Err(Error::Config("noisy-or table needs noisy-or activation".into()));
    }
    let records = run_experiment(config)?;
    let stats = ErrorStats::from_records(&records);
    Ok((records, stats))
}
