use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::learning::{bars_dataset, train, Pattern, TrainConfig, TrainHistory};
use crate::meanfield::Scheme;
use crate::net::BeliefNetwork;

use super::experiment::{random_layered, ClampPolicy, ExperimentConfig};

/// The bars learning experiment: a layered network trained on `side x side` bar images.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    /// Layer sizes from the top down; the last layer must have `side^2` units.
    pub topology: Vec<usize>,
    pub activation: ActivationKind,
    pub n_patterns: usize,
    pub data_seed: u64,
    pub init_seed: u64,
    /// Initial weights are uniform on `[-init_scale, init_scale]` (sigmoid) or
    /// `[0, init_scale]` (noisy-or).
    pub init_scale: f64,
    pub train: TrainConfig,
}

/// Initial bias of every noisy-or unit.
pub const NOISY_OR_INITIAL_BIAS: f64 = 0.5;

impl LearningConfig {
    /// 1x8x16 network, 500 patterns, 100 epochs of full-batch ascent on `Ĝ12`.
    pub fn bars(activation: ActivationKind) -> Self {
        let mut train = TrainConfig::new(activation);
        train.scheme = Scheme::G12;
        train.learning_rate = bars_learning_rate(activation);
        LearningConfig {
            topology: vec![1, 8, 16],
            activation,
            n_patterns: 500,
            data_seed: 7,
            init_seed: 0,
            init_scale: 0.1,
            train,
        }
    }

    pub fn side(&self) -> Result<usize> {
        let visible = *self.topology.last().unwrap_or(&0);
        let side = (visible as f64).sqrt().round() as usize;
        if side == 0 || side * side != visible {
            return Err(Error::Config(format!(
                "bottom layer of {visible} units is not a square image"
            )));
        }
        Ok(side)
    }

    pub fn initial_network(&self) -> Result<BeliefNetwork> {
        let (weight_range, bias_range) = match self.activation {
            ActivationKind::Sigmoid => ((-self.init_scale, self.init_scale), (0.0, 0.0)),
            ActivationKind::NoisyOr => (
                (0.0, self.init_scale),
                (NOISY_OR_INITIAL_BIAS, NOISY_OR_INITIAL_BIAS),
            ),
        };
        let cfg = ExperimentConfig {
            topology: self.topology.clone(),
            activation: self.activation,
            weight_range,
            bias_range,
            n_networks: 1,
            master_seed: self.init_seed,
            schemes: vec![self.train.scheme],
            clamp_policy: ClampPolicy::Zeros,
            solver: self.train.solver.clone(),
        };
        random_layered(&cfg, 0)
    }

    pub fn dataset(&self) -> Result<Vec<Pattern>> {
        bars_dataset(self.n_patterns, self.side()?, self.data_seed)
    }
}

/// Mean-gradient step sizes found to make steady progress on the bars data within 100
/// epochs; the library defaults are far slower here.
pub fn bars_learning_rate(activation: ActivationKind) -> f64 {
    match activation {
        ActivationKind::Sigmoid => 1.0,
        ActivationKind::NoisyOr => 0.2,
    }
}

/// Trains on `data` (or the generated bars set when `None`).
pub fn run_learning(
    config: &LearningConfig,
    data: Option<&[Pattern]>,
) -> Result<(BeliefNetwork, TrainHistory)> {
    let net = config.initial_network()?;
    match data {
        Some(d) => train(&net, d, &config.train),
        None => train(&net, &config.dataset()?, &config.train),
    }
}
