use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationKind;
use crate::clamp::ClampContext;
use crate::error::Result;
use crate::net::{BeliefNetwork, Edge, MeanVector};

/// Shape of a random DAG used by property checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomNetSpec {
    pub n_units: usize,
    pub activation: ActivationKind,
    /// Sigmoid parameters are uniform on `[-scale, scale]`, noisy-or on `[0.05, scale]`.
    pub scale: f64,
    pub edge_prob: f64,
    /// The last `n_visible` units are visible.
    pub n_visible: usize,
}

/// Smallest noisy-or parameter drawn, keeping every firing probability off the floor.
const NOISY_OR_LOW: f64 = 0.05;

pub fn random_dag(spec: &RandomNetSpec, seed: u64) -> Result<BeliefNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| match spec.activation {
        ActivationKind::Sigmoid => rng.random_range(-spec.scale..=spec.scale),
        ActivationKind::NoisyOr => rng.random_range(NOISY_OR_LOW..=spec.scale.max(NOISY_OR_LOW)),
    };
    let biases: Vec<f64> = (0..spec.n_units).map(|_| draw(&mut rng)).collect();
    let mut edges = Vec::new();
    for child in 1..spec.n_units {
        for parent in 0..child {
            if rng.random_bool(spec.edge_prob) {
                edges.push(Edge::new(child, parent, draw(&mut rng)));
            }
        }
    }
    let visible = (spec.n_units - spec.n_visible.min(spec.n_units)..spec.n_units).collect();
    BeliefNetwork::new(spec.activation, biases, edges, visible)
}

/// Random observation for the visible units and interior means in `[0.05, 0.95]` for the rest.
pub fn random_clamp_and_means<'a>(
    net: &'a BeliefNetwork,
    seed: u64,
) -> Result<(ClampContext<'a>, MeanVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let obs: Vec<u8> = net.visible().iter().map(|_| u8::from(rng.random_bool(0.5))).collect();
    let ctx = ClampContext::clamped(net, &obs)?;
    let free: Vec<f64> = (0..ctx.n_free()).map(|_| rng.random_range(0.05..0.95)).collect();
    let u = ctx.mean_vector_from(&free)?;
    Ok((ctx, u))
}
