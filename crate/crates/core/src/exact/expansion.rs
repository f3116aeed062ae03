//! Enumeration-based gamma-derivatives of `G(u, gamma)` at `gamma = 0`, and the oracle values
//! of the truncated objectives built from them.

use super::enumerate::{check_bound, factorial_weight, for_each_state, neg_entropy};
use crate::error::{Error, Result};
use crate::meanfield::Scheme;
use crate::net::{taylor_energy_values, BeliefNetwork, MeanVector};

/// `k = 1`: `<E>`; `k = 2`: `-<(E - <E>)^2> + sum_i <(E - <E>)(S_i - u_i)>^2 / (u_i (1 - u_i))`,
/// all under the factorial distribution of `u` (free units only).
pub fn expansion_derivative_oracle(
    u: &MeanVector,
    energy: impl Fn(&[f64]) -> f64,
    order: usize,
) -> Result<f64> {
    if order == 0 || order > 2 {
        return Err(Error::Config(format!("derivative order {order} not in {{1, 2}}")));
    }
    let free = u.free_indices();
    check_bound(free.len())?;
    let mut weights = Vec::with_capacity(1 << free.len());
    let mut energies = Vec::with_capacity(1 << free.len());
    let mut states = Vec::with_capacity((1 << free.len()) * free.len());
    for_each_state(u.values(), &free, |s| {
        weights.push(factorial_weight(u, &free, s));
        energies.push(energy(s));
        states.extend(free.iter().map(|&i| s[i]));
    });
    let mean: f64 = weights.iter().zip(&energies).map(|(w, e)| w * e).sum();
    if order == 1 {
        return Ok(mean);
    }
    let n = free.len();
    let mut var = 0.0;
    let mut cov = vec![0.0; n];
    for (k, (&w, &e)) in weights.iter().zip(&energies).enumerate() {
        let de = e - mean;
        var += w * de * de;
        for (a, &i) in free.iter().enumerate() {
            cov[a] += w * de * (states[k * n + a] - u.get(i));
        }
    }
    let correction: f64 = free
        .iter()
        .zip(&cov)
        .map(|(&i, c)| {
            let ui = u.get(i);
            c * c / (ui * (1.0 - ui))
        })
        .sum();
    Ok(-var + correction)
}

/// The value each scheme's closed form must reproduce:
/// `G(u,0) + <Ê_C(1)>` for the first-order schemes and that plus half the second
/// gamma-derivative of `Ê_2(1)` for `G22`.
pub fn oracle_objective(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme) -> Result<f64> {
    let vals = u.values();
    let taylor = |order: usize| move |s: &[f64]| taylor_energy_values(net, vals, s, 1.0, order);
    let entropy = neg_entropy(u);
    match scheme {
        Scheme::G11 => Ok(entropy + expansion_derivative_oracle(u, taylor(1), 1)?),
        Scheme::G12 => Ok(entropy + expansion_derivative_oracle(u, taylor(2), 1)?),
        Scheme::G22 => Ok(entropy
            + expansion_derivative_oracle(u, taylor(2), 1)?
            + 0.5 * expansion_derivative_oracle(u, taylor(2), 2)?),
    }
}
