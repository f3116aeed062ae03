use crate::activation::LogScoreDerivs;
use crate::error::{Error, Result};
use crate::net::{BeliefNetwork, MeanVector};

/// `<X_i^k>` under the factorial distribution of `u`, where `X_i = sum_j w_ij (S_j - u_j)`.
/// Only `k` in {1, 2} is supported: `<X_i> = 0`, `<X_i^2> = sum_j w_ij^2 u_j (1 - u_j)`.
pub fn central_moment_x(net: &BeliefNetwork, u: &MeanVector, i: usize, k: usize) -> Result<f64> {
    match k {
        1 => Ok(0.0),
        2 => Ok(second_moment(net, u.values(), u.pinned(), i)),
        _ => Err(Error::Config(format!("moment order {k} not in {{1, 2}}"))),
    }
}

pub(crate) fn second_moment(net: &BeliefNetwork, u: &[f64], pinned: &[bool], i: usize) -> f64 {
    net.parents(i)
        .iter()
        .filter(|e| !pinned[e.parent])
        .map(|e| e.weight * e.weight * u[e.parent] * (1.0 - u[e.parent]))
        .sum()
}

/// `g_ki = u_i d^k/dM ln f(M̄_i) + (1 - u_i) d^k/dM ln(1 - f(M̄_i))` for `k` in {1, 2}.
pub fn g_coefficient(net: &BeliefNetwork, u: &MeanVector, i: usize, k: usize) -> Result<f64> {
    if k == 0 || k > 2 {
        return Err(Error::Config(format!("coefficient order {k} not in {{1, 2}}")));
    }
    let mbar = net.field(u.values(), i);
    let d = LogScoreDerivs::at(net.activation(), mbar);
    if d.floored {
        return Err(Error::Domain(format!(
            "f({mbar}) at unit {} hits the probability floor",
            i + 1
        )));
    }
    Ok(d.g(k, u.get(i)))
}
