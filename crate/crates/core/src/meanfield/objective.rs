//! Closed-form objectives `Ĝ11`, `Ĝ12`, `Ĝ22` and their exact gradients.
//!
//! All three start from the order-2 Taylor energy in the centered parent fields
//! `X_i = sum_j w_ij d_j`, `d_j = S_j - u_j`:
//!
//! ```text
//! Ê_2 = sum_i -[ L_i + dl_i d_i + (g1_i + da_i d_i) X_i + 1/2 (g2_i + dc_i d_i) X_i^2 ]
//! ```
//!
//! where `L_i`, `g1_i`, `g2_i` mix the derivatives of `ln f` and `ln(1 - f)` at `M̄_i` with
//! weights `u_i`, `1 - u_i`, and `dl`, `da`, `dc` are the differences of the two sides.
//!
//! * `Ĝ11 = G(u,0) - sum_i L_i`
//! * `Ĝ12 = Ĝ11 - 1/2 sum_i g2_i <X_i^2>`
//! * `Ĝ22 = Ĝ12 - 1/2 sum_{|A|>=2} c_A^2 prod_{j in A} u_j (1 - u_j)`
//!
//! For the last line, reduce `d_j^2 = u_j (1 - u_j) + (1 - 2 u_j) d_j` so that `Ê_2` is a
//! multilinear polynomial `sum_A c_A prod_{j in A} d_j`. Those monomials are orthogonal
//! under the factorial distribution, so the variance/covariance combination in the second
//! gamma-derivative keeps only the non-singleton sets. With `j < k < i` they are
//!
//! ```text
//! c_{ji}  = -w_ij (da_i + 1/2 dc_i w_ij (1 - 2 u_j)) - sum_{m > i} g2_m w_mj w_mi
//! c_{jki} = -dc_i w_ij w_ik
//! ```
//!
//! Gradients are accumulated in reverse: every term reports its sensitivity to the
//! per-unit mean fields `M̄_i`, to `u_i` directly, to `v_i = u_i (1 - u_i)` and to the
//! weights, and a final pass pushes the `M̄` sensitivities through `M̄_i = sum w_ij u_j + h_i`.

use crate::activation::LogScoreDerivs;
use crate::error::{Error, Result};
use crate::net::{check_len, BeliefNetwork, MeanVector};

use super::Scheme;

/// Objective value together with its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// `dĜ/du_i`; zero for pinned units.
    pub du: Vec<f64>,
    /// `dĜ/dw` per edge, in [`BeliefNetwork::edges`] order. Empty unless requested.
    pub dw: Vec<f64>,
    /// `dĜ/dh_i`. Empty unless requested.
    pub dh: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Request {
    pub means: bool,
    pub params: bool,
    /// Flips the sign of the second-order Taylor term (fault injection for the validator).
    pub flip_second_order: bool,
}

impl Request {
    pub const VALUE: Request = Request {
        means: false,
        params: false,
        flip_second_order: false,
    };
    pub const MEANS: Request = Request {
        means: true,
        params: false,
        flip_second_order: false,
    };
    pub const ALL: Request = Request {
        means: true,
        params: true,
        flip_second_order: false,
    };
}

/// Ĝ value for `scheme` at `u`. Pinned units contribute no entropy.
pub fn objective(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme) -> Result<f64> {
    Ok(evaluate_with(net, u, scheme, Request::VALUE)?.value)
}

/// `dĜ/du_i` for every unit (pinned entries are zero).
pub fn objective_gradient(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme) -> Result<Vec<f64>> {
    Ok(evaluate_with(net, u, scheme, Request::MEANS)?.du)
}

/// Value, mean gradient and parameter gradient in one pass.
pub fn evaluate(net: &BeliefNetwork, u: &MeanVector, scheme: Scheme) -> Result<Evaluation> {
    evaluate_with(net, u, scheme, Request::ALL)
}

/// Ĝ with the sign of the second-order Taylor correction flipped. Exists so the validation
/// suite can demonstrate that its oracle checks catch a wrong closed form.
pub fn objective_with_flipped_second_order(
    net: &BeliefNetwork,
    u: &MeanVector,
    scheme: Scheme,
) -> Result<f64> {
    let req = Request {
        flip_second_order: true,
        ..Request::VALUE
    };
    Ok(evaluate_with(net, u, scheme, req)?.value)
}

struct UnitTerms {
    derivs: LogScoreDerivs,
    /// `g2 = u a2 + (1 - u) b2`
    g2: f64,
    /// `d g2 / dM̄`
    g3: f64,
    /// `a1 - b1`, whose `M̄`-derivative is `dc`
    da: f64,
    /// `a2 - b2`
    dc: f64,
    /// `a3 - b3`
    dd: f64,
}

pub(crate) fn evaluate_with(
    net: &BeliefNetwork,
    mean: &MeanVector,
    scheme: Scheme,
    req: Request,
) -> Result<Evaluation> {
    check_len(net, mean.len(), "mean vector")?;
    scheme.check(net.activation())?;
    let n = net.n_units();
    let u = mean.values();
    let pinned = mean.pinned();
    let kind = net.activation();

    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let mbar = net.field(u, i);
        let d = LogScoreDerivs::at(kind, mbar);
        if d.floored {
            return Err(Error::Domain(format!(
                "mean field {mbar} at unit {} puts f on the probability floor",
                i + 1
            )));
        }
        terms.push(UnitTerms {
            g2: d.g(2, u[i]),
            g3: d.g(3, u[i]),
            da: d.a1 - d.b1,
            dc: d.a2 - d.b2,
            dd: d.a3 - d.b3,
            derivs: d,
        });
    }
    let var: Vec<f64> = (0..n)
        .map(|i| if pinned[i] { 0.0 } else { u[i] * (1.0 - u[i]) })
        .collect();

    let grad = req.means || req.params;
    let mut value = 0.0;
    let mut adj_m = vec![0.0; n];
    let mut adj_u = vec![0.0; n];
    let mut adj_v = vec![0.0; n];
    let mut adj_w = vec![0.0; if req.params { net.n_edges() } else { 0 }];

    // G(u, 0)
    for i in (0..n).filter(|&i| !pinned[i]) {
        value += u[i] * u[i].ln() + (1.0 - u[i]) * (1.0 - u[i]).ln();
        adj_u[i] += (u[i] / (1.0 - u[i])).ln();
    }

    // -<Ê(0)> = -sum_i L_i
    for (i, t) in terms.iter().enumerate() {
        value -= t.derivs.score(u[i]);
        if grad {
            adj_m[i] -= t.derivs.g(1, u[i]);
            adj_u[i] -= t.derivs.ln_f - t.derivs.ln_1mf;
        }
    }

    if scheme.taylor_order() >= 2 {
        let sign = if req.flip_second_order { -1.0 } else { 1.0 };
        for (i, t) in terms.iter().enumerate() {
            let q: f64 = net
                .parents(i)
                .iter()
                .map(|e| e.weight * e.weight * var[e.parent])
                .sum();
            value -= sign * 0.5 * t.g2 * q;
            if !grad {
                continue;
            }
            adj_m[i] -= sign * 0.5 * q * t.g3;
            adj_u[i] -= sign * 0.5 * q * t.dc;
            let adj_q = -sign * 0.5 * t.g2;
            for (k, e) in net.parents(i).iter().enumerate() {
                adj_v[e.parent] += adj_q * e.weight * e.weight;
                if req.params {
                    adj_w[net.parent_edge_range(i).start + k] += adj_q * 2.0 * e.weight * var[e.parent];
                }
            }
        }
    }

    if scheme.coupling_order() >= 2 {
        second_order_correction(
            net, u, pinned, &terms, &var, grad, req.params, &mut value, &mut adj_m, &mut adj_u,
            &mut adj_v, &mut adj_w,
        );
    }

    if !grad {
        return Ok(Evaluation {
            value,
            du: Vec::new(),
            dw: Vec::new(),
            dh: Vec::new(),
        });
    }

    for i in 0..n {
        adj_u[i] += adj_v[i] * (1.0 - 2.0 * u[i]);
    }
    let mut du = adj_u;
    for (k, e) in net.edges().iter().enumerate() {
        du[e.parent] += adj_m[e.child] * e.weight;
        if req.params {
            adj_w[k] += adj_m[e.child] * u[e.parent];
        }
    }
    for i in 0..n {
        if pinned[i] {
            du[i] = 0.0;
        }
    }
    Ok(Evaluation {
        value,
        du,
        dw: adj_w,
        dh: if req.params { adj_m } else { Vec::new() },
    })
}

#[allow(clippy::too_many_arguments)]
fn second_order_correction(
    net: &BeliefNetwork,
    u: &[f64],
    pinned: &[bool],
    terms: &[UnitTerms],
    var: &[f64],
    grad: bool,
    params: bool,
    value: &mut f64,
    adj_m: &mut [f64],
    adj_u: &mut [f64],
    adj_v: &mut [f64],
    adj_w: &mut [f64],
) {
    let n = net.n_units();
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i]).collect();

    // Pairs j < i, both free.
    for (b, &i) in free.iter().enumerate() {
        let ti = &terms[i];
        for &j in &free[..b] {
            let w_ij = net.weight(i, j);
            let lin = 1.0 - 2.0 * u[j];
            let mut c = -w_ij * (ti.da + 0.5 * ti.dc * w_ij * lin);
            for (_, e) in net.children(i) {
                let w_mj = net.weight(e.child, j);
                if w_mj != 0.0 {
                    c -= terms[e.child].g2 * w_mj * e.weight;
                }
            }
            if c == 0.0 {
                continue;
            }
            let vv = var[j] * var[i];
            *value -= 0.5 * c * c * vv;
            if !grad {
                continue;
            }
            let lam = -c * vv;
            adj_v[j] -= 0.5 * c * c * var[i];
            adj_v[i] -= 0.5 * c * c * var[j];
            if w_ij != 0.0 {
                adj_m[i] += lam * (-w_ij * ti.dc - 0.5 * w_ij * w_ij * lin * ti.dd);
                adj_u[j] += lam * w_ij * w_ij * ti.dc;
                if params {
                    let k = net.edge_index(i, j).expect("nonzero weight implies an edge");
                    adj_w[k] += lam * (-ti.da - ti.dc * w_ij * lin);
                }
            }
            for (k_mi, e) in net.children(i) {
                let m = e.child;
                let w_mj = net.weight(m, j);
                if w_mj == 0.0 {
                    continue;
                }
                let coeff = -w_mj * e.weight;
                adj_m[m] += lam * coeff * terms[m].g3;
                adj_u[m] += lam * coeff * terms[m].dc;
                if params {
                    let k_mj = net.edge_index(m, j).expect("nonzero weight implies an edge");
                    adj_w[k_mi] -= lam * terms[m].g2 * w_mj;
                    adj_w[k_mj] -= lam * terms[m].g2 * e.weight;
                }
            }
        }
    }

    // Triples j < k < i, all free, j and k parents of i.
    for &i in &free {
        let ti = &terms[i];
        let range = net.parent_edge_range(i);
        let parents = net.parents(i);
        for (a, pj) in parents.iter().enumerate() {
            if pinned[pj.parent] {
                continue;
            }
            for (b, pk) in parents.iter().enumerate().skip(a + 1) {
                if pinned[pk.parent] {
                    continue;
                }
                let c = -ti.dc * pj.weight * pk.weight;
                if c == 0.0 {
                    continue;
                }
                let vvv = var[pj.parent] * var[pk.parent] * var[i];
                *value -= 0.5 * c * c * vvv;
                if !grad {
                    continue;
                }
                let lam = -c * vvv;
                let half_c2 = 0.5 * c * c;
                adj_v[pj.parent] -= half_c2 * var[pk.parent] * var[i];
                adj_v[pk.parent] -= half_c2 * var[pj.parent] * var[i];
                adj_v[i] -= half_c2 * var[pj.parent] * var[pk.parent];
                adj_m[i] += lam * (-pj.weight * pk.weight) * ti.dd;
                if params {
                    adj_w[range.start + a] += lam * (-ti.dc * pk.weight);
                    adj_w[range.start + b] += lam * (-ti.dc * pj.weight);
                }
            }
        }
    }
}
