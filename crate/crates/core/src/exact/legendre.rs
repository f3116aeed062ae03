//! Numerical Legendre inversion of the tilted log-partition function.
//!
//! For a clamp with free units `F`, the tilted model is
//! `p̃(s) ∝ exp(-gamma E(s) + sum_{i in F} theta_i s_i)`. Given target means `u` we solve
//! `<S_i> = u_i` for `theta` and report `G(u, gamma) = -ln Z̃ + theta . u`.

use nalgebra::{DMatrix, DVector};

use super::enumerate::{check_bound, clamp_base, for_each_state, LogSumExp};
use crate::clamp::ClampContext;
use crate::error::{Error, Result};
use crate::net::{energy_of_values, MeanVector};

#[derive(Debug, Clone, Copy)]
pub struct LegendreOptions {
    /// Sup-norm mean residual the Newton phase aims for.
    pub target: f64,
    /// Residual at or below which the result is reported as converged.
    pub accept: f64,
    pub max_newton: usize,
    pub max_bisection_sweeps: usize,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        LegendreOptions {
            target: 1e-13,
            accept: 1e-10,
            max_newton: 200,
            max_bisection_sweeps: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GibbsEvaluation {
    pub u: MeanVector,
    pub gamma: f64,
    /// Indexed by unit; pinned units carry no field and report 0.
    pub theta: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    /// Sup-norm of `<S_i> - u_i` over free units at the returned `theta`.
    pub residual: f64,
    pub iterations: usize,
    /// Whether the coordinate-bisection fallback was used.
    pub used_fallback: bool,
}

impl GibbsEvaluation {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                residual: self.residual,
                iterations: self.iterations,
            })
        }
    }
}

/// Energies and free-unit bits of every free state of a clamp.
pub(crate) struct TiltedModel {
    pub free: Vec<usize>,
    energies: Vec<f64>,
    /// Row-major `states x free` table of 0.0/1.0.
    bits: Vec<f64>,
}

pub(crate) struct Moments {
    pub log_z: f64,
    pub means: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl TiltedModel {
    pub fn new(ctx: &ClampContext<'_>) -> Result<Self> {
        let free = ctx.free_units();
        check_bound(free.len())?;
        let net = ctx.net();
        let mut energies = Vec::with_capacity(1 << free.len());
        let mut bits = Vec::with_capacity((1 << free.len()) * free.len());
        for_each_state(&clamp_base(ctx), &free, |s| {
            energies.push(energy_of_values(net, s));
            bits.extend(free.iter().map(|&i| s[i]));
        });
        Ok(TiltedModel {
            free,
            energies,
            bits,
        })
    }

    fn n(&self) -> usize {
        self.free.len()
    }

    fn log_weights(&self, gamma: f64, theta: &[f64]) -> Vec<f64> {
        let n = self.n();
        self.energies
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let row = &self.bits[k * n..(k + 1) * n];
                -gamma * e + row.iter().zip(theta).map(|(b, t)| b * t).sum::<f64>()
            })
            .collect()
    }

    pub fn log_partition(&self, gamma: f64, theta: &[f64]) -> f64 {
        let mut acc = LogSumExp::new();
        for lw in self.log_weights(gamma, theta) {
            acc.add(lw);
        }
        acc.value()
    }

    pub fn moments(&self, gamma: f64, theta: &[f64]) -> Moments {
        let n = self.n();
        let lw = self.log_weights(gamma, theta);
        let mut acc = LogSumExp::new();
        lw.iter().for_each(|&x| acc.add(x));
        let log_z = acc.value();
        let mut means = DVector::zeros(n);
        let mut second = DMatrix::<f64>::zeros(n, n);
        for (k, &x) in lw.iter().enumerate() {
            let p = (x - log_z).exp();
            let row = &self.bits[k * n..(k + 1) * n];
            for a in 0..n {
                if row[a] == 0.0 {
                    continue;
                }
                means[a] += p;
                for b in a..n {
                    if row[b] != 0.0 {
                        second[(a, b)] += p;
                    }
                }
            }
        }
        let mut cov = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let c = second[(a, b)] - means[a] * means[b];
                cov[(a, b)] = c;
                cov[(b, a)] = c;
            }
        }
        Moments { log_z, means, cov }
    }
}

/// Solves the mean-matching equations for `theta` and evaluates `G(u, gamma)`.
pub fn gibbs_free_energy(ctx: &ClampContext<'_>, u: &MeanVector, gamma: f64) -> Result<GibbsEvaluation> {
    gibbs_free_energy_with(ctx, u, gamma, &LegendreOptions::default())
}

pub fn gibbs_free_energy_with(
    ctx: &ClampContext<'_>,
    u: &MeanVector,
    gamma: f64,
    opts: &LegendreOptions,
) -> Result<GibbsEvaluation> {
    if !ctx.matches(u) {
        return Err(Error::Config(
            "mean vector does not pin the clamp's units to its observations".into(),
        ));
    }
    let model = TiltedModel::new(ctx)?;
    let target: DVector<f64> = DVector::from_iterator(model.n(), model.free.iter().map(|&i| u.get(i)));
    let (theta, residual, iterations, used_fallback) = invert(&model, gamma, &target, opts);
    let log_z = model.log_partition(gamma, theta.as_slice());
    let value = -log_z + theta.dot(&target);
    let mut full_theta = vec![0.0; u.len()];
    for (k, &i) in model.free.iter().enumerate() {
        full_theta[i] = theta[k];
    }
    Ok(GibbsEvaluation {
        u: u.clone(),
        gamma,
        theta: full_theta,
        value,
        converged: residual <= opts.accept,
        residual,
        iterations,
        used_fallback,
    })
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the convex dual `Phi(theta) = ln Z̃(theta) - theta . u`, whose gradient is
/// the mean residual and whose Hessian is the covariance `B`. Falls back to per-coordinate
/// bisection when the line search stalls.
fn invert(
    model: &TiltedModel,
    gamma: f64,
    target: &DVector<f64>,
    opts: &LegendreOptions,
) -> (DVector<f64>, f64, usize, bool) {
    let n = model.n();
    let mut theta: DVector<f64> = target.map(|x| (x / (1.0 - x)).ln());
    if n == 0 {
        return (theta, 0.0, 0, false);
    }
    let phi = |t: &DVector<f64>| model.log_partition(gamma, t.as_slice()) - t.dot(target);
    let mut iterations = 0;
    let mut stalled = false;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_newton {
        let m = model.moments(gamma, theta.as_slice());
        let r = &m.means - target;
        residual = sup_norm(&r);
        if residual <= opts.target {
            break;
        }
        iterations += 1;
        let Some(step) = regularized_solve(&m.cov, &r) else {
            stalled = true;
            break;
        };
        let phi0 = m.log_z - theta.dot(target);
        let slope = r.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            let val = phi(&cand);
            if val <= phi0 - 1e-4 * t * slope || (val - phi0).abs() <= 1e-15 * phi0.abs().max(1.0) {
                theta = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
    }
    if !stalled {
        let m = model.moments(gamma, theta.as_slice());
        residual = sup_norm(&(&m.means - target));
    }
    if residual <= opts.accept {
        return (theta, residual, iterations, false);
    }
    let (theta, residual, sweeps) = coordinate_bisection(model, gamma, target, theta, opts);
    (theta, residual, iterations + sweeps, true)
}

fn regularized_solve(cov: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = cov.diagonal().iter().fold(0.0_f64, |m, x| m.max(*x)).max(1e-300);
    let mut lambda = 0.0;
    for _ in 0..12 {
        let mut a = cov.clone();
        for k in 0..a.nrows() {
            a[(k, k)] += lambda;
        }
        if let Some(ch) = a.cholesky() {
            let step = ch.solve(r);
            if step.iter().all(|x| x.is_finite()) {
                return Some(step);
            }
        }
        lambda = if lambda == 0.0 { 1e-12 * scale } else { lambda * 100.0 };
    }
    None
}

fn coordinate_bisection(
    model: &TiltedModel,
    gamma: f64,
    target: &DVector<f64>,
    mut theta: DVector<f64>,
    opts: &LegendreOptions,
) -> (DVector<f64>, f64, usize) {
    let n = model.n();
    let mean_of = |t: &DVector<f64>, k: usize| model.moments(gamma, t.as_slice()).means[k];
    let mut residual = f64::INFINITY;
    for sweep in 0..opts.max_bisection_sweeps {
        for k in 0..n {
            let mut lo = theta[k] - 1.0;
            let mut hi = theta[k] + 1.0;
            let mut probe = theta.clone();
            probe[k] = lo;
            while mean_of(&probe, k) > target[k] && lo > -1e3 {
                lo -= 2.0 * (hi - lo);
                probe[k] = lo;
            }
            probe[k] = hi;
            while mean_of(&probe, k) < target[k] && hi < 1e3 {
                hi += 2.0 * (hi - lo);
                probe[k] = hi;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                probe[k] = mid;
                if mean_of(&probe, k) < target[k] {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * mid.abs().max(1.0) {
                    break;
                }
            }
            theta[k] = 0.5 * (lo + hi);
        }
        let m = model.moments(gamma, theta.as_slice());
        residual = sup_norm(&(&m.means - target));
        if residual <= opts.target {
            return (theta, residual, sweep + 1);
        }
    }
    (theta, residual, opts.max_bisection_sweeps)
}

/// Covariance `B` of the free units under the tilted model at the solved `theta`, the Hessian
/// `H` of `G` by central differences of `theta(u)`, and the checks `BH = I`, `H > 0`.
#[derive(Debug, Clone)]
pub struct HessianReport {
    pub covariance: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    /// `max |(BH - I)_ij|`
    pub identity_error: f64,
    pub min_eigenvalue: f64,
}

/// Relative step used for the finite-difference Hessian.
const HESSIAN_STEP: f64 = 1e-5;

pub fn covariance_and_hessian_check(
    ctx: &ClampContext<'_>,
    u: &MeanVector,
    gamma: f64,
) -> Result<HessianReport> {
    let opts = LegendreOptions::default();
    let center = gibbs_free_energy_with(ctx, u, gamma, &opts)?.require_converged()?;
    let model = TiltedModel::new(ctx)?;
    let free = model.free.clone();
    let n = free.len();
    let theta_c: Vec<f64> = free.iter().map(|&i| center.theta[i]).collect();
    let cov = model.moments(gamma, &theta_c).cov;

    let mut hessian = DMatrix::zeros(n, n);
    for (col, &j) in free.iter().enumerate() {
        let uj = u.get(j);
        let h = HESSIAN_STEP * uj.min(1.0 - uj).min(0.5);
        let shifted = |delta: f64| -> Result<Vec<f64>> {
            let mut vals = u.values().to_vec();
            vals[j] += delta;
            let moved = MeanVector::new(vals, u.pinned().to_vec())?;
            let ev = gibbs_free_energy_with(ctx, &moved, gamma, &opts)?.require_converged()?;
            Ok(free.iter().map(|&i| ev.theta[i]).collect())
        };
        let plus = shifted(h)?;
        let minus = shifted(-h)?;
        for row in 0..n {
            hessian[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    let product = &cov * &hessian;
    let identity_error = product
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let (r, c) = (k % n, k / n);
            (x - if r == c { 1.0 } else { 0.0 }).abs()
        })
        .fold(0.0_f64, f64::max);
    let sym = (&hessian + hessian.transpose()) * 0.5;
    let min_eigenvalue = if n == 0 {
        f64::INFINITY
    } else {
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(HessianReport {
        covariance: cov,
        hessian,
        identity_error,
        min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::exact::enumerate::{exact_log_partition, exact_marginals};
    use crate::net::{BeliefNetwork, Edge};
    use approx::assert_abs_diff_eq;

    fn small_net() -> BeliefNetwork {
        BeliefNetwork::new(
            ActivationKind::Sigmoid,
            vec![0.3, -0.2, 0.5],
            vec![Edge::new(1, 0, 1.2), Edge::new(2, 0, -0.7), Edge::new(2, 1, 0.9)],
            vec![2],
        )
        .unwrap()
    }

    #[test]
    fn gamma_zero_is_entropy() {
        let net = BeliefNetwork::new(ActivationKind::Sigmoid, vec![0.0; 3], vec![], vec![]).unwrap();
        let ctx = ClampContext::unclamped(&net);
        let u = ctx.mean_vector(0.5).unwrap();
        let ev = gibbs_free_energy(&ctx, &u, 0.0).unwrap();
        assert!(ev.converged);
        assert_abs_diff_eq!(ev.value, -3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ev.value, -2.079442, epsilon = 1e-6);
    }

    #[test]
    fn exact_marginals_give_zero_field() {
        let net = small_net();
        let ctx = ClampContext::clamped(&net, &[1]).unwrap();
        let u = exact_marginals(&ctx).unwrap();
        let ev = gibbs_free_energy(&ctx, &u, 1.0).unwrap();
        assert!(ev.converged);
        assert_abs_diff_eq!(ev.value, -exact_log_partition(&ctx).unwrap(), epsilon = 1e-10);
        for t in ev.theta {
            assert_abs_diff_eq!(t, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn hessian_at_gamma_zero_is_diagonal() {
        let net = small_net();
        let ctx = ClampContext::clamped(&net, &[0]).unwrap();
        let u = ctx.mean_vector_from(&[0.3, 0.8]).unwrap();
        let rep = covariance_and_hessian_check(&ctx, &u, 0.0).unwrap();
        assert_abs_diff_eq!(rep.hessian[(0, 0)], 1.0 / (0.3 * 0.7), epsilon = 1e-4);
        assert_abs_diff_eq!(rep.hessian[(1, 1)], 1.0 / (0.8 * 0.2), epsilon = 1e-4);
        assert_abs_diff_eq!(rep.hessian[(0, 1)], 0.0, epsilon = 1e-5);
        assert!(rep.identity_error < 1e-4);
    }

    #[test]
    fn mismatched_clamp_rejected() {
        let net = small_net();
        let ctx = ClampContext::clamped(&net, &[0]).unwrap();
        let u = MeanVector::free(vec![0.5; 3]).unwrap();
        assert!(gibbs_free_energy(&ctx, &u, 1.0).is_err());
    }
}
