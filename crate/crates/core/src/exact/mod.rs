//! Brute-force enumeration over small networks: the ground truth the mean-field schemes are
//! checked against.

mod enumerate;
mod legendre;
mod expansion;

pub use enumerate::{
    exact_log_partition, exact_log_partition_gamma, exact_ls, exact_marginals,
    factorial_expectation, log_likelihood, neg_entropy, ENUMERATION_BOUND, ENUMERATION_WARN,
};
pub use legendre::{
    covariance_and_hessian_check, gibbs_free_energy, gibbs_free_energy_with, GibbsEvaluation,
    HessianReport, LegendreOptions,
};
pub use expansion::{oracle_objective, expansion_derivative_oracle};
