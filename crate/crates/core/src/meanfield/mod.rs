//! Mean-field approximations of `-ln Z`: the objectives, their gradients, the fixed-point
//! solver and the relative error measure.

mod moments;
mod objective;
mod solver;

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

pub use moments::{central_moment_x, g_coefficient};
pub use objective::{
    evaluate, objective, objective_gradient, objective_with_flipped_second_order, Evaluation,
};
pub use solver::{solve_fixed_point, Descent, Init, Schedule, SolveResult, SolverOptions, MEAN_EDGE};

/// Which truncation to use: `G{M}{C}` keeps `M` orders of the interaction expansion of
/// the Gibbs free energy and `C` orders of the Taylor expansion of the energy in the
/// parent-field fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    G11,
    G12,
    G22,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::G11, Scheme::G12, Scheme::G22];

    pub fn coupling_order(self) -> usize {
        match self {
            Scheme::G11 | Scheme::G12 => 1,
            Scheme::G22 => 2,
        }
    }

    pub fn taylor_order(self) -> usize {
        match self {
            Scheme::G11 => 1,
            Scheme::G12 | Scheme::G22 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::G11 => "g11",
            Scheme::G12 => "g12",
            Scheme::G22 => "g22",
        }
    }

    /// `G22` has closed forms only for the activations shipped here.
    pub fn supports(self, kind: ActivationKind) -> bool {
        match self {
            Scheme::G11 | Scheme::G12 => true,
            Scheme::G22 => matches!(kind, ActivationKind::Sigmoid | ActivationKind::NoisyOr),
        }
    }

    pub(crate) fn check(self, kind: ActivationKind) -> Result<()> {
        if self.supports(kind) {
            Ok(())
        } else {
            Err(Error::IncompatibleScheme {
                scheme: self.name(),
                activation: kind.name(),
            })
        }
    }

    /// Parses `g11`/`g12`/`g22`, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<Scheme>> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Scheme::ALL.to_vec());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g11" => Ok(Scheme::G11),
            "g12" => Ok(Scheme::G12),
            "g22" => Ok(Scheme::G22),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// `|ln Z|` at or below this is treated as an unclamped (degenerate) network.
pub const DEGENERATE_LN_Z: f64 = 1e-12;

/// Relative error of an approximation `g_hat` of `-ln Z`: `-g_hat / ln_z - 1`.
pub fn error_metric(g_hat: f64, ln_z: f64) -> Result<f64> {
    if ln_z.abs() <= DEGENERATE_LN_Z {
        return Err(Error::DegenerateClamp);
    }
    Ok(-g_hat / ln_z - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn error_metric_values() {
        assert_eq!(error_metric(1.5, -1.5).unwrap(), 0.0);
        assert_abs_diff_eq!(error_metric(2.2, -2.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(error_metric(0.3, 0.0), Err(Error::DegenerateClamp));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!(Scheme::parse_list("all").unwrap(), Scheme::ALL.to_vec());
        assert_eq!(Scheme::parse_list("g12,G22").unwrap(), vec![Scheme::G12, Scheme::G22]);
        assert!(Scheme::parse_list("g33").is_err());
    }
}
