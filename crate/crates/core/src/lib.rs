//! Mean-field approximations for sigmoid and noisy-or belief networks.
//!
//! The crate provides
//!
//! * [`net`]: the network model, its energy and the Taylor-expanded energy,
//! * [`exact`]: brute-force enumeration oracles (partition functions, marginals, the Gibbs
//!   free energy by numerical Legendre inversion, gamma-derivatives),
//! * [`meanfield`]: the `Ĝ11`/`Ĝ12`/`Ĝ22` objectives, gradients and fixed-point solver,
//! * [`learning`]: likelihood-gradient training and the bars dataset,
//! * [`harness`]: seeded random-network experiments and the validation suite.
//!
//! Everything operates at temperature 1.

pub mod activation;
pub mod clamp;
pub mod error;
pub mod exact;
pub mod format;
pub mod harness;
pub mod learning;
pub mod meanfield;
pub mod net;

pub use activation::ActivationKind;
pub use clamp::ClampContext;
pub use error::{Error, Result};
pub use meanfield::{error_metric, Scheme, SolveResult, SolverOptions};
pub use net::{BeliefNetwork, Edge, MeanVector, State};
