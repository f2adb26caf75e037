//! Transmit-power minimization for OFDMA heterogeneous networks with
//! log-normally distributed channel gains.
//!
//! The pipeline is:
//!
//! 1. describe the network with a [`Scenario`] (or synthesize one),
//! 2. pick a monomial lower bound of the Shannon rate ([`approx`]),
//! 3. assemble the deterministic or worst-case geometric program
//!    ([`robust`]) for an association chosen by [`association`],
//! 4. solve it in log variables with the barrier method in [`gp`],
//! 5. check the result against sampled channels ([`montecarlo`]).

pub mod approx;
pub mod association;
pub mod error;
pub mod gp;
pub mod model;
pub mod montecarlo;
pub mod normal;
pub mod robust;

pub use approx::PiecewiseApprox;
pub use association::{AssocStrategy, BnbOptions, BnbOutcome};
pub use error::{Error, Result};
pub use gp::{LogAffine, LogConvexProgram, LseConstraint, SolverOptions};
pub use model::{Association, GainSample, Scenario, SolveResult, SolveStatus};
pub use montecarlo::{GainDistribution, ViolationReport};
pub use robust::{BoxPolicy, Formulation, RobustConfig, UncertaintyBox};
