//! Geometric programs in convex form.
//!
//! After the change of variables `y = ln(x)` a geometric program becomes
//!
//! ```text
//! minimize    sum_t exp(a_t . y + c_t)
//! subject to  log sum_s exp(a_ks . y + c_ks) <= bound_k + offset_k(y)
//! ```
//!
//! which is solved here with a log-barrier interior-point method. Phase one
//! locates a strictly feasible point, so callers never supply one.

mod barrier;
mod program;

pub use barrier::{kkt_report, phase_one, solve, Diagnostics, GpSolution, KktReport, PhaseOneOutcome, SolverOptions};
pub use program::{
    evaluate_constraint, log_sum_exp, LogAffine, LogConvexProgram, LseConstraint, VarMeta, VarRole, INACTIVE_BOUND,
};
