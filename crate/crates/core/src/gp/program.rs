use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `constant + sum_k coeff_k * y[var_k]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogAffine {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LogAffine {
    pub fn constant(c: f64) -> Self {
        Self { coeffs: Vec::new(), constant: c }
    }

    pub fn var(index: usize, coeff: f64) -> Self {
        Self { coeffs: vec![(index, coeff)], constant: 0.0 }
    }

    /// Adds `coeff * y[index]`, merging repeated indices.
    pub fn with(mut self, index: usize, coeff: f64) -> Self {
        self.add(index, coeff);
        self
    }

    pub fn add(&mut self, index: usize, coeff: f64) {
        match self.coeffs.iter_mut().find(|(k, _)| *k == index) {
            Some((_, c)) => *c += coeff,
            None => self.coeffs.push((index, coeff)),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(k, c)| c * y[k]).sum::<f64>()
    }
}

/// `log sum_t exp(term_t(y)) <= bound + offset(y)`.
///
/// `offset` is affine and sits outside the log-sum-exp, so the constraint
/// stays convex; relaxed Big-M indicators enter through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LseConstraint {
    pub terms: Vec<LogAffine>,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<LogAffine>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl LseConstraint {
    pub fn new(terms: Vec<LogAffine>, bound: f64) -> Self {
        Self { terms, bound, offset: None, label: String::new() }
    }

    /// Single affine term: `term(y) <= bound`.
    pub fn linear(term: LogAffine, bound: f64) -> Self {
        Self::new(vec![term], bound)
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_offset(mut self, offset: LogAffine) -> Self {
        self.offset = Some(offset);
        self
    }
}

/// Max-shifted log-sum-exp of the terms at `y`.
pub fn log_sum_exp(terms: &[LogAffine], y: &[f64]) -> f64 {
    let vals: Vec<f64> = terms.iter().map(|t| t.eval(y)).collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Constraint value minus its bound; `<= 0` means satisfied.
pub fn evaluate_constraint(c: &LseConstraint, y: &[f64]) -> f64 {
    let offset = c.offset.as_ref().map_or(0.0, |o| o.eval(y));
    log_sum_exp(&c.terms, y) - c.bound - offset
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    /// `q_j = ln P_j`.
    LogPower,
    /// `u_ij = ln x_ij`.
    LogShare,
    /// Relaxed association indicator.
    Indicator,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarMeta {
    pub name: String,
    pub role: VarRole,
}

/// Minimize `sum_t exp(objective_t(y))` subject to log-sum-exp constraints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogConvexProgram {
    pub num_vars: usize,
    pub objective_terms: Vec<LogAffine>,
    pub constraints: Vec<LseConstraint>,
    pub vars: Vec<VarMeta>,
}

/// Constraints whose constant bound exceeds this are never active; they are
/// left out of the barrier.
pub const INACTIVE_BOUND: f64 = 1e4;

impl LogConvexProgram {
    pub fn add_var(&mut self, name: impl Into<String>, role: VarRole) -> usize {
        self.vars.push(VarMeta { name: name.into(), role });
        self.num_vars += 1;
        self.num_vars - 1
    }

    /// Appends a constraint unless its bound makes it vacuous.
    pub fn push(&mut self, c: LseConstraint) {
        if c.offset.is_none() && c.bound > INACTIVE_BOUND {
            return;
        }
        self.constraints.push(c);
    }

    pub fn validate(&self) -> Result<()> {
        let check = |t: &LogAffine| -> Result<()> {
            if !t.constant.is_finite() {
                return Err(invalid("non-finite constant in program"));
            }
            for &(k, c) in &t.coeffs {
                if k >= self.num_vars || !c.is_finite() {
                    return Err(invalid(format!("bad coefficient ({k}, {c}) for {} variables", self.num_vars)));
                }
            }
            Ok(())
        };
        for t in &self.objective_terms {
            check(t)?;
        }
        for c in &self.constraints {
            if c.terms.is_empty() {
                return Err(invalid("constraint without terms"));
            }
            if !c.bound.is_finite() {
                return Err(invalid("non-finite constraint bound"));
            }
            c.terms.iter().try_for_each(check)?;
            if let Some(o) = &c.offset {
                check(o)?;
            }
        }
        Ok(())
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        self.objective_terms.iter().map(|t| t.eval(y).exp()).sum()
    }

    pub fn max_residual(&self, y: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| evaluate_constraint(c, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }
}
