//! Log-barrier path following with damped Newton centering.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::program::{evaluate_constraint, LogAffine, LogConvexProgram, LseConstraint};
use crate::error::{invalid, Error, Result};

/// Centering stops once half the squared Newton decrement drops below this.
const NEWTON_EPS: f64 = 1e-10;
/// Margin phase one must reach on every residual.
const FEASIBLE_MARGIN: f64 = 1e-9;
/// Relative resolution assumed for barrier values.
const ROUNDOFF: f64 = 16.0 * f64::EPSILON;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target duality measure `#constraints / t`.
    pub tol: f64,
    /// Newton iterations allowed per centering step.
    pub max_newton_iters: usize,
    pub barrier_growth: f64,
    pub initial_t: f64,
    pub ls_alpha: f64,
    pub ls_beta: f64,
    pub big_m: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton_iters: 200,
            barrier_growth: 10.0,
            initial_t: 1.0,
            ls_alpha: 0.25,
            ls_beta: 0.5,
            big_m: 1e6,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.barrier_growth > 1.0) || !(self.initial_t > 0.0) {
            return Err(invalid("solver options need tol > 0, growth > 1 and t0 > 0"));
        }
        if !(self.ls_alpha > 0.0 && self.ls_alpha < 0.5 && self.ls_beta > 0.0 && self.ls_beta < 1.0) {
            return Err(invalid("line search needs alpha in (0, 0.5) and beta in (0, 1)"));
        }
        if self.max_newton_iters == 0 || !(self.big_m > 0.0) {
            return Err(invalid("max_newton_iters and big_m must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub phase_one_iterations: usize,
    pub outer_iterations: usize,
    pub duality_measure: f64,
    pub barrier_t: f64,
    /// Objective after each centering step.
    pub stage_objectives: Vec<f64>,
    pub stationarity: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOneOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `|| grad F0 + sum_k lambda_k grad r_k ||_2`.
    pub stationarity: f64,
    /// `|| lambda_k * r_k ||_2`.
    pub complementarity: f64,
    pub multipliers: Vec<f64>,
}

enum Objective<'a> {
    ExpSum(&'a [LogAffine]),
    Linear(usize),
}

struct Barrier<'a> {
    n: usize,
    objective: Objective<'a>,
    constraints: &'a [LseConstraint],
}

/// Gradient and Hessian pieces of one log-sum-exp constraint.
struct ConstraintEval {
    residual: f64,
    /// Gradient of the residual, sparse.
    grad: Vec<(usize, f64)>,
    /// Softmax weights of the terms.
    weights: Vec<f64>,
}

fn eval_with_grad(c: &LseConstraint, y: &[f64], dense: &mut [f64], touched: &mut Vec<usize>) -> ConstraintEval {
    let vals: Vec<f64> = c.terms.iter().map(|t| t.eval(y)).collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let offset = c.offset.as_ref().map_or(0.0, |o| o.eval(y));
    let residual = max + total.ln() - c.bound - offset;

    touched.clear();
    let bump = |k: usize, v: f64, dense: &mut [f64], touched: &mut Vec<usize>| {
        if dense[k] == 0.0 && !touched.contains(&k) {
            touched.push(k);
        }
        dense[k] += v;
    };
    for (t, &w) in c.terms.iter().zip(&weights) {
        for &(k, a) in &t.coeffs {
            bump(k, w * a, dense, touched);
        }
    }
    if let Some(o) = &c.offset {
        for &(k, a) in &o.coeffs {
            bump(k, -a, dense, touched);
        }
    }
    touched.sort_unstable();
    let grad = touched.iter().map(|&k| (k, std::mem::take(&mut dense[k]))).collect();
    ConstraintEval { residual, grad, weights }
}

impl<'a> Barrier<'a> {
    fn objective_value(&self, y: &[f64]) -> f64 {
        match self.objective {
            Objective::ExpSum(terms) => terms.iter().map(|t| t.eval(y).exp()).sum(),
            Objective::Linear(k) => y[k],
        }
    }

    /// Barrier value, or `None` outside the strict interior.
    fn value(&self, t: f64, y: &[f64]) -> Option<f64> {
        let mut f = t * self.objective_value(y);
        for c in self.constraints {
            let r = evaluate_constraint(c, y);
            if !(r < 0.0) {
                return None;
            }
            f -= (-r).ln();
        }
        f.is_finite().then_some(f)
    }

    fn derivatives(&self, t: f64, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        match self.objective {
            Objective::ExpSum(terms) => {
                for term in terms {
                    let e = t * term.eval(y).exp();
                    for &(i, ai) in &term.coeffs {
                        g[i] += e * ai;
                        for &(j, aj) in &term.coeffs {
                            h[(i, j)] += e * ai * aj;
                        }
                    }
                }
            }
            Objective::Linear(k) => g[k] += t,
        }
        let mut dense = vec![0.0; n];
        let mut touched = Vec::new();
        for c in self.constraints {
            let ev = eval_with_grad(c, y, &mut dense, &mut touched);
            let inv = 1.0 / -ev.residual;
            for &(i, gi) in &ev.grad {
                g[i] += inv * gi;
                for &(j, gj) in &ev.grad {
                    h[(i, j)] += inv * inv * gi * gj;
                }
            }
            if c.terms.len() > 1 {
                // Hessian of log-sum-exp: sum_t w_t a_t a_t^T - s s^T with s = sum_t w_t a_t.
                let mut s = vec![0.0; n];
                let mut idx = Vec::new();
                for (term, &w) in c.terms.iter().zip(&ev.weights) {
                    for &(i, ai) in &term.coeffs {
                        if s[i] == 0.0 && !idx.contains(&i) {
                            idx.push(i);
                        }
                        s[i] += w * ai;
                        for &(j, aj) in &term.coeffs {
                            h[(i, j)] += inv * w * ai * aj;
                        }
                    }
                }
                for &i in &idx {
                    for &j in &idx {
                        h[(i, j)] -= inv * s[i] * s[j];
                    }
                }
            }
        }
        (g, h)
    }

    fn residuals_ok(&self, y: &[f64]) -> bool {
        self.constraints.iter().all(|c| evaluate_constraint(c, y) < 0.0)
    }

    /// Damped Newton minimization of the barrier function at fixed `t`.
    fn center(&self, t: f64, y: &mut Vec<f64>, opts: &SolverOptions, iters: &mut usize) -> Result<()> {
        let mut f = self.value(t, y).ok_or_else(|| Error::Numerical {
            reason: "centering started outside the strict interior".into(),
            last: y.clone(),
        })?;
        for _ in 0..opts.max_newton_iters {
            let (g, h) = self.derivatives(t, y);
            let dy = newton_direction(h, &g).ok_or_else(|| Error::Numerical {
                reason: "Newton system could not be factorized".into(),
                last: y.clone(),
            })?;
            let slope = g.dot(&dy);
            let decrement = -slope;
            if !decrement.is_finite() || dy.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical { reason: "non-finite Newton step".into(), last: y.clone() });
            }
            if decrement / 2.0 <= NEWTON_EPS {
                return Ok(());
            }
            let mut step = 1.0;
            let before = f;
            let mut trial: Vec<f64>;
            loop {
                trial = y.iter().zip(dy.iter()).map(|(a, d)| a + step * d).collect();
                if self.residuals_ok(&trial) {
                    if let Some(ft) = self.value(t, &trial) {
                        if ft <= f + opts.ls_alpha * step * slope {
                            f = ft;
                            break;
                        }
                        // A change within the roundoff of f says nothing; fall
                        // back to the sign of the directional derivative.
                        if (ft - f).abs() <= ROUNDOFF * f.abs() && self.derivatives(t, &trial).0.dot(&dy) <= 0.0 {
                            f = f.min(ft);
                            break;
                        }
                    }
                }
                step *= opts.ls_beta;
                if step < MIN_STEP {
                    // Roundoff floor: no representable descent left.
                    if decrement < 1e-6 {
                        return Ok(());
                    }
                    return Err(Error::Numerical { reason: "line search stalled".into(), last: y.clone() });
                }
            }
            *y = trial;
            *iters += 1;
            if f >= before && decrement / 2.0 <= ROUNDOFF * f.abs() {
                // Progress is below the resolution of f.
                return Ok(());
            }
        }
        Err(Error::IterationLimit { iterations: *iters, last: y.clone() })
    }
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut hs = h.clone();
        if shift > 0.0 {
            for i in 0..hs.nrows() {
                hs[(i, i)] += shift;
            }
        }
        if let Some(chol) = Cholesky::new(hs) {
            return Some(-chol.solve(g));
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
    }
    None
}

/// Finds a point with every residual at most `-1e-9`, or proves there is none.
///
/// Minimizes an auxiliary slack `s` subject to `r_k(y) <= s`, `s >= -1`, and a
/// box around the start, with the same barrier machinery as [`solve`].
pub fn phase_one(p: &LogConvexProgram, opts: &SolverOptions, start: Option<&[f64]>) -> Result<PhaseOneOutcome> {
    p.validate()?;
    opts.validate()?;
    let n = p.num_vars;
    let y0: Vec<f64> = match start {
        Some(s) if s.len() == n => s.to_vec(),
        Some(s) => return Err(invalid(format!("start has {} entries, program {n}", s.len()))),
        None => vec![0.0; n],
    };
    let max0 = p.max_residual(&y0);
    if p.constraints.is_empty() || max0 < -FEASIBLE_MARGIN {
        return Ok(PhaseOneOutcome { y: y0, iterations: 0 });
    }

    // Start with a box close to the initial point so the returned point stays
    // near it; widen only if the small box leaves no feasible point.
    let scale = y0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut iterations = 0;
    let mut verdict = Error::Infeasible { slack: f64::INFINITY };
    for radius in [25.0 + 2.0 * scale, 1e3 + scale, 1e6 + scale] {
        match phase_one_boxed(p, opts, &y0, max0, radius, &mut iterations) {
            Ok(y) => return Ok(PhaseOneOutcome { y, iterations }),
            Err(e @ Error::Infeasible { .. }) => verdict = e,
            Err(e) => return Err(e),
        }
    }
    Err(verdict)
}

fn phase_one_boxed(
    p: &LogConvexProgram,
    opts: &SolverOptions,
    y0: &[f64],
    max0: f64,
    radius: f64,
    iters: &mut usize,
) -> Result<Vec<f64>> {
    let n = p.num_vars;
    let s_idx = n;
    let mut aux: Vec<LseConstraint> = p
        .constraints
        .iter()
        .map(|c| {
            let mut off = c.offset.clone().unwrap_or_default();
            off.add(s_idx, 1.0);
            LseConstraint { offset: Some(off), ..c.clone() }
        })
        .collect();
    aux.push(LseConstraint::linear(LogAffine::var(s_idx, -1.0), 1.0));
    for k in 0..n {
        aux.push(LseConstraint::linear(LogAffine::var(k, 1.0), radius));
        aux.push(LseConstraint::linear(LogAffine::var(k, -1.0), radius));
    }
    let barrier = Barrier { n: n + 1, objective: Objective::Linear(s_idx), constraints: &aux };
    let mut y = y0.to_vec();
    y.push(max0.max(-0.5) + 1.0);

    let m = aux.len() as f64;
    let mut t = opts.initial_t;
    loop {
        barrier.center(t, &mut y, opts, iters)?;
        if p.max_residual(&y[..n]) < -FEASIBLE_MARGIN {
            y.truncate(n);
            return Ok(y);
        }
        let slack = y[s_idx];
        let gap = m / t;
        if slack - gap > 0.0 || gap < opts.tol {
            return Err(Error::Infeasible { slack });
        }
        t *= opts.barrier_growth;
    }
}

/// Barrier path following from a strictly feasible point (phase one is run
/// when `warm_start` is absent or not strictly feasible).
pub fn solve(p: &LogConvexProgram, opts: &SolverOptions, warm_start: Option<&[f64]>) -> Result<GpSolution> {
    p.validate()?;
    opts.validate()?;
    if p.constraints.is_empty() {
        return Err(invalid("program without constraints is unbounded"));
    }
    let (mut y, phase_one_iterations) = match warm_start {
        Some(w) if w.len() == p.num_vars && p.max_residual(w) < 0.0 => (w.to_vec(), 0),
        _ => {
            let ph = phase_one(p, opts, warm_start.filter(|w| w.len() == p.num_vars))?;
            (ph.y, ph.iterations)
        }
    };
    let barrier = Barrier { n: p.num_vars, objective: Objective::ExpSum(&p.objective_terms), constraints: &p.constraints };
    let m = p.constraints.len() as f64;
    let mut t = opts.initial_t;
    let mut diag = Diagnostics { phase_one_iterations, ..Default::default() };
    loop {
        barrier.center(t, &mut y, opts, &mut diag.iterations)?;
        diag.outer_iterations += 1;
        let objective = p.objective(&y);
        diag.stage_objectives.push(objective);
        // Relative gap: powers can be nanowatts.
        if m / t < opts.tol * objective.max(f64::MIN_POSITIVE) {
            break;
        }
        t *= opts.barrier_growth;
    }
    let kkt = kkt_report(p, &y, t);
    diag.duality_measure = m / t;
    diag.barrier_t = t;
    diag.stationarity = kkt.stationarity;
    diag.complementarity = kkt.complementarity;
    let objective = p.objective(&y);
    if !objective.is_finite() {
        return Err(Error::Numerical { reason: "non-finite objective".into(), last: y });
    }
    Ok(GpSolution { y, objective, diagnostics: diag })
}

/// KKT residuals at a strictly feasible `y`, with the multipliers
/// `lambda_k = 1 / (t * -r_k(y))` of the barrier stage at parameter `t`.
pub fn kkt_report(p: &LogConvexProgram, y: &[f64], t: f64) -> KktReport {
    let n = p.num_vars;
    let mut grad = vec![0.0; n];
    for term in &p.objective_terms {
        let e = term.eval(y).exp();
        for &(k, a) in &term.coeffs {
            grad[k] += e * a;
        }
    }
    let mut dense = vec![0.0; n];
    let mut touched = Vec::new();
    let mut multipliers = Vec::with_capacity(p.constraints.len());
    let mut comp = 0.0;
    for c in &p.constraints {
        let ev = eval_with_grad(c, y, &mut dense, &mut touched);
        let lambda = 1.0 / (t * -ev.residual);
        for &(k, gk) in &ev.grad {
            grad[k] += lambda * gk;
        }
        comp += (lambda * ev.residual).powi(2);
        multipliers.push(lambda);
    }
    KktReport {
        stationarity: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
        complementarity: comp.sqrt(),
        multipliers,
    }
}
