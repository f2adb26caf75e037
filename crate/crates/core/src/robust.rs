//! Uncertainty boxes and the deterministic / worst-case geometric programs.
//!
//! With `g_ij = exp(c (mu_ij + rho_ij sigma_ij))`, `c = ln(10)/10`, a user's
//! SINR is smallest when its serving deviation sits at the lower end of the
//! box and every interferer at the upper end. Enforcing the throughput
//! constraint at that corner covers the whole box, and the box is sized so
//! that it holds the deviations with the requested probability.

use serde::{Deserialize, Serialize};

use crate::approx::{a_coefficient, PiecewiseApprox};
use crate::error::{invalid, Error, Result};
use crate::gp::{self, LogAffine, LogConvexProgram, LseConstraint, SolverOptions, VarRole};
use crate::model::{Association, GainSample, Scenario, SolveResult, SolveStatus, DB_TO_NEPER};
use crate::normal::inv_normal_cdf;

/// Log-variables are kept within this many nepers below their natural upper
/// limit (`ln P_max` for powers, 0 for shares); otherwise the barrier
/// problem of an idle base station has no minimizer.
pub const LOG_FLOOR_SPAN: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxPolicy {
    /// Serving deviation in `[lo, +inf)`, interferers in `(-inf, hi]`.
    #[default]
    OneSided,
    /// Every deviation in `[lo, hi]`.
    TwoSided,
}

impl std::str::FromStr for BoxPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sided" => Ok(BoxPolicy::OneSided),
            "two-sided" => Ok(BoxPolicy::TwoSided),
            _ => Err(invalid(format!("unknown box policy {s:?}"))),
        }
    }
}

/// Half-width `rho` of the per-base-station interval for a user whose joint
/// probability target is `1 - alpha`, split evenly over `n_bs` factors.
///
/// The interval is `[-rho, +rho]`; under the one-sided policy only the side
/// that hurts the user is finite.
pub fn box_from_alpha(alpha: f64, n_bs: usize, policy: BoxPolicy) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_bs == 0 {
        return Err(invalid("need at least one base station"));
    }
    // 1 - phi, computed without cancellation so tiny alphas keep their tail.
    let miss = -((-alpha).ln_1p() / n_bs as f64).exp_m1();
    let rho = match policy {
        BoxPolicy::OneSided => -inv_normal_cdf(miss)?,
        BoxPolicy::TwoSided => -inv_normal_cdf(0.5 * miss)?,
    };
    Ok((-rho, rho))
}

/// Probability mass of one factor of the box.
pub fn factor_probability(rho: f64, policy: BoxPolicy) -> f64 {
    use crate::normal::normal_cdf;
    match policy {
        BoxPolicy::OneSided => normal_cdf(rho),
        BoxPolicy::TwoSided => normal_cdf(rho) - normal_cdf(-rho),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBox {
    pub rho_lo: Vec<Vec<f64>>,
    pub rho_hi: Vec<Vec<f64>>,
    pub policy: BoxPolicy,
    /// Joint probability `1 - alpha_i` each user's box realizes.
    pub target: Vec<f64>,
    /// Per-base-station factor `phi` of each user.
    pub phi: Vec<f64>,
}

impl UncertaintyBox {
    pub fn from_alphas(alphas: &[f64], n_bs: usize, policy: BoxPolicy) -> Result<Self> {
        let rhos = alphas
            .iter()
            .map(|&a| box_from_alpha(a, n_bs, policy).map(|(_, hi)| hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_rhos(&rhos, n_bs, policy))
    }

    pub fn uniform(alpha: f64, n: usize, n_bs: usize, policy: BoxPolicy) -> Result<Self> {
        Self::from_alphas(&vec![alpha; n], n_bs, policy)
    }

    /// Box with the given half-width per user; the targets follow from it.
    pub fn from_rhos(rhos: &[f64], n_bs: usize, policy: BoxPolicy) -> Self {
        let phi: Vec<f64> = rhos.iter().map(|&r| factor_probability(r, policy)).collect();
        Self {
            rho_lo: rhos.iter().map(|&r| vec![-r; n_bs]).collect(),
            rho_hi: rhos.iter().map(|&r| vec![r; n_bs]).collect(),
            policy,
            target: phi.iter().map(|p| p.powi(n_bs as i32)).collect(),
            phi,
        }
    }

    pub fn n(&self) -> usize {
        self.rho_lo.len()
    }

    /// Interval a deviation must fall in, given the user's serving station.
    pub fn interval(&self, i: usize, j: usize, serving: usize) -> (f64, f64) {
        match self.policy {
            BoxPolicy::TwoSided => (self.rho_lo[i][j], self.rho_hi[i][j]),
            BoxPolicy::OneSided if j == serving => (self.rho_lo[i][j], f64::INFINITY),
            BoxPolicy::OneSided => (f64::NEG_INFINITY, self.rho_hi[i][j]),
        }
    }

    /// Whether user `i`'s deviation row lies inside its box.
    pub fn contains(&self, i: usize, rho_row: &[f64], serving: usize) -> bool {
        rho_row.iter().enumerate().all(|(j, &r)| {
            let (lo, hi) = self.interval(i, j, serving);
            r >= lo && r <= hi
        })
    }

    pub fn check_shape(&self, sc: &Scenario) -> Result<()> {
        if self.n() != sc.n || self.rho_lo.iter().chain(&self.rho_hi).any(|r| r.len() != sc.n_bs) {
            return Err(Error::Shape(format!("box is not {}x{}", sc.n, sc.n_bs)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("box serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("box JSON: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub alpha: f64,
    pub sigma_scale: f64,
    pub policy: BoxPolicy,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self { alpha: 0.0993, sigma_scale: 1.0, policy: BoxPolicy::OneSided }
    }
}

impl RobustConfig {
    pub fn uncertainty_box(&self, n: usize, n_bs: usize) -> Result<UncertaintyBox> {
        UncertaintyBox::uniform(self.alpha, n, n_bs, self.policy)
    }
}

/// `log((eta^2/g_j) e^{-q_j - u/b} + sum_{k != j} (g_k/g_j) e^{q_k - q_j - u/b})`,
/// i.e. `-ln S_ij - u/b`.
pub fn fhat_value(q: &[f64], u: f64, gains: &[f64], noise: f64, j: usize, b: f64) -> Result<f64> {
    if gains.iter().any(|&g| !(g > 0.0)) {
        return Err(invalid("gains must be positive"));
    }
    if j >= q.len() || q.len() != gains.len() || !(b > 0.0) {
        return Err(invalid("f-hat needs matching lengths, a valid j and b > 0"));
    }
    let mut terms = vec![LogAffine::constant((noise / gains[j]).ln() - q[j] - u / b)];
    for k in (0..q.len()).filter(|&k| k != j) {
        terms.push(LogAffine::constant((gains[k] / gains[j]).ln() + q[k] - q[j] - u / b));
    }
    Ok(gp::log_sum_exp(&terms, &[]))
}

/// dB gain of pair `(i, j)` at the worst corner of the box.
fn worst_db(sc: &Scenario, bx: Option<&UncertaintyBox>, i: usize, j: usize, serving: usize) -> f64 {
    let mu = sc.mu_db[i][j];
    let sigma = sc.sigma_db[i][j];
    match bx {
        None => mu,
        Some(_) if sigma == 0.0 => mu + 0.0,
        Some(b) => {
            let rho = if j == serving { b.rho_lo[i][j] } else { b.rho_hi[i][j] };
            mu + rho * sigma
        }
    }
}

pub fn worst_case_gains(sc: &Scenario, bx: &UncertaintyBox, assoc: &Association) -> Result<GainSample> {
    bx.check_shape(sc)?;
    if assoc.len() != sc.n {
        return Err(Error::Shape("association length differs from n".into()));
    }
    Ok(GainSample {
        g: (0..sc.n)
            .map(|i| {
                (0..sc.n_bs)
                    .map(|j| (DB_TO_NEPER * worst_db(sc, Some(bx), i, j, assoc.serving[i])).exp())
                    .collect()
            })
            .collect(),
    })
}

/// Upper bound of a log-sum-exp over a box of variable ranges.
fn lse_upper(terms: &[LogAffine], range: &[(f64, f64)]) -> f64 {
    let tops: Vec<LogAffine> = terms
        .iter()
        .map(|t| {
            let top = t.coeffs.iter().map(|&(v, c)| if c > 0.0 { c * range[v].1 } else { c * range[v].0 }).sum::<f64>();
            LogAffine::constant(t.constant + top)
        })
        .collect();
    gp::log_sum_exp(&tops, &[])
}

/// Program plus the map from model quantities to its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProgram {
    pub program: LogConvexProgram,
    /// Variable of `q_j`.
    pub q: Vec<usize>,
    /// Variable of `u_ij` for every candidate pair.
    pub u: Vec<Vec<Option<usize>>>,
    /// Relaxed `z_ij` per user and candidate, `None` for fixed users. The last
    /// candidate's indicator is eliminated as `1 - sum(others)`.
    pub z: Vec<Option<Vec<(usize, Option<usize>)>>>,
}

impl BuiltProgram {
    /// Relaxed `z_ij` values at `y`, per user, for undecided users.
    pub fn indicator_values(&self, y: &[f64]) -> Vec<Option<Vec<(usize, f64)>>> {
        self.z
            .iter()
            .map(|zs| {
                zs.as_ref().map(|list| {
                    let explicit: f64 = list.iter().filter_map(|(_, v)| v.map(|k| y[k])).sum();
                    list.iter()
                        .map(|&(j, v)| (j, v.map_or(1.0 - explicit, |k| y[k])))
                        .collect()
                })
            })
            .collect()
    }
}

/// A scenario, approximation and optional uncertainty box: everything needed
/// to build the program of any association.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulation {
    pub scenario: Scenario,
    pub approx: PiecewiseApprox,
    pub uncertainty: Option<UncertaintyBox>,
}

impl Formulation {
    pub fn deterministic(scenario: Scenario, approx: PiecewiseApprox) -> Result<Self> {
        scenario.validate()?;
        Ok(Self { scenario, approx, uncertainty: None })
    }

    pub fn robust(scenario: Scenario, approx: PiecewiseApprox, bx: UncertaintyBox) -> Result<Self> {
        scenario.validate()?;
        bx.check_shape(&scenario)?;
        Ok(Self { scenario, approx, uncertainty: Some(bx) })
    }

    /// Gains the program's constraints are written for.
    pub fn design_gains(&self, assoc: &Association) -> Result<GainSample> {
        match &self.uncertainty {
            Some(bx) => worst_case_gains(&self.scenario, bx, assoc),
            None => Ok(self.scenario.mean_gains()),
        }
    }

    pub fn build(&self, assoc: &Association) -> Result<BuiltProgram> {
        if assoc.len() != self.scenario.n {
            return Err(Error::Shape("association length differs from n".into()));
        }
        Association::new(assoc.serving.clone(), self.scenario.n_bs)?;
        let candidates: Vec<Vec<usize>> = assoc.serving.iter().map(|&j| vec![j]).collect();
        self.assemble(&candidates, 0.0)
    }

    /// Big-M relaxation where user `i` may attach to any of `candidates[i]`.
    pub fn build_relaxation(&self, candidates: &[Vec<usize>], big_m: f64) -> Result<BuiltProgram> {
        if candidates.len() != self.scenario.n
            || candidates.iter().any(|c| c.is_empty() || c.iter().any(|&j| j >= self.scenario.n_bs))
        {
            return Err(invalid("every user needs a non-empty list of valid candidates"));
        }
        self.assemble(candidates, big_m)
    }

    fn assemble(&self, candidates: &[Vec<usize>], big_m: f64) -> Result<BuiltProgram> {
        let sc = &self.scenario;
        let bx = self.uncertainty.as_ref();
        let mut p = LogConvexProgram::default();
        // Range of every log-variable implied by its cap and floor.
        let mut range: Vec<(f64, f64)> = Vec::new();
        let q: Vec<usize> = (0..sc.n_bs)
            .map(|j| {
                let cap = sc.p_max_w[j].ln();
                range.push((cap - LOG_FLOOR_SPAN, cap));
                p.add_var(format!("q[{j}]"), VarRole::LogPower)
            })
            .collect();
        let mut u = vec![vec![None; sc.n_bs]; sc.n];
        let mut z = vec![None; sc.n];
        for (i, cands) in candidates.iter().enumerate() {
            for &j in cands {
                range.push((-LOG_FLOOR_SPAN, 0.0));
                u[i][j] = Some(p.add_var(format!("u[{i},{j}]"), VarRole::LogShare));
            }
            if cands.len() > 1 {
                let list: Vec<(usize, Option<usize>)> = cands
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| {
                        let var = (k + 1 < cands.len()).then(|| {
                            range.push((0.0, 1.0));
                            p.add_var(format!("z[{i},{j}]"), VarRole::Indicator)
                        });
                        (j, var)
                    })
                    .collect();
                z[i] = Some(list);
            }
        }

        for j in 0..sc.n_bs {
            p.objective_terms.push(LogAffine::var(q[j], 1.0));
        }
        for j in 0..sc.n_bs {
            let cap = sc.p_max_w[j].ln();
            p.push(LseConstraint::linear(LogAffine::var(q[j], 1.0), cap).labeled(format!("cap[{j}]")));
            p.push(LseConstraint::linear(LogAffine::var(q[j], -1.0), LOG_FLOOR_SPAN - cap).labeled(format!("floor_q[{j}]")));
        }
        for i in 0..sc.n {
            for j in 0..sc.n_bs {
                if let Some(v) = u[i][j] {
                    p.push(LseConstraint::linear(LogAffine::var(v, 1.0), 0.0).labeled(format!("share[{i},{j}]")));
                    p.push(LseConstraint::linear(LogAffine::var(v, -1.0), LOG_FLOOR_SPAN).labeled(format!("floor_u[{i},{j}]")));
                }
            }
        }
        for j in 0..sc.n_bs {
            let terms: Vec<LogAffine> = (0..sc.n).filter_map(|i| u[i][j]).map(|v| LogAffine::var(v, 1.0)).collect();
            if terms.len() > 1 {
                p.push(LseConstraint::new(terms, 0.0).labeled(format!("resources[{j}]")));
            }
        }
        for (i, zs) in z.iter().enumerate() {
            if let Some(list) = zs {
                let vars: Vec<usize> = list.iter().filter_map(|(_, v)| *v).collect();
                for &v in &vars {
                    p.push(LseConstraint::linear(LogAffine::var(v, -1.0), 0.0).labeled(format!("z_lo[{i}]")));
                }
                let sum = vars.iter().fold(LogAffine::default(), |acc, &v| acc.with(v, 1.0));
                p.push(LseConstraint::linear(sum, 1.0).labeled(format!("z_sum[{i}]")));
            }
        }

        let ln_noise = sc.noise_w.ln();
        for (i, cands) in candidates.iter().enumerate() {
            for &j in cands {
                let uv = u[i][j].expect("candidate share variable");
                let serving_db = worst_db(sc, bx, i, j, j);
                for (l, (a_l, b_l)) in self.approx.pieces().enumerate() {
                    let bound = a_coefficient(sc.bandwidth_hz[j], sc.demand_bps[i], a_l, b_l)?;
                    let mut terms = vec![LogAffine::constant(ln_noise - DB_TO_NEPER * serving_db)
                        .with(q[j], -1.0)
                        .with(uv, -1.0 / b_l)];
                    for k in (0..sc.n_bs).filter(|&k| k != j) {
                        let interferer_db = worst_db(sc, bx, i, k, j);
                        terms.push(
                            LogAffine::constant(DB_TO_NEPER * (interferer_db - serving_db))
                                .with(q[k], 1.0)
                                .with(q[j], -1.0)
                                .with(uv, -1.0 / b_l),
                        );
                    }
                    // Offset carrying M * (1 - z_ij) for undecided users. M only
                    // has to switch the constraint off inside the variable box.
                    let offset = z[i].as_ref().map(|list| {
                        let m = (lse_upper(&terms, &range) - bound + 1.0).clamp(1.0, big_m.max(1.0));
                        match list.iter().find(|&&(jj, _)| jj == j).expect("candidate listed").1 {
                            Some(v) => LogAffine { coeffs: vec![(v, -m)], constant: m },
                            None => list.iter().filter_map(|(_, v)| *v).fold(LogAffine::default(), |acc, v| acc.with(v, m)),
                        }
                    });
                    let mut c = LseConstraint::new(terms, bound).labeled(format!("rate[{i},{j},{l}]"));
                    c.offset = offset;
                    p.push(c);
                }
            }
        }
        p.validate()?;
        Ok(BuiltProgram { program: p, q, u, z })
    }

    /// Solves the program of a fixed association.
    pub fn solve(&self, assoc: &Association, opts: &SolverOptions) -> Result<SolveResult> {
        let built = self.build(assoc)?;
        let sol = gp::solve(&built.program, opts, None)?;
        Ok(self.extract(&built, assoc, &sol.y, sol.diagnostics))
    }

    pub(crate) fn extract(
        &self,
        built: &BuiltProgram,
        assoc: &Association,
        y: &[f64],
        diagnostics: gp::Diagnostics,
    ) -> SolveResult {
        let sc = &self.scenario;
        let power_w: Vec<f64> = built.q.iter().map(|&v| y[v].exp()).collect();
        let x = (0..sc.n)
            .map(|i| {
                (0..sc.n_bs)
                    .map(|j| match built.u[i][j] {
                        Some(v) if assoc.serving[i] == j => y[v].exp(),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        SolveResult {
            objective: power_w.iter().sum(),
            power_w,
            x,
            assoc: assoc.clone(),
            status: SolveStatus::Optimal,
            diagnostics,
        }
    }
}

pub fn build_migp(sc: &Scenario, pw: &PiecewiseApprox, assoc: &Association) -> Result<LogConvexProgram> {
    Ok(Formulation::deterministic(sc.clone(), pw.clone())?.build(assoc)?.program)
}

pub fn build_robust(
    sc: &Scenario,
    pw: &PiecewiseApprox,
    bx: &UncertaintyBox,
    assoc: &Association,
) -> Result<LogConvexProgram> {
    Ok(Formulation::robust(sc.clone(), pw.clone(), bx.clone())?.build(assoc)?.program)
}
