//! Monte Carlo validation of a fixed solution under random channel gains.
//!
//! Deviation `rho_ij` of every (user, base station) pair comes from its own
//! ChaCha8 stream, so results do not depend on how work is scheduled.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{GainSample, Scenario, SolveResult, DB_TO_NEPER};
use crate::robust::UncertaintyBox;

pub const DEFAULT_UNIFORM_HALF_WIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GainDistribution {
    LogNormal,
    /// Deviations uniform on `[-k, k]`.
    Uniform { k: f64 },
    /// Standard (unscaled) Student t deviates.
    StudentT { dof: f64 },
}

impl GainDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GainDistribution::Uniform { k } if !(k > 0.0 && k.is_finite()) => {
                Err(invalid(format!("uniform half-width must be positive, got {k}")))
            }
            GainDistribution::StudentT { dof } if !(dof > 0.0 && dof.is_finite()) => {
                Err(invalid(format!("degrees of freedom must be positive, got {dof}")))
            }
            _ => Ok(()),
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        match *self {
            GainDistribution::LogNormal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
            GainDistribution::Uniform { k } => {
                let d = Uniform::new_inclusive(-k, k).map_err(|e| invalid(e.to_string()))?;
                out.iter_mut().for_each(|v| *v = d.sample(rng));
            }
            GainDistribution::StudentT { dof } => {
                let d = StudentT::new(dof).map_err(|e| invalid(e.to_string()))?;
                out.iter_mut().for_each(|v| *v = d.sample(rng));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GainDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GainDistribution::LogNormal => write!(f, "lognormal"),
            GainDistribution::Uniform { k } => write!(f, "uniform:{k}"),
            GainDistribution::StudentT { dof } => write!(f, "student:{dof}"),
        }
    }
}

impl FromStr for GainDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| a.trim().parse::<f64>().map_err(|_| invalid(format!("bad number in distribution {s:?}")));
        let d = match (kind, arg) {
            ("lognormal", None) => GainDistribution::LogNormal,
            ("uniform", None) => GainDistribution::Uniform { k: DEFAULT_UNIFORM_HALF_WIDTH },
            ("uniform", Some(a)) => GainDistribution::Uniform { k: num(a)? },
            ("student", Some(a)) => GainDistribution::StudentT { dof: num(a)? },
            _ => return Err(invalid(format!("unknown distribution {s:?}; use lognormal, uniform:<k> or student:<dof>"))),
        };
        d.validate()?;
        Ok(d)
    }
}

impl From<GainDistribution> for String {
    fn from(d: GainDistribution) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for GainDistribution {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Normalized deviations indexed by (user, base station, sample).
#[derive(Debug, Clone, PartialEq)]
pub struct RhoTensor {
    pub n: usize,
    pub n_bs: usize,
    pub samples: usize,
    data: Vec<f64>,
}

impl RhoTensor {
    pub fn get(&self, i: usize, j: usize, s: usize) -> f64 {
        self.data[(i * self.n_bs + j) * self.samples + s]
    }

    /// All samples of pair `(i, j)`.
    pub fn series(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n_bs + j) * self.samples;
        &self.data[start..start + self.samples]
    }
}

/// Deviations of user `i`, laid out base station major.
fn user_rho(dist: &GainDistribution, i: usize, n_bs: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n_bs * samples];
    for (j, chunk) in out.chunks_mut(samples).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((i * n_bs + j) as u64);
        dist.fill(&mut rng, chunk)?;
    }
    Ok(out)
}

pub fn sample_rho(dist: &GainDistribution, n: usize, n_bs: usize, samples: usize, seed: u64) -> Result<RhoTensor> {
    dist.validate()?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let per_user = (0..n)
        .into_par_iter()
        .map(|i| user_rho(dist, i, n_bs, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(RhoTensor { n, n_bs, samples, data: per_user.concat() })
}

fn gain(mu_db: f64, sigma_db: f64, rho: f64) -> f64 {
    (DB_TO_NEPER * (mu_db + rho * sigma_db)).exp()
}

/// Gains of sample `s`, with every standard deviation multiplied by `sigma_scale`.
pub fn gains_from_rho(sc: &Scenario, rho: &RhoTensor, sigma_scale: f64, s: usize) -> Result<GainSample> {
    if rho.n != sc.n || rho.n_bs != sc.n_bs || s >= rho.samples {
        return Err(Error::Shape("deviation tensor does not match the scenario".into()));
    }
    Ok(GainSample {
        g: (0..sc.n)
            .map(|i| {
                (0..sc.n_bs)
                    .map(|j| gain(sc.mu_db[i][j], sigma_scale * sc.sigma_db[i][j], rho.get(i, j, s)))
                    .collect()
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub per_user_violation: Vec<f64>,
    pub overall_violation: f64,
    /// Present when a box was supplied.
    pub per_user_outside_box: Option<Vec<f64>>,
    pub overall_outside_box: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub dist: GainDistribution,
}

struct UserDraws {
    throughput: Vec<f64>,
    outside: Option<usize>,
}

fn user_draws(
    result: &SolveResult,
    sc: &Scenario,
    dist: &GainDistribution,
    samples: usize,
    seed: u64,
    bx: Option<&UncertaintyBox>,
    i: usize,
) -> Result<UserDraws> {
    let rho = user_rho(dist, i, sc.n_bs, samples, seed)?;
    let j = result.assoc.serving[i];
    let share = result.x[i][j] * sc.bandwidth_hz[j];
    let mut throughput = Vec::with_capacity(samples);
    let mut row = vec![0.0; sc.n_bs];
    let mut outside = 0;
    for s in 0..samples {
        for (k, r) in row.iter_mut().enumerate() {
            *r = rho[k * samples + s];
        }
        let signal = result.power_w[j] * gain(sc.mu_db[i][j], sc.sigma_db[i][j], row[j]);
        let interference: f64 = (0..sc.n_bs)
            .filter(|&k| k != j)
            .map(|k| result.power_w[k] * gain(sc.mu_db[i][k], sc.sigma_db[i][k], row[k]))
            .sum();
        throughput.push(share * (signal / (sc.noise_w + interference)).ln_1p() / std::f64::consts::LN_2);
        if let Some(b) = bx {
            if !b.contains(i, &row, j) {
                outside += 1;
            }
        }
    }
    Ok(UserDraws { throughput, outside: bx.map(|_| outside) })
}

fn collect_draws(
    result: &SolveResult,
    sc: &Scenario,
    dist: &GainDistribution,
    samples: usize,
    seed: u64,
    bx: Option<&UncertaintyBox>,
) -> Result<Vec<UserDraws>> {
    sc.validate()?;
    result.check_shape(sc)?;
    dist.validate()?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if let Some(b) = bx {
        b.check_shape(sc)?;
    }
    (0..sc.n)
        .into_par_iter()
        .map(|i| user_draws(result, sc, dist, samples, seed, bx, i))
        .collect()
}

fn violation_fractions(draws: &[UserDraws], demand: &[f64], factor: f64) -> Vec<f64> {
    draws
        .iter()
        .zip(demand)
        .map(|(d, &r)| {
            let need = factor * r;
            d.throughput.iter().filter(|&&t| t < need).count() as f64 / d.throughput.len() as f64
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

/// Fraction of samples in which each user's Shannon throughput falls short of
/// its demand, and optionally the fraction falling outside `bx`.
pub fn validate(
    result: &SolveResult,
    sc: &Scenario,
    dist: &GainDistribution,
    samples: usize,
    seed: u64,
    bx: Option<&UncertaintyBox>,
) -> Result<ViolationReport> {
    let draws = collect_draws(result, sc, dist, samples, seed, bx)?;
    let per_user_violation = violation_fractions(&draws, &sc.demand_bps, 1.0);
    let per_user_outside_box: Option<Vec<f64>> = bx.map(|_| {
        draws.iter().map(|d| d.outside.unwrap_or(0) as f64 / samples as f64).collect()
    });
    Ok(ViolationReport {
        overall_violation: mean(&per_user_violation),
        overall_outside_box: per_user_outside_box.as_deref().map(mean),
        per_user_violation,
        per_user_outside_box,
        samples,
        seed,
        dist: *dist,
    })
}

/// Per-user fraction of samples outside the box: serving deviation below its
/// lower end or any interferer deviation above its upper end.
pub fn box_coverage(rho: &RhoTensor, bx: &UncertaintyBox, serving: &[usize]) -> Result<Vec<f64>> {
    if bx.n() != rho.n || serving.len() != rho.n || serving.iter().any(|&j| j >= rho.n_bs) {
        return Err(Error::Shape("box, association and samples disagree".into()));
    }
    let mut row = vec![0.0; rho.n_bs];
    Ok((0..rho.n)
        .map(|i| {
            let outside = (0..rho.samples)
                .filter(|&s| {
                    row.iter_mut().enumerate().for_each(|(j, r)| *r = rho.get(i, j, s));
                    !bx.contains(i, &row, serving[i])
                })
                .count();
            outside as f64 / rho.samples as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressRow {
    pub factor: f64,
    pub overall_violation: f64,
}

/// Overall violation fraction with every demand multiplied by each factor,
/// evaluated on one common set of samples.
pub fn demand_stress(
    result: &SolveResult,
    sc: &Scenario,
    dist: &GainDistribution,
    factors: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<StressRow>> {
    if factors.is_empty() || factors.iter().any(|&f| !(f >= 1.0)) {
        return Err(invalid("demand factors must be at least 1"));
    }
    let draws = collect_draws(result, sc, dist, samples, seed, None)?;
    Ok(factors
        .iter()
        .map(|&factor| StressRow { factor, overall_violation: mean(&violation_fractions(&draws, &sc.demand_bps, factor)) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Association, SolveStatus};

    fn moments(v: &[f64]) -> (f64, f64) {
        let m = mean(v);
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var.sqrt())
    }

    #[test]
    fn normal_moments() {
        let t = sample_rho(&GainDistribution::LogNormal, 1, 1, 100_000, 3).unwrap();
        let (m, s) = moments(t.series(0, 0));
        assert!(m.abs() < 0.01 && (s - 1.0).abs() < 0.01, "{m} {s}");
    }

    #[test]
    fn uniform_range_and_spread() {
        let t = sample_rho(&GainDistribution::Uniform { k: 3.0 }, 1, 2, 100_000, 4).unwrap();
        let v = t.series(0, 1);
        assert!(v.iter().all(|x| x.abs() <= 3.0));
        let (_, s) = moments(v);
        assert!((s - 3f64.sqrt()).abs() < 0.02);
    }

    #[test]
    fn seeds_are_reproducible_and_streams_differ() {
        let d = GainDistribution::StudentT { dof: 2.0 };
        let a = sample_rho(&d, 3, 2, 50, 9).unwrap();
        assert_eq!(a, sample_rho(&d, 3, 2, 50, 9).unwrap());
        assert_ne!(a.series(0, 0), a.series(0, 1));
        assert_ne!(a, sample_rho(&d, 3, 2, 50, 10).unwrap());
    }

    #[test]
    fn parse_distributions() {
        assert_eq!("lognormal".parse::<GainDistribution>().unwrap(), GainDistribution::LogNormal);
        assert_eq!("uniform:4".parse::<GainDistribution>().unwrap(), GainDistribution::Uniform { k: 4.0 });
        assert_eq!("uniform".parse::<GainDistribution>().unwrap(), GainDistribution::Uniform { k: 3.0 });
        assert_eq!("student:2".parse::<GainDistribution>().unwrap(), GainDistribution::StudentT { dof: 2.0 });
        for bad in ["student:0", "student:-1", "uniform:0", "gamma", "student"] {
            assert!(bad.parse::<GainDistribution>().is_err(), "{bad}");
        }
        let d = GainDistribution::Uniform { k: 4.0 };
        assert_eq!(serde_json::from_str::<GainDistribution>(&serde_json::to_string(&d).unwrap()).unwrap(), d);
    }

    fn one_user() -> Scenario {
        Scenario {
            n: 1,
            n_bs: 2,
            bandwidth_hz: vec![1e6; 2],
            p_max_w: vec![1.0; 2],
            noise_w: 1e-13,
            demand_bps: vec![1e6],
            mu_db: vec![vec![-100.0, -120.0]],
            sigma_db: vec![vec![3.0, 3.0]],
            positions: None,
        }
    }

    fn fixed_result(x: f64, p: f64) -> SolveResult {
        SolveResult {
            power_w: vec![p, p],
            x: vec![vec![x, 0.0]],
            assoc: Association { serving: vec![0] },
            objective: 2.0 * p,
            status: SolveStatus::Optimal,
            diagnostics: Default::default(),
        }
    }

    #[test]
    fn gains_arithmetic() {
        let sc = one_user();
        let t = RhoTensor { n: 1, n_bs: 2, samples: 1, data: vec![2.0, 0.0] };
        let g = gains_from_rho(&sc, &t, 1.0, 0).unwrap();
        assert!((g.g[0][0] - 3.981_071_705_534_97e-10).abs() < 1e-14);
        assert!((g.g[0][1] / 1e-12 - 1.0).abs() < 1e-14);
        let flat = gains_from_rho(&sc, &t, 0.0, 0).unwrap();
        for (a, b) in flat.g[0].iter().zip(&sc.mean_gains().g[0]) {
            assert!((a / b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_share_always_violates() {
        let r = validate(&fixed_result(0.0, 1.0), &one_user(), &GainDistribution::LogNormal, 200, 1, None).unwrap();
        assert_eq!(r.overall_violation, 1.0);
        assert!(r.per_user_outside_box.is_none());
    }

    #[test]
    fn deterministic_channel_never_violates_feasible_plan() {
        let sc = one_user().with_sigma_scale(0.0);
        let r = validate(&fixed_result(1.0, 1e-2), &sc, &GainDistribution::LogNormal, 500, 1, None).unwrap();
        assert_eq!(r.overall_violation, 0.0);
    }

    #[test]
    fn infinite_box_has_no_outside_samples() {
        let t = sample_rho(&GainDistribution::StudentT { dof: 2.0 }, 2, 3, 1000, 5).unwrap();
        let bx = UncertaintyBox::from_rhos(&[f64::INFINITY; 2], 3, crate::robust::BoxPolicy::TwoSided);
        assert!(box_coverage(&t, &bx, &[0, 2]).unwrap().iter().all(|&f| f == 0.0));
    }

    #[test]
    fn stress_is_monotone_and_matches_validate() {
        let sc = one_user();
        let res = fixed_result(0.6, 1e-3);
        let d = GainDistribution::LogNormal;
        let rows = demand_stress(&res, &sc, &d, &[1.0, 1.1, 1.5, 2.3], 5000, 8).unwrap();
        assert_eq!(rows[0].overall_violation, validate(&res, &sc, &d, 5000, 8, None).unwrap().overall_violation);
        assert!(rows.windows(2).all(|w| w[0].overall_violation <= w[1].overall_violation));
        assert!(demand_stress(&res, &sc, &d, &[0.9], 10, 8).is_err());
    }
}
