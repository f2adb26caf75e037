//! Network description, physical-layer formulas and the feasibility audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gp::Diagnostics;

/// `ln(10) / 10`, the factor turning dB into natural-log units.
pub const DB_TO_NEPER: f64 = std::f64::consts::LN_10 / 10.0;

/// Default relative tolerance of [`check_feasible`].
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub users: Vec<[f64; 2]>,
    pub base_stations: Vec<[f64; 2]>,
}

/// An OFDMA network: `n` users, `n_bs` base stations and the log-normal
/// description of every user/base-station channel gain.
///
/// Gains are kept as dB mean and dB standard deviation; they are converted to
/// linear scale only where a formula needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_bs: usize,
    pub bandwidth_hz: Vec<f64>,
    /// Per-resource-block power cap of every base station.
    pub p_max_w: Vec<f64>,
    pub noise_w: f64,
    pub demand_bps: Vec<f64>,
    /// `mu_db[i][j]`: mean dB gain between user `i` and base station `j`.
    pub mu_db: Vec<Vec<f64>>,
    pub sigma_db: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Positions>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_bs == 0 {
            return Err(invalid("scenario needs at least one user and one base station"));
        }
        let vec_len = |name: &str, v: &[f64], len: usize| -> Result<()> {
            if v.len() != len {
                return Err(Error::Shape(format!("{name} has length {}, expected {len}", v.len())));
            }
            Ok(())
        };
        vec_len("bandwidth_hz", &self.bandwidth_hz, self.n_bs)?;
        vec_len("p_max_w", &self.p_max_w, self.n_bs)?;
        vec_len("demand_bps", &self.demand_bps, self.n)?;
        for (name, m) in [("mu_db", &self.mu_db), ("sigma_db", &self.sigma_db)] {
            if m.len() != self.n || m.iter().any(|row| row.len() != self.n_bs) {
                return Err(Error::Shape(format!("{name} must be {}x{}", self.n, self.n_bs)));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{name} has non-finite entries")));
            }
        }
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(invalid(format!("{name} entries must be positive and finite")));
            }
            Ok(())
        };
        positive("bandwidth_hz", &self.bandwidth_hz)?;
        positive("p_max_w", &self.p_max_w)?;
        positive("demand_bps", &self.demand_bps)?;
        positive("noise_w", &[self.noise_w])?;
        if self.sigma_db.iter().flatten().any(|&s| s < 0.0) {
            return Err(invalid("sigma_db entries must be non-negative"));
        }
        if let Some(pos) = &self.positions {
            if pos.users.len() != self.n || pos.base_stations.len() != self.n_bs {
                return Err(Error::Shape("positions do not match n / N".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| invalid(format!("scenario JSON: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Copy with every dB standard deviation multiplied by `scale`.
    pub fn with_sigma_scale(&self, scale: f64) -> Scenario {
        let mut sc = self.clone();
        for v in sc.sigma_db.iter_mut().flatten() {
            *v *= scale;
        }
        sc
    }

    /// Copy with every dB standard deviation set to `sigma_db`.
    pub fn with_uniform_sigma(&self, sigma_db: f64) -> Scenario {
        let mut sc = self.clone();
        for v in sc.sigma_db.iter_mut().flatten() {
            *v = sigma_db;
        }
        sc
    }

    /// Copy with every demand multiplied by `factor`.
    pub fn with_demand_factor(&self, factor: f64) -> Scenario {
        let mut sc = self.clone();
        for r in &mut sc.demand_bps {
            *r *= factor;
        }
        sc
    }

    /// Linear gains at the dB means.
    pub fn mean_gains(&self) -> GainSample {
        GainSample {
            g: self
                .mu_db
                .iter()
                .map(|row| row.iter().map(|&m| db_to_linear(m)).collect())
                .collect(),
        }
    }
}

/// User-to-base-station assignment; `serving[i]` is the base station of user `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Association {
    pub serving: Vec<usize>,
}

impl Association {
    pub fn new(serving: Vec<usize>, n_bs: usize) -> Result<Self> {
        if let Some(&bad) = serving.iter().find(|&&j| j >= n_bs) {
            return Err(invalid(format!("association refers to base station {bad} of {n_bs}")));
        }
        Ok(Self { serving })
    }

    pub fn len(&self) -> usize {
        self.serving.len()
    }

    pub fn is_empty(&self) -> bool {
        self.serving.is_empty()
    }

    /// `z_ij` of the mixed-integer formulation.
    pub fn z(&self, i: usize, j: usize) -> bool {
        self.serving[i] == j
    }

    pub fn users_of(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.serving.iter().enumerate().filter(move |(_, &s)| s == j).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Branch and bound stopped before certifying the gap.
    GapNotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(rename = "P")]
    pub power_w: Vec<f64>,
    /// `x[i][j]`: fraction of base station `j` resources given to user `i`.
    pub x: Vec<Vec<f64>>,
    pub assoc: Association,
    /// Total transmit power `sum_j P_j` in watts.
    pub objective: f64,
    pub status: SolveStatus,
    pub diagnostics: Diagnostics,
}

impl SolveResult {
    pub fn check_shape(&self, sc: &Scenario) -> Result<()> {
        if self.power_w.len() != sc.n_bs
            || self.x.len() != sc.n
            || self.x.iter().any(|r| r.len() != sc.n_bs)
            || self.assoc.len() != sc.n
        {
            return Err(Error::Shape(format!(
                "result is for {} users / {} base stations, scenario has {} / {}",
                self.x.len(),
                self.power_w.len(),
                sc.n,
                sc.n_bs
            )));
        }
        Association::new(self.assoc.serving.clone(), sc.n_bs)?;
        Ok(())
    }
}

/// A realization of all linear channel gains, `g[i][j] > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSample {
    pub g: Vec<Vec<f64>>,
}

pub fn db_to_linear(g_db: f64) -> f64 {
    10f64.powf(g_db / 10.0)
}

/// Signal-to-interference-plus-noise ratio of a user served by `j`, given the
/// user's gain row.
pub fn sinr(power: &[f64], gains: &[f64], noise: f64, j: usize) -> Result<f64> {
    if j >= power.len() || power.len() != gains.len() {
        return Err(invalid(format!(
            "serving index {j} out of range for {} base stations",
            power.len()
        )));
    }
    let interference: f64 = power
        .iter()
        .zip(gains)
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, (p, g))| p * g)
        .sum();
    Ok(power[j] * gains[j] / (noise + interference))
}

/// Shannon throughput (bits/s) of user `i` under its serving base station.
pub fn user_throughput(
    x_row: &[f64],
    power: &[f64],
    assoc: &Association,
    gains: &[f64],
    bandwidth: &[f64],
    noise: f64,
    i: usize,
) -> Result<f64> {
    if i >= assoc.len() || x_row.len() != power.len() || bandwidth.len() != power.len() {
        return Err(Error::Shape("throughput inputs have inconsistent lengths".into()));
    }
    let j = assoc.serving[i];
    if x_row[j] == 0.0 {
        return Ok(0.0);
    }
    let s = sinr(power, gains, noise, j)?;
    Ok(x_row[j] * bandwidth[j] * (1.0 + s).log2())
}

/// Slacks of constraints (c3), (c5) and (c6), all normalized so that
/// negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// `(P_max - P) / P_max`, also negative when `P <= 0`.
    pub power_slack: Vec<f64>,
    /// `1 - sum_i x_ij`.
    pub resource_slack: Vec<f64>,
    /// `(T_i - r_i) / r_i`.
    pub throughput_slack: Vec<f64>,
    /// Number of allocations `x_ij` outside `[0, 1]` or off the association.
    pub allocation_errors: usize,
    pub tol: f64,
    pub pass: bool,
}

impl FeasibilityReport {
    pub fn worst_slack(&self) -> f64 {
        self.power_slack
            .iter()
            .chain(&self.resource_slack)
            .chain(&self.throughput_slack)
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

pub fn check_feasible(
    result: &SolveResult,
    sc: &Scenario,
    gains: &GainSample,
    tol: f64,
) -> Result<FeasibilityReport> {
    result.check_shape(sc)?;
    let power_slack: Vec<f64> = result
        .power_w
        .iter()
        .zip(&sc.p_max_w)
        .map(|(&p, &cap)| if p > 0.0 { (cap - p) / cap } else { -1.0 })
        .collect();
    let resource_slack: Vec<f64> = (0..sc.n_bs)
        .map(|j| 1.0 - result.x.iter().map(|row| row[j]).sum::<f64>())
        .collect();
    let mut allocation_errors = 0;
    for (i, row) in result.x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let off_assoc = !result.assoc.z(i, j) && v != 0.0;
            if !(-tol..=1.0 + tol).contains(&v) || off_assoc {
                allocation_errors += 1;
            }
        }
    }
    let throughput_slack = (0..sc.n)
        .map(|i| {
            let t = user_throughput(
                &result.x[i],
                &result.power_w,
                &result.assoc,
                &gains.g[i],
                &sc.bandwidth_hz,
                sc.noise_w,
                i,
            )?;
            Ok((t - sc.demand_bps[i]) / sc.demand_bps[i])
        })
        .collect::<Result<Vec<f64>>>()?;
    let pass = allocation_errors == 0
        && power_slack
            .iter()
            .chain(&resource_slack)
            .chain(&throughput_slack)
            .all(|&s| s >= -tol);
    Ok(FeasibilityReport {
        power_slack,
        resource_slack,
        throughput_slack,
        allocation_errors,
        tol,
        pass,
    })
}

/// Parameters of the synthetic log-distance scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n: usize,
    pub n_bs: usize,
    /// Side of the square deployment area (m).
    pub area_m: f64,
    pub pathloss_exponent: f64,
    /// Path loss at the 1 m reference distance (dB).
    pub ref_loss_db: f64,
    pub sigma_db: f64,
    pub demand_min_bps: f64,
    pub demand_max_bps: f64,
    pub bandwidth_hz: f64,
    pub p_max_w: f64,
    pub noise_w: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 20,
            n_bs: 5,
            area_m: 1000.0,
            pathloss_exponent: 3.5,
            ref_loss_db: 40.0,
            sigma_db: 3.0,
            demand_min_bps: 2.0e4,
            demand_max_bps: 1.0e5,
            bandwidth_hz: 2.0e7,
            p_max_w: 1.0,
            noise_w: 1.0e-13,
            seed: 0,
        }
    }
}

/// Mean dB gain of the log-distance model, distance clamped at 1 m.
pub fn log_distance_gain_db(distance_m: f64, ref_loss_db: f64, exponent: f64) -> f64 {
    -(ref_loss_db + 10.0 * exponent * distance_m.max(1.0).log10())
}

pub fn gen_synthetic(p: &SyntheticParams) -> Result<Scenario> {
    if p.n == 0 || p.n_bs == 0 {
        return Err(invalid("n and N must be at least 1"));
    }
    if !(p.area_m > 0.0) {
        return Err(invalid("area must be positive"));
    }
    if !(p.pathloss_exponent > 0.0) {
        return Err(invalid("path-loss exponent must be positive"));
    }
    if !(p.sigma_db >= 0.0) {
        return Err(invalid("sigma must be non-negative"));
    }
    if !(p.demand_min_bps > 0.0 && p.demand_max_bps >= p.demand_min_bps) {
        return Err(invalid("demand range must satisfy 0 < min <= max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let point = |rng: &mut ChaCha8Rng| [rng.random::<f64>() * p.area_m, rng.random::<f64>() * p.area_m];
    let base_stations: Vec<[f64; 2]> = (0..p.n_bs).map(|_| point(&mut rng)).collect();
    let users: Vec<[f64; 2]> = (0..p.n).map(|_| point(&mut rng)).collect();
    let demand_bps = (0..p.n)
        .map(|_| {
            if p.demand_max_bps > p.demand_min_bps {
                rng.random_range(p.demand_min_bps..p.demand_max_bps)
            } else {
                p.demand_min_bps
            }
        })
        .collect();
    let mu_db = users
        .iter()
        .map(|u| {
            base_stations
                .iter()
                .map(|b| {
                    let d = (u[0] - b[0]).hypot(u[1] - b[1]);
                    log_distance_gain_db(d, p.ref_loss_db, p.pathloss_exponent)
                })
                .collect()
        })
        .collect();
    let sc = Scenario {
        n: p.n,
        n_bs: p.n_bs,
        bandwidth_hz: vec![p.bandwidth_hz; p.n_bs],
        p_max_w: vec![p.p_max_w; p.n_bs],
        noise_w: p.noise_w,
        demand_bps,
        mu_db,
        sigma_db: vec![vec![p.sigma_db; p.n_bs]; p.n],
        positions: Some(Positions { users, base_stations }),
    };
    sc.validate()?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn db_conversion() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert_relative_eq!(db_to_linear(-100.0), 1e-10, max_relative = 1e-14);
        assert_relative_eq!(db_to_linear(-94.0), 3.981_071_705_534_97e-10, max_relative = 1e-14);
    }

    #[test]
    fn sinr_examples() {
        assert_relative_eq!(sinr(&[1.0], &[0.5], 0.1, 0).unwrap(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(sinr(&[1.0, 1.0], &[1.0, 1.0], 1e-300, 0).unwrap(), 1.0, epsilon = 1e-12);
        // 0.1e-6 / (1e-8 + 0.4e-6)
        let s = sinr(&[0.1, 0.2], &[1e-6, 2e-6], 1e-8, 0).unwrap();
        assert!((s - 0.243_902_439).abs() < 1e-5);
        assert!(sinr(&[1.0, 1.0], &[1.0, 1.0], 1.0, 2).is_err());
    }

    #[test]
    fn sinr_is_scale_invariant() {
        let s1 = sinr(&[0.3, 0.2, 0.5], &[1e-9, 3e-10, 2e-11], 1e-13, 1).unwrap();
        let f = 123.0;
        let s2 = sinr(&[0.3, 0.2, 0.5], &[1e-9 * f, 3e-10 * f, 2e-11 * f], 1e-13 * f, 1).unwrap();
        assert_relative_eq!(s1, s2, max_relative = 1e-12);
    }

    #[test]
    fn throughput_examples() {
        let assoc = Association::new(vec![0], 1).unwrap();
        let t0 = user_throughput(&[0.0], &[1.0], &assoc, &[1.0], &[1.0], 1.0, 0).unwrap();
        assert_eq!(t0, 0.0);
        // S = 1 * 1 / 1
        let t1 = user_throughput(&[1.0], &[1.0], &assoc, &[1.0], &[1.0], 1.0, 0).unwrap();
        assert_relative_eq!(t1, 1.0, epsilon = 1e-12);
        // S = 3
        let t2 = user_throughput(&[0.5], &[3.0], &assoc, &[1.0], &[2e7], 1.0, 0).unwrap();
        assert!((t2 - 2.0e7).abs() < 1.0);
    }

    fn tiny_result(power: f64, x: f64) -> (Scenario, SolveResult) {
        let sc = Scenario {
            n: 1,
            n_bs: 1,
            bandwidth_hz: vec![1.0],
            p_max_w: vec![1.0],
            noise_w: 1.0,
            demand_bps: vec![0.5],
            mu_db: vec![vec![0.0]],
            sigma_db: vec![vec![0.0]],
            positions: None,
        };
        let res = SolveResult {
            power_w: vec![power],
            x: vec![vec![x]],
            assoc: Association::new(vec![0], 1).unwrap(),
            objective: power,
            status: SolveStatus::Optimal,
            diagnostics: Diagnostics::default(),
        };
        (sc, res)
    }

    #[test]
    fn audit_flags_violations() {
        let (sc, res) = tiny_result(1.0, 1.0);
        let g = sc.mean_gains();
        assert!(check_feasible(&res, &sc, &g, 1e-6).unwrap().pass);

        let (sc, res) = tiny_result(2.0, 1.0);
        let rep = check_feasible(&res, &sc, &g, 1e-6).unwrap();
        assert!(!rep.pass);
        assert!(rep.power_slack[0] < 0.0);

        let (sc, res) = tiny_result(1.0, 0.0);
        let rep = check_feasible(&res, &sc, &g, 1e-6).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.throughput_slack[0], -1.0);
    }

    #[test]
    fn log_distance_reference() {
        assert_eq!(log_distance_gain_db(0.3, 40.0, 3.5), -40.0);
        assert_relative_eq!(log_distance_gain_db(100.0, 40.0, 3.5), -110.0, epsilon = 1e-12);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let p = SyntheticParams { seed: 11, ..Default::default() };
        let a = gen_synthetic(&p).unwrap();
        let b = gen_synthetic(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(Scenario::from_json(&a.to_json()).unwrap(), a);
        let c = gen_synthetic(&SyntheticParams { seed: 12, ..p.clone() }).unwrap();
        assert_ne!(a, c);
        assert!(gen_synthetic(&SyntheticParams { area_m: 0.0, ..p }).is_err());
    }
}
