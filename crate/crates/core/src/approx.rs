//! Monomial lower bounds of the Shannon spectral efficiency.
//!
//! A [`PiecewiseApprox`] holds `m` monomials `a_l * s^b_l`. Requiring
//! `x * B * a_l * S^b_l >= r` for every `l` is the same as requiring it for the
//! pointwise minimum, so the envelope `min_l a_l s^b_l` is what has to stay
//! below `log2(1 + s)` on the SINR range a solution lives in.
//!
//! In log-log coordinates `t = ln s` the rate `ln log2(1 + e^t)` is concave,
//! so a monomial is a straight line there. Chords of a concave function lie
//! below it between their end points, which is how [`fit_piecewise`] builds a
//! certified envelope. Tangent monomials ([`tangent_monomial`]) touch the
//! rate but lie above it everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const CERT_GRID_POINTS: usize = 4096;
pub const CERT_SLACK: f64 = 1e-9;
pub const DEFAULT_S_MIN: f64 = 0.01;
pub const DEFAULT_S_MAX: f64 = 100.0;

/// Name of the five-piece preset used for the city-scale experiments.
pub const PRESET_M5: &str = "paper-m5";
const PRESET_M5_A: [f64; 5] = [1.4080, 0.7720, 1.3436, 2.0641, 2.8584];
const PRESET_M5_B: [f64; 5] = [1.0, 0.7994, 0.3928, 0.2538, 0.1840];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseApprox {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificationReport {
    /// `max over the grid of envelope(s) - log2(1 + s)`.
    pub max_excess: f64,
    pub worst_sinr: f64,
    pub grid_points: usize,
    pub pass: bool,
}

impl PiecewiseApprox {
    pub fn new(a: Vec<f64>, b: Vec<f64>, s_min: f64, s_max: f64) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(invalid("approximation needs equally many a and b coefficients"));
        }
        if a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid("every a_l must be positive"));
        }
        if b.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(invalid("every b_l must lie in (0, 1]"));
        }
        if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
            return Err(invalid("validity range must satisfy 0 < s_min < s_max"));
        }
        Ok(Self { a, b, s_min, s_max })
    }

    /// The published five-piece coefficients, nominally valid on `[0.01, 100]`.
    pub fn preset_m5() -> Self {
        Self {
            a: PRESET_M5_A.to_vec(),
            b: PRESET_M5_B.to_vec(),
            s_min: DEFAULT_S_MIN,
            s_max: DEFAULT_S_MAX,
        }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.a.iter().copied().zip(self.b.iter().copied())
    }

    /// Envelope value `min_l a_l s^b_l` in bits/s/Hz.
    pub fn value(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(invalid(format!("SINR must be positive, got {s}")));
        }
        Ok(self.envelope(s))
    }

    pub(crate) fn envelope(&self, s: f64) -> f64 {
        self.pieces().map(|(a, b)| a * s.powf(b)).fold(f64::INFINITY, f64::min)
    }

    /// Smallest SINR whose envelope value reaches `rate`.
    pub fn min_sinr_for(&self, rate: f64) -> f64 {
        self.pieces().map(|(a, b)| (rate / a).powf(1.0 / b)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("approximation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pw: PiecewiseApprox =
            serde_json::from_str(text).map_err(|e| invalid(format!("approximation JSON: {e}")))?;
        Self::new(pw.a, pw.b, pw.s_min, pw.s_max)
    }
}

pub fn approx_value(pw: &PiecewiseApprox, s: f64) -> Result<f64> {
    pw.value(s)
}

fn shannon(s: f64) -> f64 {
    s.ln_1p() / std::f64::consts::LN_2
}

/// Monomial touching `log2(1 + s)` at `s0` with matching slope.
pub fn tangent_monomial(s0: f64) -> Result<(f64, f64)> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(invalid(format!("tangent anchor must be positive, got {s0}")));
    }
    let l = s0.ln_1p();
    let b = s0 / ((1.0 + s0) * l);
    let a = shannon(s0) / s0.powf(b);
    Ok((a, b))
}

/// Monomial through `(s1, log2(1+s1))` and `(s2, log2(1+s2))`.
fn chord_monomial(s1: f64, s2: f64) -> (f64, f64) {
    let b = (shannon(s2).ln() - shannon(s1).ln()) / (s2.ln() - s1.ln());
    let a = shannon(s1) / s1.powf(b);
    (a, b.min(1.0))
}

/// Certified `m`-piece envelope on `[s_min, s_max]`.
///
/// Break points are geometrically spaced with the first at `s_min` and the
/// last at `s_max`. The first piece is the linear monomial through the origin
/// and the first break point, so the envelope also holds on `(0, s_min]`; the
/// others are chords between consecutive break points.
pub fn fit_piecewise(m: usize, s_min: f64, s_max: f64) -> Result<PiecewiseApprox> {
    if m == 0 {
        return Err(invalid("need at least one monomial"));
    }
    if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
        return Err(invalid("fit range must satisfy 0 < s_min < s_max"));
    }
    let breaks: Vec<f64> = if m == 1 {
        vec![s_max]
    } else {
        let ratio = (s_max / s_min).ln();
        (0..m)
            .map(|k| {
                if k == m - 1 {
                    s_max
                } else {
                    s_min * (ratio * k as f64 / (m - 1) as f64).exp()
                }
            })
            .collect()
    };
    let mut a = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    a.push(shannon(breaks[0]) / breaks[0]);
    b.push(1.0);
    for w in breaks.windows(2) {
        let (ak, bk) = chord_monomial(w[0], w[1]);
        a.push(ak);
        b.push(bk);
    }
    let pw = PiecewiseApprox::new(a, b, s_min, s_max)?;
    let rep = verify_lower_bound(&pw, s_min, s_max, CERT_GRID_POINTS);
    if !rep.pass {
        return Err(Error::Certification { sinr: rep.worst_sinr, excess: rep.max_excess });
    }
    Ok(pw)
}

/// Grid check that the envelope stays below `log2(1 + s)` on `[s_min, s_max]`.
pub fn verify_lower_bound(
    pw: &PiecewiseApprox,
    s_min: f64,
    s_max: f64,
    grid_points: usize,
) -> CertificationReport {
    let grid_points = grid_points.max(2);
    let (lo, hi) = (s_min.ln(), s_max.ln());
    let mut worst = (f64::NEG_INFINITY, s_min);
    for k in 0..grid_points {
        let s = if k + 1 == grid_points {
            s_max
        } else {
            (lo + (hi - lo) * k as f64 / (grid_points - 1) as f64).exp()
        };
        let excess = pw.envelope(s) - shannon(s);
        if excess > worst.0 {
            worst = (excess, s);
        }
    }
    CertificationReport {
        max_excess: worst.0,
        worst_sinr: worst.1,
        grid_points,
        pass: worst.0 <= CERT_SLACK,
    }
}

/// Right-hand side `ln(B a_l / r) / b_l` of the throughput constraint.
pub fn a_coefficient(bandwidth: f64, demand: f64, a: f64, b: f64) -> Result<f64> {
    if !(bandwidth > 0.0 && demand > 0.0 && a > 0.0 && b > 0.0) {
        return Err(invalid("A coefficient needs positive B, r, a and b"));
    }
    Ok((bandwidth * a / demand).ln() / b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tangent_closed_forms() {
        let (a, b) = tangent_monomial(1.0).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert!((b - 1.0 / (2.0 * std::f64::consts::LN_2)).abs() < 1e-12);
        assert!((b - 0.72135).abs() < 1e-5);

        let e1 = std::f64::consts::E - 1.0;
        let (a, b) = tangent_monomial(e1).unwrap();
        assert!((b - 0.632_12).abs() < 1e-4);
        assert!((a - 1.0247).abs() < 1e-4);

        let (a, b) = tangent_monomial(1e-9).unwrap();
        assert!((b - 1.0).abs() < 1e-6);
        assert!((a - 1.0 / std::f64::consts::LN_2).abs() < 1e-4);

        assert!(tangent_monomial(0.0).is_err());
        assert!(tangent_monomial(-1.0).is_err());
    }

    #[test]
    fn tangents_are_upper_bounds() {
        let (a, b) = tangent_monomial(1.0).unwrap();
        for s in [0.01f64, 0.1, 0.5, 2.0, 10.0, 100.0] {
            assert!(a * s.powf(b) >= shannon(s));
        }
    }

    #[test]
    fn preset_values() {
        let pw = PiecewiseApprox::preset_m5();
        // s = 10: the five monomials evaluate to 14.08, 4.864, 3.3199, 3.703, 4.367.
        let v = pw.value(10.0).unwrap();
        assert!((v - 3.3199).abs() < 2e-3);
        let argmin = pw
            .pieces()
            .map(|(a, b)| a * 10f64.powf(b))
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
            .0;
        assert_eq!(argmin, 2);
        assert_relative_eq!(pw.value(1.0).unwrap(), 0.7720, epsilon = 1e-12);
        assert!(pw.value(0.0).is_err());
    }

    #[test]
    fn preset_fails_beyond_range() {
        let pw = PiecewiseApprox::preset_m5();
        let rep = verify_lower_bound(&pw, 0.01, 1000.0, CERT_GRID_POINTS);
        assert!(!rep.pass);
        assert!(rep.worst_sinr > 500.0);
    }

    #[test]
    fn fitted_envelopes_certify() {
        for m in [1, 2, 3, 5, 8, 12] {
            let pw = fit_piecewise(m, 0.01, 100.0).unwrap();
            assert_eq!(pw.m(), m);
            assert!(verify_lower_bound(&pw, 0.01, 100.0, CERT_GRID_POINTS).pass);
            // the linear first piece keeps the bound below the fit range
            assert!(verify_lower_bound(&pw, 1e-6, 0.01, 512).pass);
        }
        assert!(fit_piecewise(0, 0.01, 100.0).is_err());
        assert!(fit_piecewise(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn fitted_envelope_is_exact_at_break_points() {
        let pw = fit_piecewise(5, 0.01, 100.0).unwrap();
        for k in 0..5 {
            let s = 0.01 * (10f64.ln() * k as f64).exp();
            assert!((pw.value(s).unwrap() - shannon(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn a_coefficient_examples() {
        assert_eq!(a_coefficient(2.0, 1.0, 0.5, 0.7).unwrap(), 0.0);
        let v = a_coefficient(2e7, 1e6, 1.0, 0.72135).unwrap();
        assert!((v - 20f64.ln() / 0.72135).abs() < 1e-12);
        assert!((v - 4.1529).abs() < 1e-3);
        let base = a_coefficient(2e7, 1e6, 0.8, 0.4).unwrap();
        let doubled = a_coefficient(2e7, 1e6, 1.6, 0.4).unwrap();
        assert_relative_eq!(doubled - base, std::f64::consts::LN_2 / 0.4, epsilon = 1e-12);
        assert!(a_coefficient(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(a_coefficient(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pw = fit_piecewise(4, 0.05, 50.0).unwrap();
        assert_eq!(PiecewiseApprox::from_json(&pw.to_json()).unwrap(), pw);
    }

    proptest! {
        #[test]
        fn envelope_is_monotone(s in 1e-3f64..1e3, ds in 1e-6f64..10.0) {
            let pw = PiecewiseApprox::preset_m5();
            prop_assert!(pw.value(s).unwrap() <= pw.value(s + ds).unwrap());
        }

        #[test]
        fn inversion_matches_bisection(target in 1e-3f64..8.0) {
            let pw = fit_piecewise(5, 0.01, 100.0).unwrap();
            let closed = pw.min_sinr_for(target);
            // bisection on the monotone envelope, independent of the closed form
            let (mut lo, mut hi) = (1e-12f64, 1e12f64);
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if pw.envelope(mid) >= target { hi = mid } else { lo = mid }
            }
            prop_assert!((closed - hi).abs() <= 1e-9 * hi);
        }
    }
}
