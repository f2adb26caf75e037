//! Standard normal distribution function and its inverse.

use libm::erfc;

use crate::error::{invalid, Result};

/// `P(Z <= x)` for a standard normal `Z`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation, relative error about 1.15e-9 before
// refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Quantile function `Phi^-1(p)` for `p` in `(0, 1)`.
pub fn inv_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("probability must lie in (0, 1), got {p}")));
    }
    let mut x = acklam(p);
    // One Halley step on Phi(x) - p.
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchors() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(2.04) - 0.9793).abs() < 5e-5);
        assert!((inv_normal_cdf(0.9793).unwrap() - 2.04).abs() < 5e-3);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_probabilities() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(inv_normal_cdf(p).is_err());
        }
    }

    #[test]
    fn tails() {
        let x = inv_normal_cdf(1e-12).unwrap();
        assert!((normal_cdf(x) / 1e-12 - 1.0).abs() < 1e-8);
        assert!((inv_normal_cdf(1.0 - 1e-10).unwrap() - 6.361_340_902_404).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn round_trip(p in 1e-9f64..(1.0 - 1e-9)) {
            let x = inv_normal_cdf(p).unwrap();
            prop_assert!((normal_cdf(x) - p).abs() <= 1e-8);
        }

        #[test]
        fn quantile_matches_bisection(p in 1e-6f64..(1.0 - 1e-6)) {
            let (mut lo, mut hi) = (-40.0f64, 40.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if normal_cdf(mid) < p { lo = mid } else { hi = mid }
            }
            prop_assert!((inv_normal_cdf(p).unwrap() - 0.5 * (lo + hi)).abs() < 1e-9);
        }
    }
}
