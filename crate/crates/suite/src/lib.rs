//! Oracles that do not share code with the solver: brute-force search over
//! powers for tiny instances, and a bisection that places a scenario right
//! at the edge of robust feasibility.

use hetnet_core::association::greedy_assoc;
use hetnet_core::robust::Formulation;
use hetnet_core::{Association, BoxPolicy, PiecewiseApprox, Scenario, SolverOptions, UncertaintyBox};

/// Least share that meets every approximation piece at SINR `s`.
fn least_share(pw: &PiecewiseApprox, rate_per_hz: f64, s: f64) -> f64 {
    pw.pieces().map(|(a, b)| rate_per_hz / (a * s.powf(b))).fold(0.0, f64::max)
}

/// Minimum total power of a two-station instance with a fixed association,
/// found by zooming a log grid over (P1, P2) down to `ln(P) >= -40`.
///
/// Shares are eliminated in closed form: each user takes the least share
/// meeting all pieces, and a power pair is feasible when every station's
/// shares fit in one.
pub fn grid_optimum_two_stations(sc: &Scenario, assoc: &Association, pw: &PiecewiseApprox) -> Option<f64> {
    assert_eq!(sc.n_bs, 2, "oracle handles two stations");
    let g = sc.mean_gains().g;
    let total = |p: [f64; 2]| -> Option<f64> {
        let mut used = [0.0; 2];
        for i in 0..sc.n {
            let j = assoc.serving[i];
            let k = 1 - j;
            let s = p[j] * g[i][j] / (sc.noise_w + p[k] * g[i][k]);
            used[j] += least_share(pw, sc.demand_bps[i] / sc.bandwidth_hz[j], s);
        }
        (used[0] <= 1.0 && used[1] <= 1.0).then_some(p[0] + p[1])
    };
    let cap = [sc.p_max_w[0].ln(), sc.p_max_w[1].ln()];
    let floor = [cap[0] - 40.0, cap[1] - 40.0];
    let (mut lo, mut hi) = (floor, cap);
    let mut best: Option<(f64, [f64; 2])> = None;
    let steps = 150;
    for _ in 0..10 {
        for a in 0..=steps {
            for b in 0..=steps {
                let lp = [
                    lo[0] + (hi[0] - lo[0]) * a as f64 / steps as f64,
                    lo[1] + (hi[1] - lo[1]) * b as f64 / steps as f64,
                ];
                if let Some(v) = total([lp[0].exp(), lp[1].exp()]) {
                    if best.is_none_or(|(bv, _)| v < bv) {
                        best = Some((v, lp));
                    }
                }
            }
        }
        let (_, c) = best?;
        for d in 0..2 {
            let w = 3.0 * (hi[d] - lo[d]) / steps as f64;
            lo[d] = (c[d] - w).max(floor[d]);
            hi[d] = (c[d] + w).min(cap[d]);
        }
    }
    best.map(|(v, _)| v)
}

/// Whether the robust program with uniform shadowing `sigma_db` and joint
/// probability `prob` is feasible under the greedy association.
pub fn robust_feasible(sc: &Scenario, sigma_db: f64, prob: f64) -> bool {
    let sc = sc.with_uniform_sigma(sigma_db);
    let bx = UncertaintyBox::uniform(1.0 - prob, sc.n, sc.n_bs, BoxPolicy::OneSided).expect("valid probability");
    let f = Formulation::robust(sc.clone(), PiecewiseApprox::preset_m5(), bx).expect("valid scenario");
    match f.solve(&greedy_assoc(&sc), &SolverOptions::default()) {
        Ok(_) => true,
        Err(e) if e.is_infeasible() => false,
        Err(e) => panic!("solver failure while probing feasibility: {e}"),
    }
}

/// Largest demand multiplier (to 0.1% in log terms) keeping the setting feasible.
pub fn demand_threshold(sc: &Scenario, sigma_db: f64, prob: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3f64, 1e3f64);
    assert!(robust_feasible(&sc.with_demand_factor(lo), sigma_db, prob));
    assert!(!robust_feasible(&sc.with_demand_factor(hi), sigma_db, prob));
    while (hi / lo).ln() > 1e-3 {
        let mid = (lo * hi).sqrt();
        if robust_feasible(&sc.with_demand_factor(mid), sigma_db, prob) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Rescales demands so that `easy` = (sigma, prob) stays feasible while
/// `hard` is not, splitting the two thresholds geometrically.
pub fn near_capacity(sc: &Scenario, easy: (f64, f64), hard: (f64, f64)) -> Option<Scenario> {
    let t_easy = demand_threshold(sc, easy.0, easy.1);
    let t_hard = demand_threshold(sc, hard.0, hard.1);
    (t_hard < t_easy).then(|| sc.with_demand_factor((t_easy * t_hard).sqrt()))
}
