//! Worst-case program properties: ordering, monotonicity and box feasibility.

mod common;

use hetnet_core::association::greedy_assoc;
use hetnet_core::model::check_feasible;
use hetnet_core::robust::{build_migp, build_robust, worst_case_gains, Formulation};
use hetnet_core::{BoxPolicy, PiecewiseApprox, SolverOptions, UncertaintyBox};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn robust_objective(sc: &hetnet_core::Scenario, rho: f64) -> f64 {
    let bx = UncertaintyBox::from_rhos(&vec![rho; sc.n], sc.n_bs, BoxPolicy::OneSided);
    Formulation::robust(sc.clone(), PiecewiseApprox::preset_m5(), bx)
        .unwrap()
        .solve(&greedy_assoc(sc), &SolverOptions::default())
        .unwrap()
        .objective
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn robust_never_cheaper_than_deterministic(seed in 0u64..1000, sigma in 0.5f64..4.0) {
        let sc = common::synthetic(6, 3, sigma, seed);
        let det = Formulation::deterministic(sc.clone(), PiecewiseApprox::preset_m5())
            .unwrap()
            .solve(&greedy_assoc(&sc), &SolverOptions::default())
            .unwrap();
        let rob = robust_objective(&sc, 1.5);
        prop_assert!(rob >= det.objective * (1.0 - 1e-8));
    }

    #[test]
    fn objective_grows_with_box_and_sigma(seed in 0u64..1000) {
        let sc = common::synthetic(5, 3, 2.0, seed);
        let by_rho: Vec<f64> = [0.5, 1.0, 2.0, 2.5].iter().map(|&r| robust_objective(&sc, r)).collect();
        prop_assert!(by_rho.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-8)), "{by_rho:?}");
        let by_scale: Vec<f64> = [0.0, 0.5, 1.0, 1.5].iter().map(|&k| robust_objective(&sc.with_sigma_scale(k), 2.04)).collect();
        prop_assert!(by_scale.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-8)), "{by_scale:?}");
    }
}

#[test]
fn zero_sigma_program_matches_deterministic() {
    for seed in 0..5 {
        let sc = common::synthetic(7, 4, 0.0, seed);
        let assoc = greedy_assoc(&sc);
        let bx = UncertaintyBox::uniform(0.05, sc.n, sc.n_bs, BoxPolicy::TwoSided).unwrap();
        let pw = PiecewiseApprox::preset_m5();
        assert_eq!(build_migp(&sc, &pw, &assoc).unwrap(), build_robust(&sc, &pw, &bx, &assoc).unwrap());
    }
}

/// Every point of a small box, corners included, meets the true Shannon
/// demand with the robust plan.
#[test]
fn box_points_satisfy_shannon_demand() {
    let sc = common::synthetic(4, 3, 3.0, 17);
    let bx = UncertaintyBox::uniform(0.0993, sc.n, sc.n_bs, BoxPolicy::TwoSided).unwrap();
    let f = Formulation::robust(sc.clone(), PiecewiseApprox::preset_m5(), bx.clone()).unwrap();
    let assoc = greedy_assoc(&sc);
    let res = f.solve(&assoc, &SolverOptions::default()).unwrap();
    let audit = check_feasible(&res, &sc, &worst_case_gains(&sc, &bx, &assoc).unwrap(), 1e-6).unwrap();
    assert!(audit.pass, "{audit:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corners = 1usize << sc.n_bs;
    for i in 0..sc.n {
        let j = assoc.serving[i];
        let check = |rho: &[f64]| {
            let g: Vec<f64> = (0..sc.n_bs)
                .map(|k| hetnet_core::model::db_to_linear(sc.mu_db[i][k] + rho[k] * sc.sigma_db[i][k]))
                .collect();
            let t = common::shannon(&res.power_w, &g, sc.noise_w, res.x[i][j], sc.bandwidth_hz[j], j);
            assert!(t >= sc.demand_bps[i] * (1.0 - 1e-6), "user {i} rho {rho:?}: {t} < {}", sc.demand_bps[i]);
        };
        for mask in 0..corners {
            let rho: Vec<f64> = (0..sc.n_bs)
                .map(|k| if mask >> k & 1 == 1 { bx.rho_hi[i][k] } else { bx.rho_lo[i][k] })
                .collect();
            check(&rho);
        }
        for _ in 0..200 {
            let rho: Vec<f64> = (0..sc.n_bs).map(|k| rng.random_range(bx.rho_lo[i][k]..=bx.rho_hi[i][k])).collect();
            check(&rho);
        }
    }
}

#[test]
fn box_json_round_trip() {
    let bx = UncertaintyBox::uniform(0.0993, 3, 5, BoxPolicy::OneSided).unwrap();
    assert_eq!(UncertaintyBox::from_json(&bx.to_json()).unwrap(), bx);
}
