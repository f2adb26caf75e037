//! Association strategies against each other and against their contracts.

mod common;

use hetnet_core::association::{branch_and_bound, enumerate_assoc, greedy_assoc};
use hetnet_core::robust::Formulation;
use hetnet_core::{BnbOptions, BoxPolicy, PiecewiseApprox, Scenario, SolveStatus, SolverOptions, UncertaintyBox};

fn deterministic(sc: Scenario) -> Formulation {
    Formulation::deterministic(sc, PiecewiseApprox::preset_m5()).unwrap()
}

#[test]
fn single_user_picks_closer_station() {
    let sc = Scenario {
        n: 1,
        n_bs: 2,
        bandwidth_hz: vec![1e7; 2],
        p_max_w: vec![1.0; 2],
        noise_w: 1e-13,
        demand_bps: vec![1e6],
        mu_db: vec![vec![-120.0, -100.0]],
        sigma_db: vec![vec![0.0; 2]],
        positions: None,
    };
    let best = enumerate_assoc(&deterministic(sc), &SolverOptions::default(), 10).unwrap();
    assert_eq!(best.assoc.serving, vec![1]);
}

#[test]
fn all_infeasible_is_reported() {
    let sc = common::synthetic(3, 2, 0.0, 1).with_demand_factor(1e6);
    let err = enumerate_assoc(&deterministic(sc), &SolverOptions::default(), 100).unwrap_err();
    assert!(err.is_infeasible(), "{err}");
}

#[test]
fn exhaustive_and_bnb_dominate_greedy() {
    let opts = SolverOptions::default();
    for seed in [2, 5, 8] {
        let sc = common::synthetic(5, 2, 2.0, seed);
        let bx = UncertaintyBox::uniform(0.1, sc.n, sc.n_bs, BoxPolicy::OneSided).unwrap();
        let f = Formulation::robust(sc.clone(), PiecewiseApprox::preset_m5(), bx).unwrap();
        let greedy = f.solve(&greedy_assoc(&sc), &opts).unwrap().objective;
        let best = enumerate_assoc(&f, &opts, 1000).unwrap();
        let bnb = branch_and_bound(&f, &opts, &BnbOptions::default()).unwrap();
        assert!(best.objective <= greedy * (1.0 + 1e-12));
        assert!(bnb.result.objective <= greedy * (1.0 + 1e-12));
        assert!(bnb.certified && bnb.gap <= 1e-4);
        assert!((bnb.result.objective - best.objective).abs() <= 1e-4 * best.objective);
    }
}

#[test]
fn node_limit_one_returns_greedy_uncertified() {
    let sc = common::synthetic(5, 3, 0.0, 4);
    let f = deterministic(sc.clone());
    let out = branch_and_bound(&f, &SolverOptions::default(), &BnbOptions { node_limit: 1, rel_gap: 1e-4 }).unwrap();
    assert_eq!(out.assoc, greedy_assoc(&sc));
    assert!(!out.certified);
    assert_eq!(out.result.status, SolveStatus::GapNotCertified);
}

#[test]
fn bnb_is_deterministic() {
    let f = deterministic(common::synthetic(4, 3, 0.0, 6));
    let a = branch_and_bound(&f, &SolverOptions::default(), &BnbOptions::default()).unwrap();
    let b = branch_and_bound(&f, &SolverOptions::default(), &BnbOptions::default()).unwrap();
    assert_eq!(a, b);
}
