//! Sampling statistics and the violation/coverage relationship.

mod common;

use hetnet_core::association::greedy_assoc;
use hetnet_core::montecarlo::{box_coverage, sample_rho, validate};
use hetnet_core::robust::Formulation;
use hetnet_core::{BoxPolicy, GainDistribution, PiecewiseApprox, SolverOptions, UncertaintyBox};

#[test]
fn one_sided_box_realizes_its_probability() {
    let samples = 100_000;
    let alpha = 0.0993;
    let rho = sample_rho(&GainDistribution::LogNormal, 4, 5, samples, 12).unwrap();
    let bx = UncertaintyBox::uniform(alpha, 4, 5, BoxPolicy::OneSided).unwrap();
    let se = (alpha * (1.0 - alpha) / samples as f64).sqrt();
    for (i, out) in box_coverage(&rho, &bx, &[0, 1, 2, 3]).unwrap().into_iter().enumerate() {
        assert!((out - alpha).abs() <= 3.0 * se, "user {i}: {out}");
    }
}

#[test]
fn two_sided_box_realizes_its_probability() {
    let samples = 100_000;
    let alpha = 0.2;
    let rho = sample_rho(&GainDistribution::LogNormal, 2, 3, samples, 13).unwrap();
    let bx = UncertaintyBox::uniform(alpha, 2, 3, BoxPolicy::TwoSided).unwrap();
    let se = (alpha * (1.0 - alpha) / samples as f64).sqrt();
    for out in box_coverage(&rho, &bx, &[0, 2]).unwrap() {
        assert!((out - alpha).abs() <= 3.0 * se, "{out}");
    }
}

#[test]
fn robust_violations_stay_inside_outside_box_share() {
    let sc = common::synthetic(10, 4, 3.0, 31);
    let bx = UncertaintyBox::uniform(0.0993, sc.n, sc.n_bs, BoxPolicy::OneSided).unwrap();
    let res = Formulation::robust(sc.clone(), PiecewiseApprox::preset_m5(), bx.clone())
        .unwrap()
        .solve(&greedy_assoc(&sc), &SolverOptions::default())
        .unwrap();
    for dist in [GainDistribution::LogNormal, GainDistribution::Uniform { k: 4.0 }, GainDistribution::StudentT { dof: 2.0 }] {
        let rep = validate(&res, &sc, &dist, 20_000, 2, Some(&bx)).unwrap();
        let outside = rep.per_user_outside_box.as_ref().unwrap();
        for (v, o) in rep.per_user_violation.iter().zip(outside) {
            assert!(v <= o, "{dist}: violation {v} > outside {o}");
        }
    }
}

#[test]
fn zero_sigma_draws_are_constant() {
    let sc = common::synthetic(3, 2, 0.0, 1);
    let rho = sample_rho(&GainDistribution::LogNormal, 3, 2, 10, 4).unwrap();
    let first = hetnet_core::montecarlo::gains_from_rho(&sc, &rho, 1.0, 0).unwrap();
    for s in 1..10 {
        assert_eq!(hetnet_core::montecarlo::gains_from_rho(&sc, &rho, 1.0, s).unwrap(), first);
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let sc = common::synthetic(8, 3, 3.0, 2);
    let res = Formulation::deterministic(sc.clone(), PiecewiseApprox::preset_m5())
        .unwrap()
        .solve(&greedy_assoc(&sc), &SolverOptions::default())
        .unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| validate(&res, &sc, &GainDistribution::LogNormal, 5000, 77, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}
