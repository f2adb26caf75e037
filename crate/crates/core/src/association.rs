//! User-to-base-station association: greedy, exhaustive and branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, SolverOptions};
use crate::model::{Association, Scenario, SolveResult, SolveStatus};
use crate::robust::Formulation;

/// Default cap on the number of associations `enumerate_assoc` will visit.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum AssocStrategy {
    Fixed(Association),
    Greedy,
    Enumerate { limit: usize },
    Bnb(BnbOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbOptions {
    pub node_limit: usize,
    pub rel_gap: f64,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self { node_limit: 100_000, rel_gap: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnbOutcome {
    pub assoc: Association,
    pub result: SolveResult,
    /// Relative gap between the incumbent and the lowest open bound.
    pub gap: f64,
    pub certified: bool,
    pub nodes: usize,
}

/// Each user attaches to its strongest mean gain; ties go to the lower index.
pub fn greedy_assoc(sc: &Scenario) -> Association {
    let serving = sc
        .mu_db
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &m)| if m > best.1 { (j, m) } else { best })
                .0
        })
        .collect();
    Association { serving }
}

/// Solves every association in lexicographic order and keeps the cheapest;
/// ties keep the lexicographically smallest.
pub fn enumerate_assoc(form: &Formulation, opts: &SolverOptions, limit: usize) -> Result<SolveResult> {
    let sc = &form.scenario;
    let count = (sc.n_bs as f64).powi(sc.n as i32);
    if count > limit as f64 {
        return Err(Error::TooManyAssociations { count, limit });
    }
    let mut serving = vec![0usize; sc.n];
    let mut best: Option<SolveResult> = None;
    let mut tightest_slack = f64::INFINITY;
    loop {
        match form.solve(&Association { serving: serving.clone() }, opts) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.objective < b.objective) {
                    best = Some(res);
                }
            }
            Err(Error::Infeasible { slack }) => tightest_slack = tightest_slack.min(slack),
            Err(e) => return Err(e),
        }
        // Odometer increment, last user fastest.
        let mut pos = sc.n;
        loop {
            if pos == 0 {
                return best.ok_or(Error::Infeasible { slack: tightest_slack });
            }
            pos -= 1;
            serving[pos] += 1;
            if serving[pos] < sc.n_bs {
                break;
            }
            serving[pos] = 0;
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    candidates: Vec<Vec<usize>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the lowest bound, oldest first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(f64::MIN_POSITIVE)).max(0.0)
}

/// Best-bound branch-and-bound over the Big-M relaxation, seeded with the
/// greedy association.
pub fn branch_and_bound(form: &Formulation, opts: &SolverOptions, bnb: &BnbOptions) -> Result<BnbOutcome> {
    opts.validate()?;
    if !(bnb.rel_gap >= 0.0) || bnb.node_limit == 0 {
        return Err(crate::error::invalid("node limit must be positive and the gap non-negative"));
    }
    let sc = &form.scenario;
    let mut incumbent: Option<SolveResult> = match form.solve(&greedy_assoc(sc), opts) {
        Ok(r) => Some(r),
        Err(e) if e.is_infeasible() => None,
        Err(e) => return Err(e),
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, candidates: vec![(0..sc.n_bs).collect(); sc.n] });
    let mut nodes = 0;
    let mut lowest_open = f64::INFINITY;
    let mut min_slack = f64::INFINITY;

    while let Some(node) = heap.pop() {
        let prune = |inc: &Option<SolveResult>, bound: f64| {
            inc.as_ref().is_some_and(|r| bound >= r.objective - bnb.rel_gap * r.objective.abs())
        };
        if prune(&incumbent, node.bound) {
            // Best-first: everything left is at least as bad.
            lowest_open = node.bound;
            heap.clear();
            break;
        }
        if nodes >= bnb.node_limit {
            lowest_open = node.bound;
            heap.push(node);
            break;
        }
        nodes += 1;

        let built = form.build_relaxation(&node.candidates, opts.big_m)?;
        let sol = match gp::solve(&built.program, opts, None) {
            Ok(s) => s,
            Err(Error::Infeasible { slack }) => {
                min_slack = min_slack.min(slack);
                continue;
            }
            Err(e) => return Err(e),
        };
        let bound = sol.objective.max(node.bound);
        let undecided = built.indicator_values(&sol.y);
        if undecided.iter().all(Option::is_none) {
            let assoc = Association { serving: node.candidates.iter().map(|c| c[0]).collect() };
            let res = form.extract(&built, &assoc, &sol.y, sol.diagnostics);
            if incumbent.as_ref().is_none_or(|r| res.objective < r.objective) {
                incumbent = Some(res);
            }
            continue;
        }
        if prune(&incumbent, bound) {
            continue;
        }

        // Most fractional indicator; earliest user and candidate on ties.
        let (mut user, mut station, mut score) = (0, 0, f64::INFINITY);
        for (i, vals) in undecided.iter().enumerate() {
            for &(j, v) in vals.iter().flatten() {
                let s = (v - 0.5).abs();
                if s < score {
                    (user, station, score) = (i, j, s);
                }
            }
        }
        let mut fixed = node.candidates.clone();
        fixed[user] = vec![station];
        let mut excluded = node.candidates;
        excluded[user].retain(|&j| j != station);
        for candidates in [fixed, excluded] {
            seq += 1;
            heap.push(Node { bound, seq, candidates });
        }
    }

    let Some(mut result) = incumbent else {
        return Err(Error::Infeasible { slack: min_slack });
    };
    let lowest = heap.iter().map(|n| n.bound).fold(lowest_open, f64::min);
    let gap = if lowest.is_finite() { relative_gap(result.objective, lowest) } else if heap.is_empty() { 0.0 } else { f64::INFINITY };
    let certified = gap <= bnb.rel_gap;
    if !certified {
        result.status = SolveStatus::GapNotCertified;
    }
    Ok(BnbOutcome { assoc: result.assoc.clone(), result, gap, certified, nodes })
}

/// Solves the program under the chosen association strategy.
pub fn solve_with(form: &Formulation, strategy: &AssocStrategy, opts: &SolverOptions) -> Result<SolveResult> {
    match strategy {
        AssocStrategy::Fixed(a) => form.solve(a, opts),
        AssocStrategy::Greedy => form.solve(&greedy_assoc(&form.scenario), opts),
        AssocStrategy::Enumerate { limit } => enumerate_assoc(form, opts, *limit),
        AssocStrategy::Bnb(b) => branch_and_bound(form, opts, b).map(|o| o.result),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::PiecewiseApprox;
    use crate::model::{gen_synthetic, SyntheticParams};

    fn small(seed: u64, n: usize, n_bs: usize) -> Formulation {
        let sc = gen_synthetic(&SyntheticParams { n, n_bs, seed, sigma_db: 0.0, ..Default::default() }).unwrap();
        Formulation::deterministic(sc, PiecewiseApprox::preset_m5()).unwrap()
    }

    #[test]
    fn greedy_picks_strongest_lowest_index() {
        let mut sc = small(1, 3, 3).scenario;
        sc.mu_db = vec![vec![-90.0, -80.0, -80.0], vec![-70.0, -75.0, -70.0], vec![-99.0, -98.0, -97.0]];
        assert_eq!(greedy_assoc(&sc).serving, vec![1, 0, 2]);
    }

    #[test]
    fn enumeration_respects_limit() {
        let f = small(3, 6, 3);
        let err = enumerate_assoc(&f, &SolverOptions::default(), 100).unwrap_err();
        assert!(matches!(err, Error::TooManyAssociations { limit: 100, .. }));
    }

    #[test]
    fn bnb_matches_enumeration() {
        for seed in [4, 7] {
            let f = small(seed, 4, 2);
            let opts = SolverOptions::default();
            let best = enumerate_assoc(&f, &opts, 1000).unwrap();
            let out = branch_and_bound(&f, &opts, &BnbOptions::default()).unwrap();
            assert!(out.certified);
            assert!(
                (out.result.objective - best.objective).abs() <= 1e-4 * best.objective,
                "{} vs {}",
                out.result.objective,
                best.objective
            );
        }
    }

    #[test]
    fn node_limit_reports_uncertified_gap() {
        let f = small(11, 5, 3);
        let out = branch_and_bound(&f, &SolverOptions::default(), &BnbOptions { node_limit: 2, rel_gap: 1e-4 }).unwrap();
        assert_eq!(out.nodes, 2);
        assert!(!out.certified);
        assert_eq!(out.result.status, SolveStatus::GapNotCertified);
    }
}
