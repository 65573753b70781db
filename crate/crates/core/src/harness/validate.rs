//! Self-check suite run by `cfpilot validate`: invariants and oracles
//! that must hold for any build, on small instances.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::stats::percentile;
use crate::channel::{estimation_stats, large_scale, simulate_ul_decomposition, LargeScale, DEFAULT_MC_BUDGET};
use crate::dcp::{fitness, Bounds, Clustering, DiversityMatrix, PilotSolution, SwapDelta};
use crate::rates::{evaluate, ul_term_powers, MaxMinParams, UlPowerPolicy, UlSinrTerms};
use crate::scenario::{drop_rng, generate_topology, RadioParams, Stream};
use crate::solvers::exhaustive::exhaustive_fitness;
use crate::solvers::ims::{ims, initial_feasible, local_search_observed, Budget, ImsParams};
use crate::solvers::ClusterMode;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_dm(k: usize, rng: &mut impl Rng) -> DiversityMatrix {
    DiversityMatrix::from_fn(k, |_, _| rng.random_range(0.0..1.0)).expect("valid entries")
}

fn delta_exactness(seed: u64) -> Check {
    let mut rng = drop_rng(seed, 0, Stream::Solver(100));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..40);
        let tau = rng.random_range(1..=k.min(10));
        let b = Bounds::variable_size(k, tau);
        let dm = random_dm(k, &mut rng);
        let p = initial_feasible(k, tau, b, &mut rng).expect("feasible bounds");
        let cl = Clustering::new(&dm, PilotSolution::new(p.clone(), tau, b, &dm).expect("feasible")).expect("sized");
        let f0 = fitness(&p, tau, &dm);
        let (ue, to) = (rng.random_range(0..k), rng.random_range(0..tau));
        if let Ok(d) = cl.delta_one_move(ue, to) {
            let mut q = p.clone();
            q[ue] = to;
            worst = worst.max((d - (fitness(&q, tau, &dm) - f0)).abs());
        }
        let (a, c) = (rng.random_range(0..k), rng.random_range(0..k));
        if let Ok(d) = cl.delta_swap(a, c, SwapDelta::Weighted) {
            let mut q = p.clone();
            q.swap(a, c);
            worst = worst.max((d - (fitness(&q, tau, &dm) - f0)).abs());
        }
    }
    Check {
        name: "delta-exactness",
        passed: worst < 1e-9,
        detail: format!("max |delta - recomputed| = {worst:.3e}"),
    }
}

fn local_search_monotone(seed: u64) -> Check {
    let mut rng = drop_rng(seed, 1, Stream::Solver(100));
    let mut violations = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..30);
        let tau = rng.random_range(1..=k.min(8));
        let b = if rng.random_bool(0.5) {
            Bounds::equal_size(k, tau)
        } else {
            Bounds::variable_size(k, tau)
        };
        let dm = random_dm(k, &mut rng);
        let p = initial_feasible(k, tau, b, &mut rng).expect("feasible bounds");
        let mut cl = Clustering::new(&dm, PilotSolution::new(p, tau, b, &dm).expect("feasible")).expect("sized");
        let mut last = cl.fitness();
        local_search_observed(&mut cl, SwapDelta::Weighted, |c| {
            if c.fitness() < last || !c.solution().is_feasible() {
                violations += 1;
            }
            last = c.fitness();
        });
    }
    Check {
        name: "local-search-monotone-feasible",
        passed: violations == 0,
        detail: format!("{violations} violations in 100 runs"),
    }
}

fn ims_vs_exhaustive(seed: u64) -> Check {
    let mut rng = drop_rng(seed, 2, Stream::Solver(100));
    let mut hits = 0;
    let trials = 20;
    for t in 0..trials {
        let k = rng.random_range(4..=9);
        let tau = rng.random_range(2..=3);
        let dm = random_dm(k, &mut rng);
        let params = ImsParams {
            mode: ClusterMode::Vs,
            ..ImsParams::default()
        };
        let bounds = params.bounds(k, tau);
        let best = exhaustive_fitness(&dm, tau, bounds, 1_000_000).expect("small instance");
        let found = ims(
            &dm,
            tau,
            &params,
            Budget::Iterations(300),
            &mut drop_rng(seed, t, Stream::Solver(101)),
        )
        .expect("valid params");
        if (found.fitness.expect("ims reports fitness") - best.value).abs() < 1e-9 {
            hits += 1;
        }
    }
    Check {
        name: "ims-matches-exhaustive",
        passed: hits >= trials - 1,
        detail: format!("{hits}/{trials} optimal"),
    }
}

fn unique_pilots_match_ideal(seed: u64) -> Check {
    let radio = RadioParams {
        num_pilots: 8,
        ..RadioParams::default()
    };
    let mut rng = drop_rng(seed, 3, Stream::Placement);
    let topo = generate_topology(20, 8, 2, 1.0, &mut rng).expect("valid dimensions");
    let ls = large_scale(&topo, &radio, &mut drop_rng(seed, 3, Stream::Shadowing));
    let run = |p: &[usize]| {
        let stats = estimation_stats(&ls, p, &radio).expect("sized");
        evaluate(
            &ls,
            &stats,
            p,
            &radio,
            2,
            UlPowerPolicy::MaxMin,
            &MaxMinParams::default(),
        )
        .expect("rates")
        .0
    };
    let ideal: Vec<usize> = (0..8).collect();
    let mut shuffled = ideal.clone();
    shuffled.reverse();
    let a = run(&ideal);
    let b = run(&shuffled);
    let same = a.ul_rate_bpshz == b.ul_rate_bpshz && a.dl_rate_bpshz == b.dl_rate_bpshz;
    Check {
        name: "unique-pilots-equal-ideal",
        passed: same,
        detail: format!(
            "min UL rate {:.6} bit/s/Hz",
            a.ul_rate_bpshz.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    }
}

fn monte_carlo_cross_check(seed: u64) -> Check {
    let radio = RadioParams {
        num_pilots: 1,
        ..RadioParams::default()
    };
    let beta = DMatrix::from_row_slice(3, 2, &[3e-12, 1e-12, 1e-12, 2e-12, 5e-13, 4e-13]);
    let ls = LargeScale::from_beta(beta);
    let pilots = [0, 0];
    let eta = [1.0, 0.7];
    let mc = simulate_ul_decomposition(
        &ls,
        &pilots,
        &radio,
        1,
        &eta,
        20_000,
        DEFAULT_MC_BUDGET,
        &mut drop_rng(seed, 4, Stream::Solver(102)),
    )
    .expect("small instance");
    let stats = estimation_stats(&ls, &pilots, &radio).expect("sized");
    let terms = UlSinrTerms::new(&ls, &stats, &pilots, &radio, 1).expect("sized");
    let closed = terms.sinr(&eta);
    let mut worst = 0.0f64;
    for (t, &s) in mc.terms.iter().zip(&closed) {
        worst = worst.max((t.sinr - s).abs() / t.sinr_std_err);
    }
    let powers = ul_term_powers(&terms, &eta);
    Check {
        name: "monte-carlo-sinr",
        passed: worst < 4.0,
        detail: format!(
            "max deviation {worst:.2} standard errors; closed-form desired power {:.4e}",
            powers[0].desired
        ),
    }
}

fn percentile_examples() -> Check {
    let ramp: Vec<f64> = (0..100).map(f64::from).collect();
    let a = percentile(&[1.0, 2.0, 3.0, 4.0], 50.0).expect("non-empty");
    let b = percentile(&ramp, 95.0).expect("non-empty");
    Check {
        name: "percentile-interpolation",
        passed: a == 2.5 && (b - 94.05).abs() < 1e-12,
        detail: format!("p50([1,2,3,4]) = {a}, p95(0..99) = {b}"),
    }
}

/// Runs every check. Takes a few seconds in release builds.
pub fn run_validation(seed: u64) -> ValidationReport {
    ValidationReport {
        seed,
        checks: vec![
            delta_exactness(seed),
            local_search_monotone(seed),
            ims_vs_exhaustive(seed),
            unique_pilots_match_ideal(seed),
            monte_carlo_cross_check(seed),
            percentile_examples(),
        ],
    }
}
