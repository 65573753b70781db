//! Iterative Maxima Search over the diverse clustering objective.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterMode, SolverError, SolverResult, TracePoint};
use crate::dcp::{self, Bounds, Clustering, DcpError, DiversityMatrix, Move, PilotSolution, SwapDelta};

/// Tuning knobs of the search. Field names double as config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImsParams {
    /// Number of random initial solutions.
    pub i_s: usize,
    /// Wall-clock budget per run, seconds.
    pub t_max: f64,
    /// Iteration budget used instead of `t_max` in deterministic mode.
    pub iterations: u64,
    /// Consecutive non-improving weak rounds before a robust perturbation.
    pub alpha: usize,
    /// Weak perturbation rounds.
    pub eta_w: usize,
    /// Extra candidates per weak round; `None` means `K`.
    pub eta_w2: Option<usize>,
    /// Robust perturbation strength: `round(theta * K / tau_p)` moves.
    pub theta: f64,
    /// Explicit cluster bounds; `None` derives them from `mode`.
    pub lb: Option<usize>,
    pub ub: Option<usize>,
    pub mode: ClusterMode,
    pub swap_delta: SwapDelta,
}

impl Default for ImsParams {
    fn default() -> Self {
        Self {
            i_s: 10,
            t_max: 1.0,
            iterations: 2000,
            alpha: 20,
            eta_w: 3,
            eta_w2: None,
            theta: 1.5,
            lb: None,
            ub: None,
            mode: ClusterMode::Es,
            swap_delta: SwapDelta::Weighted,
        }
    }
}

impl ImsParams {
    pub fn bounds(&self, num_ues: usize, num_pilots: usize) -> Bounds {
        let derived = self.mode.bounds(num_ues, num_pilots);
        Bounds::new(self.lb.unwrap_or(derived.lb), self.ub.unwrap_or(derived.ub))
    }

    pub fn robust_moves(&self, num_ues: usize, num_pilots: usize) -> usize {
        (self.theta * num_ues as f64 / num_pilots as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidParams(what.to_string()));
        if self.i_s == 0 {
            return bad("i_s must be at least 1");
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return bad("theta must be non-negative");
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return bad("t_max must be non-negative");
        }
        Ok(())
    }
}

/// When the outer loop stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    WallClock(Duration),
    /// Total number of local searches, including the initial ones.
    Iterations(u64),
}

impl Budget {
    fn exhausted(&self, started: Instant, iterations: u64) -> bool {
        match *self {
            Budget::WallClock(limit) => started.elapsed() > limit,
            Budget::Iterations(n) => iterations >= n,
        }
    }
}

/// Random assignment that respects the bounds: every pilot first receives
/// `lb` random UEs, the rest draw pilots until one has room.
pub fn initial_feasible<R: Rng + ?Sized>(
    num_ues: usize,
    num_pilots: usize,
    bounds: Bounds,
    rng: &mut R,
) -> Result<Vec<usize>, DcpError> {
    bounds.check(num_ues, num_pilots)?;
    let mut order: Vec<usize> = (0..num_ues).collect();
    order.shuffle(rng);
    let mut p = vec![0; num_ues];
    let mut size = vec![0; num_pilots];
    let seeded = num_pilots * bounds.lb;
    for (slot, &ue) in order[..seeded].iter().enumerate() {
        let pilot = slot / bounds.lb;
        p[ue] = pilot;
        size[pilot] += 1;
    }
    for &ue in &order[seeded..] {
        loop {
            let pilot = rng.random_range(0..num_pilots);
            if size[pilot] < bounds.ub {
                p[ue] = pilot;
                size[pilot] += 1;
                break;
            }
        }
    }
    Ok(p)
}

/// First-improvement descent: a sweep over all OneMoves, then over all
/// SwapMoves, repeated until a full pass accepts nothing. Returns the number
/// of accepted moves.
pub fn local_search(cl: &mut Clustering<'_>, mode: SwapDelta) -> u64 {
    local_search_observed(cl, mode, |_| {})
}

/// [`local_search`] with a callback after every accepted move.
pub fn local_search_observed(
    cl: &mut Clustering<'_>,
    mode: SwapDelta,
    mut on_move: impl FnMut(&Clustering<'_>),
) -> u64 {
    cl.refresh();
    let eps = cl.diversity().tolerance();
    let k = cl.solution().num_ues();
    let tau = cl.solution().num_pilots();
    let mut accepted = 0;
    loop {
        let before = accepted;
        for ue in 0..k {
            for to in 0..tau {
                if cl.can_move(ue, to) && cl.delta_one_unchecked(ue, to) > eps {
                    cl.apply_move(ue, to).expect("move checked feasible");
                    accepted += 1;
                    on_move(cl);
                }
            }
        }
        for a in 0..k {
            for b in a + 1..k {
                if cl.pilot_of(a) != cl.pilot_of(b) && cl.delta_swap_unchecked(a, b, mode) > eps {
                    cl.apply_swap(a, b).expect("distinct clusters");
                    accepted += 1;
                    on_move(cl);
                }
            }
        }
        if accepted == before {
            return accepted;
        }
    }
}

fn has_one_moves(sol: &PilotSolution) -> bool {
    let donors = sol.s.iter().filter(|&&n| n > sol.bounds.lb).count();
    let takers = sol.s.iter().filter(|&&n| n < sol.bounds.ub).count();
    let both = sol
        .s
        .iter()
        .filter(|&&n| n > sol.bounds.lb && n < sol.bounds.ub)
        .count();
    donors > 0 && takers > 0 && !(donors == 1 && takers == 1 && both == 1)
}

fn has_swaps(sol: &PilotSolution) -> bool {
    sol.s.iter().filter(|&&n| n > 0).count() >= 2
}

/// A uniformly random feasible move: a fair coin picks OneMove or SwapMove
/// (falling back to whichever is non-empty), then rejection sampling picks
/// the move. `None` when both neighbourhoods are empty.
pub fn random_neighbor<R: Rng + ?Sized>(cl: &Clustering<'_>, rng: &mut R) -> Option<Move> {
    let sol = cl.solution();
    let (k, tau) = (sol.num_ues(), sol.num_pilots());
    let one = has_one_moves(sol);
    let swap = has_swaps(sol);
    let use_one = match (one, swap) {
        (false, false) => return None,
        (true, false) => true,
        (false, true) => false,
        (true, true) => rng.random_bool(0.5),
    };
    loop {
        if use_one {
            let ue = rng.random_range(0..k);
            let to = rng.random_range(0..tau);
            if cl.can_move(ue, to) {
                return Some(Move::One { ue, to });
            }
        } else {
            let a = rng.random_range(0..k);
            let b = rng.random_range(0..k);
            if cl.pilot_of(a) != cl.pilot_of(b) {
                return Some(Move::Swap { a, b });
            }
        }
    }
}

/// `eta_w` rounds; each draws one random neighbour plus `eta_w2` more and
/// applies the best of them, whether or not it improves.
pub fn weak_perturbation<R: Rng + ?Sized>(
    cl: &mut Clustering<'_>,
    eta_w: usize,
    eta_w2: usize,
    mode: SwapDelta,
    rng: &mut R,
) {
    for _ in 0..eta_w {
        let Some(mut best) = random_neighbor(cl, rng) else {
            return;
        };
        let mut best_delta = cl.delta(best, mode).expect("sampled move is feasible");
        for _ in 0..eta_w2 {
            let cand = random_neighbor(cl, rng).expect("neighbourhood non-empty");
            let d = cl.delta(cand, mode).expect("sampled move is feasible");
            if d > best_delta {
                best = cand;
                best_delta = d;
            }
        }
        cl.apply(best).expect("sampled move is feasible");
    }
}

/// `eta_s` random feasible moves applied unconditionally.
pub fn robust_perturbation<R: Rng + ?Sized>(cl: &mut Clustering<'_>, eta_s: usize, rng: &mut R) {
    for _ in 0..eta_s {
        match random_neighbor(cl, rng) {
            Some(mv) => cl.apply(mv).expect("sampled move is feasible"),
            None => return,
        }
    }
}

/// Runs the full search and returns the best assignment found.
pub fn ims<R: Rng + ?Sized>(
    dm: &DiversityMatrix,
    num_pilots: usize,
    params: &ImsParams,
    budget: Budget,
    rng: &mut R,
) -> Result<SolverResult, SolverError> {
    params.validate()?;
    let started = Instant::now();
    let k = dm.len();
    let bounds = params.bounds(k, num_pilots);
    bounds.check(k, num_pilots)?;
    let eta_w2 = params.eta_w2.unwrap_or(k);
    let eta_s = params.robust_moves(k, num_pilots);
    let eps = dm.tolerance();
    let mode = params.swap_delta;

    let mut iterations = 0u64;
    let mut current: Option<Clustering<'_>> = None;
    for _ in 0..params.i_s {
        let p = initial_feasible(k, num_pilots, bounds, rng)?;
        let mut cl = Clustering::new(dm, PilotSolution::new(p, num_pilots, bounds, dm)?)?;
        local_search(&mut cl, mode);
        iterations += 1;
        if current.as_ref().is_none_or(|c| cl.fitness() > c.fitness() + eps) {
            current = Some(cl);
        }
    }
    let mut cl = current.expect("i_s >= 1");
    let mut best = cl.solution().clone();
    let mut best_fit = cl.fitness();
    let mut trace = vec![TracePoint {
        iteration: iterations,
        elapsed_s: started.elapsed().as_secs_f64(),
        fitness: best_fit,
    }];

    let stuck = random_neighbor(&cl, rng).is_none();
    'outer: while !stuck && !budget.exhausted(started, iterations) {
        let mut ctr = 0;
        while ctr < params.alpha {
            if budget.exhausted(started, iterations) {
                break 'outer;
            }
            weak_perturbation(&mut cl, params.eta_w, eta_w2, mode, rng);
            local_search(&mut cl, mode);
            iterations += 1;
            let f = cl.fitness();
            if f > best_fit + eps {
                best = cl.solution().clone();
                best_fit = f;
                ctr = 0;
                trace.push(TracePoint {
                    iteration: iterations,
                    elapsed_s: started.elapsed().as_secs_f64(),
                    fitness: f,
                });
            } else {
                ctr += 1;
            }
        }
        robust_perturbation(&mut cl, eta_s, rng);
    }

    let fitness = dcp::fitness(&best.p, num_pilots, dm);
    Ok(SolverResult {
        num_pilots,
        bounds,
        fitness: Some(fitness),
        assignment: best.p,
        iterations,
        elapsed_s: started.elapsed().as_secs_f64(),
        trace,
    })
}
