//! Pilot assignment schemes.
//!
//! [`assign`] dispatches on a [`Scheme`] and returns a [`SolverResult`]
//! whose labels feed straight into [`crate::channel::estimation_stats`].

pub mod baselines;
pub mod exhaustive;
pub mod ims;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::LargeScale;
use crate::dcp::{fitness, Bounds, DcpError, DiversityMatrix};
use crate::scenario::RadioParams;

pub use baselines::{greedy_assignment, ideal_assignment, random_assignment, repulsive_assignment};
pub use exhaustive::{exhaustive_fitness, exhaustive_search, ExhaustiveObjective, ExhaustiveParams};
pub use ims::{ims, Budget, ImsParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Dcp(#[from] DcpError),
    #[error("exhaustive search needs {states} states, budget is {budget}")]
    BudgetExceeded { states: u64, budget: u64 },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("scheme `{0}` needs a diversity matrix")]
    MissingDiversity(Scheme),
}

/// Cluster capacity regime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMode {
    /// Equal size: `floor(K/tau)..=ceil(K/tau)`.
    #[default]
    Es,
    /// Variable size: `1..=K` (or `0..=K` when `K < tau`).
    Vs,
}

impl ClusterMode {
    pub fn bounds(self, num_ues: usize, num_pilots: usize) -> Bounds {
        match self {
            ClusterMode::Es => Bounds::equal_size(num_ues, num_pilots),
            ClusterMode::Vs => Bounds::variable_size(num_ues, num_pilots),
        }
    }
}

/// A pilot assignment method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Random,
    Greedy,
    Repulsive,
    ImsEs,
    ImsVs,
    Exhaustive,
    Ideal,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Random,
        Scheme::Greedy,
        Scheme::Repulsive,
        Scheme::ImsEs,
        Scheme::ImsVs,
        Scheme::Exhaustive,
        Scheme::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::Greedy => "greedy",
            Scheme::Repulsive => "repulsive",
            Scheme::ImsEs => "ims-es",
            Scheme::ImsVs => "ims-vs",
            Scheme::Exhaustive => "exhaustive",
            Scheme::Ideal => "ideal",
        }
    }

    /// Fixed stream id, so a scheme's randomness does not depend on which
    /// other schemes run alongside it.
    pub fn stream_id(self) -> u64 {
        match self {
            Scheme::Random => 1,
            Scheme::Greedy => 2,
            Scheme::Repulsive => 3,
            Scheme::ImsEs => 4,
            Scheme::ImsVs => 5,
            Scheme::Exhaustive => 6,
            Scheme::Ideal => 7,
        }
    }

    pub fn needs_diversity(self) -> bool {
        matches!(
            self,
            Scheme::Repulsive | Scheme::ImsEs | Scheme::ImsVs | Scheme::Exhaustive
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

/// Best fitness seen so far at a point of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: u64,
    pub elapsed_s: f64,
    pub fitness: f64,
}

/// Assignment produced by a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    /// Pilot label per UE, in `0..num_pilots`.
    pub assignment: Vec<usize>,
    /// Number of distinct labels available (K for the ideal scheme).
    pub num_pilots: usize,
    pub bounds: Bounds,
    /// Clustering fitness of `assignment`, when a diversity matrix exists.
    pub fitness: Option<f64>,
    pub iterations: u64,
    pub elapsed_s: f64,
    pub trace: Vec<TracePoint>,
}

/// Per-drop data a scheme may read.
#[derive(Debug, Clone, Copy)]
pub struct SolverContext<'a> {
    pub ls: &'a LargeScale,
    pub radio: &'a RadioParams,
    pub antennas_per_ap: usize,
    pub diversity: Option<&'a DiversityMatrix>,
}

/// Scheme parameters; the `solver` section of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub ims: ImsParams,
    /// Greedy reassignment steps; `None` means `K`.
    pub greedy_iters: Option<usize>,
    pub exhaustive: ExhaustiveParams,
}

/// Runs `scheme` on one drop. With `deterministic`, IMS stops on its
/// iteration budget instead of the wall clock.
pub fn assign<R: Rng + ?Sized>(
    scheme: Scheme,
    ctx: &SolverContext<'_>,
    config: &SolverConfig,
    deterministic: bool,
    rng: &mut R,
) -> Result<SolverResult, SolverError> {
    let started = Instant::now();
    let k = ctx.ls.num_ues();
    let tau = ctx.radio.num_pilots;
    let diversity = || ctx.diversity.ok_or(SolverError::MissingDiversity(scheme));
    let plain = |assignment: Vec<usize>, num_pilots: usize, bounds: Bounds, iterations: u64| {
        let fitness = ctx.diversity.map(|dm| fitness(&assignment, num_pilots, dm));
        SolverResult {
            assignment,
            num_pilots,
            bounds,
            fitness,
            iterations,
            elapsed_s: started.elapsed().as_secs_f64(),
            trace: Vec::new(),
        }
    };
    match scheme {
        Scheme::Random => Ok(plain(random_assignment(k, tau, rng), tau, Bounds::new(0, k), 0)),
        Scheme::Greedy => {
            let n = config.greedy_iters.unwrap_or(k);
            let p = greedy_assignment(ctx.ls, ctx.radio, ctx.antennas_per_ap, tau, n, rng);
            Ok(plain(p, tau, Bounds::new(0, k), n as u64))
        }
        Scheme::Repulsive => {
            let p = repulsive_assignment(diversity()?, tau, rng)?;
            Ok(plain(p, tau, Bounds::equal_size(k, tau), 0))
        }
        Scheme::ImsEs | Scheme::ImsVs => {
            let params = ImsParams {
                mode: if scheme == Scheme::ImsEs {
                    ClusterMode::Es
                } else {
                    ClusterMode::Vs
                },
                ..config.ims.clone()
            };
            let budget = if deterministic {
                Budget::Iterations(params.iterations)
            } else {
                Budget::WallClock(Duration::from_secs_f64(params.t_max))
            };
            ims(diversity()?, tau, &params, budget, rng)
        }
        Scheme::Exhaustive => {
            let ex = &config.exhaustive;
            let vs = ClusterMode::Vs.bounds(k, tau);
            let bounds = Bounds::new(ex.lb.unwrap_or(vs.lb), ex.ub.unwrap_or(vs.ub));
            let res = match ex.objective {
                ExhaustiveObjective::Fitness => exhaustive_fitness(diversity()?, tau, bounds, ex.budget)?,
                ExhaustiveObjective::SumRate => exhaustive_search(k, tau, bounds, ex.budget, |p| {
                    baselines::full_power_ul_sinr(ctx.ls, p, ctx.radio, ctx.antennas_per_ap)
                        .iter()
                        .map(|s| (1.0 + s).log2())
                        .sum()
                })?,
            };
            Ok(plain(res.assignment, tau, bounds, res.visited))
        }
        Scheme::Ideal => Ok(plain(ideal_assignment(k), k, Bounds::new(1, 1), 0)),
    }
}
