//! Monte Carlo drops and their aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Config, SweepParam};
use super::stats::{mean, percentile};
use super::HarnessError;
use crate::channel::{estimation_stats, large_scale, LargeScale};
use crate::dcp::{build_diversity, DiversityMatrix};
use crate::rates::{evaluate, PowerControl, RateReport};
use crate::scenario::{drop_rng, generate_topology, Stream, Topology};
use crate::solvers::{assign, Scheme, SolverContext, SolverResult};

/// Channel realisation shared by every scheme of a drop.
#[derive(Debug, Clone)]
pub struct DropChannels {
    pub topology: Topology,
    pub large_scale: LargeScale,
    pub diversity: DiversityMatrix,
}

/// Draws placement, shadowing and clustering features of drop `drop`, each
/// from its own stream.
pub fn draw_channels(cfg: &Config, drop: u64) -> Result<DropChannels, HarnessError> {
    let seed = cfg.experiment.seed;
    let t = &cfg.topology;
    let topology = generate_topology(
        t.num_aps,
        t.num_ues,
        t.antennas_per_ap,
        t.area_km,
        &mut drop_rng(seed, drop, Stream::Placement),
    )?;
    let ls = large_scale(&topology, &cfg.radio, &mut drop_rng(seed, drop, Stream::Shadowing));
    let diversity = build_diversity(
        &topology,
        &ls,
        cfg.experiment.feature_source,
        cfg.experiment.loc_error_m,
        &mut drop_rng(seed, drop, Stream::LocationError),
    )?;
    Ok(DropChannels {
        topology,
        large_scale: ls,
        diversity,
    })
}

/// Outcome of one scheme on one drop.
#[derive(Debug, Clone)]
pub struct SchemeDrop {
    pub scheme: Scheme,
    pub solver: SolverResult,
    pub report: RateReport,
    pub power: PowerControl,
}

/// Runs one scheme on an already drawn drop.
pub fn run_scheme(
    cfg: &Config,
    channels: &DropChannels,
    scheme: Scheme,
    drop: u64,
) -> Result<SchemeDrop, HarnessError> {
    let ctx = SolverContext {
        ls: &channels.large_scale,
        radio: &cfg.radio,
        antennas_per_ap: cfg.topology.antennas_per_ap,
        diversity: Some(&channels.diversity),
    };
    let mut rng = drop_rng(cfg.experiment.seed, drop, Stream::Solver(scheme.stream_id()));
    let solver = assign(scheme, &ctx, &cfg.solver, cfg.experiment.deterministic, &mut rng)?;
    let stats = estimation_stats(&channels.large_scale, &solver.assignment, &cfg.radio)?;
    let (report, power) = evaluate(
        &channels.large_scale,
        &stats,
        &solver.assignment,
        &cfg.radio,
        cfg.topology.antennas_per_ap,
        cfg.experiment.ul_power,
        &cfg.experiment.maxmin,
    )?;
    Ok(SchemeDrop {
        scheme,
        solver,
        report,
        power,
    })
}

/// Every configured scheme on drop `drop`, all on the same channels.
pub fn run_drop(cfg: &Config, drop: u64) -> Result<Vec<SchemeDrop>, HarnessError> {
    let channels = draw_channels(cfg, drop)?;
    cfg.experiment
        .schemes
        .iter()
        .map(|&s| run_scheme(cfg, &channels, s, drop))
        .collect()
}

/// Throughput of one UE in one drop under one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub scheme: Scheme,
    pub sweep_param: String,
    pub sweep_value: String,
    pub drop: u64,
    pub ue: usize,
    pub ul_tput_bps: f64,
    pub dl_tput_bps: f64,
}

/// Solver statistics of one scheme on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub scheme: Scheme,
    pub sweep_value: String,
    pub drop: u64,
    pub fitness: Option<f64>,
    pub iterations: u64,
    pub solver_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropFailure {
    pub sweep_value: String,
    pub drop: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_value: String,
    pub metric: String,
    pub value: f64,
}

/// All samples of an experiment, ordered by sweep point, drop, scheme, UE.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<String>,
    pub schemes: Vec<Scheme>,
    pub ues: Vec<UeRecord>,
    pub drops: Vec<DropRecord>,
    pub failures: Vec<DropFailure>,
}

impl ExperimentResult {
    fn select(&self, scheme: Scheme, sweep_value: &str, pick: impl Fn(&UeRecord) -> f64) -> Vec<f64> {
        self.ues
            .iter()
            .filter(|r| r.scheme == scheme && r.sweep_value == sweep_value)
            .map(pick)
            .collect()
    }

    /// Uplink throughputs of `scheme` at a sweep point (`""` without sweep).
    pub fn ul(&self, scheme: Scheme, sweep_value: &str) -> Vec<f64> {
        self.select(scheme, sweep_value, |r| r.ul_tput_bps)
    }

    pub fn dl(&self, scheme: Scheme, sweep_value: &str) -> Vec<f64> {
        self.select(scheme, sweep_value, |r| r.dl_tput_bps)
    }

    /// Mean, 5th, 50th and 95th percentile of both directions, plus the
    /// sample count and mean clustering fitness, per scheme and sweep point.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for sv in &self.sweep_values {
            for &scheme in &self.schemes {
                let ul = self.ul(scheme, sv);
                let dl = self.dl(scheme, sv);
                if ul.is_empty() {
                    continue;
                }
                let mut push = |metric: &str, value: f64| {
                    rows.push(SummaryRow {
                        scheme,
                        sweep_value: sv.clone(),
                        metric: metric.to_string(),
                        value,
                    })
                };
                push("samples", ul.len() as f64);
                for (dir, xs) in [("ul", &ul), ("dl", &dl)] {
                    push(&format!("{dir}_mean_bps"), mean(xs).expect("non-empty"));
                    for q in [5.0, 50.0, 95.0] {
                        push(&format!("{dir}_p{q}_bps"), percentile(xs, q).expect("non-empty"));
                    }
                }
                let fits: Vec<f64> = self
                    .drops
                    .iter()
                    .filter(|d| d.scheme == scheme && &d.sweep_value == sv)
                    .filter_map(|d| d.fitness)
                    .collect();
                if let Ok(m) = mean(&fits) {
                    push("fitness_mean", m);
                }
            }
        }
        rows
    }

    /// Looks up one summary value.
    pub fn metric(&self, scheme: Scheme, sweep_value: &str, metric: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|r| r.scheme == scheme && r.sweep_value == sweep_value && r.metric == metric)
            .map(|r| r.value)
    }
}

/// Runs every (sweep point, drop) pair, in parallel when `jobs` allows.
/// Failed drops are listed in `failures`; the rest are still reported.
pub fn run_experiment(cfg: &Config) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let exp = &cfg.experiment;
    let points: Vec<(String, Config)> = match &exp.sweep {
        None => vec![(String::new(), cfg.clone())],
        Some(sweep) => sweep
            .values
            .iter()
            .map(|v| Ok((v.to_string(), cfg.at(sweep.param, v)?)))
            .collect::<Result<_, HarnessError>>()?,
    };
    let sweep_name = exp.sweep.as_ref().map(|s| s.param.name()).unwrap_or("");
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..exp.drops as u64).map(move |d| (p, d)))
        .collect();
    let work = || -> Vec<Result<Vec<SchemeDrop>, HarnessError>> {
        tasks.par_iter().map(|&(p, d)| run_drop(&points[p].1, d)).collect()
    };
    let outcomes = match exp.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut result = ExperimentResult {
        name: exp.name.clone(),
        sweep_param: exp.sweep.as_ref().map(|s| s.param),
        sweep_values: points.iter().map(|(v, _)| v.clone()).collect(),
        schemes: exp.schemes.clone(),
        ..ExperimentResult::default()
    };
    for (&(p, d), outcome) in tasks.iter().zip(outcomes) {
        let sv = &points[p].0;
        match outcome {
            Ok(schemes) => {
                for s in schemes {
                    let r = &s.report;
                    for ue in 0..r.ul_throughput_bps.len() {
                        result.ues.push(UeRecord {
                            scheme: s.scheme,
                            sweep_param: sweep_name.to_string(),
                            sweep_value: sv.clone(),
                            drop: d,
                            ue,
                            ul_tput_bps: r.ul_throughput_bps[ue],
                            dl_tput_bps: r.dl_throughput_bps[ue],
                        });
                    }
                    result.drops.push(DropRecord {
                        scheme: s.scheme,
                        sweep_value: sv.clone(),
                        drop: d,
                        fitness: s.solver.fitness,
                        iterations: s.solver.iterations,
                        solver_time_s: s.solver.elapsed_s,
                    });
                }
            }
            Err(e) => result.failures.push(DropFailure {
                sweep_value: sv.clone(),
                drop: d,
                error: e.to_string(),
            }),
        }
    }
    Ok(result)
}
