//! Ready-made experiments for each reported figure and table.

use super::config::{Config, Sweep, SweepParam, SweepValue};
use super::HarnessError;
use crate::solvers::{ExhaustiveObjective, Scheme};

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 8] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "table2"];

fn base(from: &Config, name: &str, m: usize, k: usize, tau: usize, l: usize) -> Config {
    let mut cfg = from.clone();
    cfg.experiment.name = name.to_string();
    cfg.experiment.sweep = None;
    cfg.topology.num_aps = m;
    cfg.topology.num_ues = k;
    cfg.radio.num_pilots = tau;
    cfg.topology.antennas_per_ap = l;
    cfg
}

fn sweep(param: SweepParam, values: &[f64]) -> Option<Sweep> {
    Some(Sweep {
        param,
        values: values.iter().map(|&v| SweepValue::Number(v)).collect(),
    })
}

/// The configs behind a named figure or table, on top of default settings.
/// Most presets are a single config; curves that differ in two parameters
/// come as one config each.
pub fn preset(name: &str) -> Result<Vec<Config>, HarnessError> {
    preset_with(name, &Config::default())
}

/// [`preset`] starting from `from`: the preset sets deployment size, pilot
/// count, sweep and (where the figure needs it) schemes; radio and solver
/// settings are kept.
pub fn preset_with(name: &str, from: &Config) -> Result<Vec<Config>, HarnessError> {
    let cfgs = match name {
        "fig1" => {
            let mut c = base(from, "fig1", 50, 12, 3, 1);
            c.experiment.schemes = Scheme::ALL.to_vec();
            c.solver.exhaustive.objective = ExhaustiveObjective::SumRate;
            vec![c]
        }
        "fig2" | "table2" => {
            let mut c = base(from, name, 200, 40, 10, 1);
            c.experiment.sweep = sweep(SweepParam::Antennas, &[1.0, 3.0]);
            vec![c]
        }
        "fig3" => [1, 3]
            .into_iter()
            .map(|l| {
                let mut c = base(from, &format!("fig3-l{l}"), 100, 40, 10, l);
                c.experiment.sweep = sweep(SweepParam::NumAps, &[100.0, 150.0, 200.0, 250.0, 300.0]);
                c
            })
            .collect(),
        "fig4" => {
            let mut c = base(from, "fig4", 100, 40, 10, 1);
            c.experiment.sweep = sweep(SweepParam::NumUes, &[20.0, 30.0, 40.0, 50.0, 60.0]);
            vec![c]
        }
        "fig5" => {
            let mut c = base(from, "fig5", 100, 50, 10, 1);
            c.experiment.sweep = sweep(SweepParam::NumPilots, &[5.0, 10.0, 15.0, 20.0, 30.0, 40.0]);
            vec![c]
        }
        "fig6" => {
            let mut c = base(from, "fig6", 120, 50, 10, 1);
            c.experiment.sweep = sweep(SweepParam::LocErrorM, &[0.0, 25.0, 50.0, 100.0, 200.0, 300.0]);
            vec![c]
        }
        "fig7" => {
            let mut c = base(from, "fig7", 100, 40, 10, 1);
            c.experiment.schemes = vec![Scheme::ImsEs, Scheme::ImsVs];
            c.experiment.sweep = Some(Sweep {
                param: SweepParam::FeatureSource,
                values: ["location", "lsf", "both"].into_iter().map(SweepValue::from).collect(),
            });
            vec![c]
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfgs)
}
