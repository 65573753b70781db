//! JSON experiment configuration and `key=value` overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::dcp::FeatureSource;
use crate::rates::{MaxMinParams, UlPowerPolicy};
use crate::scenario::RadioParams;
use crate::solvers::{Scheme, SolverConfig};

/// Deployment size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    /// Number of APs, `M`.
    pub num_aps: usize,
    /// Number of UEs, `K`.
    pub num_ues: usize,
    /// Antennas per AP, `L`.
    pub antennas_per_ap: usize,
    /// Side of the wrapped square, km.
    pub area_km: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            num_aps: 100,
            num_ues: 40,
            antennas_per_ap: 1,
            area_km: 1.0,
        }
    }
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "M")]
    NumAps,
    #[serde(rename = "K")]
    NumUes,
    #[serde(rename = "tau_p")]
    NumPilots,
    #[serde(rename = "L")]
    Antennas,
    #[serde(rename = "loc_error_m")]
    LocErrorM,
    #[serde(rename = "feature_source")]
    FeatureSource,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NumAps => "M",
            SweepParam::NumUes => "K",
            SweepParam::NumPilots => "tau_p",
            SweepParam::Antennas => "L",
            SweepParam::LocErrorM => "loc_error_m",
            SweepParam::FeatureSource => "feature_source",
        }
    }
}

/// One point of a sweep: a number, or a name for categorical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for SweepValue {
    fn from(x: f64) -> Self {
        SweepValue::Number(x)
    }
}

impl From<&str> for SweepValue {
    fn from(s: &str) -> Self {
        SweepValue::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<SweepValue>,
}

/// Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used in output file names.
    pub name: String,
    pub schemes: Vec<Scheme>,
    pub drops: usize,
    pub seed: u64,
    /// Replace wall-clock budgets with iteration budgets.
    pub deterministic: bool,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub sweep: Option<Sweep>,
    pub feature_source: FeatureSource,
    /// Standard deviation of the per-coordinate location error, metres.
    pub loc_error_m: f64,
    pub ul_power: UlPowerPolicy,
    pub maxmin: MaxMinParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".to_string(),
            schemes: vec![
                Scheme::Random,
                Scheme::Greedy,
                Scheme::Repulsive,
                Scheme::ImsEs,
                Scheme::ImsVs,
                Scheme::Ideal,
            ],
            drops: 100,
            seed: 1,
            deterministic: false,
            jobs: None,
            sweep: None,
            feature_source: FeatureSource::Location,
            loc_error_m: 0.0,
            ul_power: UlPowerPolicy::MaxMin,
            maxmin: MaxMinParams::default(),
        }
    }
}

/// Complete input of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub radio: RadioParams,
    pub topology: TopologyConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks everything that can be checked before any drop runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.radio.validate()?;
        let t = &self.topology;
        if t.num_aps == 0 || t.num_ues == 0 || t.antennas_per_ap == 0 {
            return Err(HarnessError::Config("M, K and L must be at least 1".into()));
        }
        if !(t.area_km.is_finite() && t.area_km > 0.0) {
            return Err(HarnessError::Config("topology.area_km must be positive".into()));
        }
        let e = &self.experiment;
        if e.drops == 0 {
            return Err(HarnessError::Config("experiment.drops must be at least 1".into()));
        }
        if e.schemes.is_empty() {
            return Err(HarnessError::Config("experiment.schemes is empty".into()));
        }
        if !(e.loc_error_m.is_finite() && e.loc_error_m >= 0.0) {
            return Err(HarnessError::Config(
                "experiment.loc_error_m must be non-negative".into(),
            ));
        }
        if e.jobs == Some(0) {
            return Err(HarnessError::Config("experiment.jobs must be at least 1".into()));
        }
        self.solver
            .ims
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(sweep) = &e.sweep {
            if sweep.values.is_empty() {
                return Err(HarnessError::Config("sweep has no values".into()));
            }
            for v in &sweep.values {
                self.at(sweep.param, v)?.validate()?;
            }
        }
        Ok(())
    }

    /// Copy of this config with `param` set to `value`.
    pub fn at(&self, param: SweepParam, value: &SweepValue) -> Result<Config, HarnessError> {
        let mut cfg = self.clone();
        cfg.experiment.sweep = None;
        let count = |v: &SweepValue| -> Result<usize, HarnessError> {
            match v {
                SweepValue::Number(x) if *x >= 1.0 && x.fract() == 0.0 => Ok(*x as usize),
                other => Err(HarnessError::Config(format!(
                    "sweep over {} needs positive integers, got `{other}`",
                    param.name()
                ))),
            }
        };
        match param {
            SweepParam::NumAps => cfg.topology.num_aps = count(value)?,
            SweepParam::NumUes => cfg.topology.num_ues = count(value)?,
            SweepParam::NumPilots => cfg.radio.num_pilots = count(value)?,
            SweepParam::Antennas => cfg.topology.antennas_per_ap = count(value)?,
            SweepParam::LocErrorM => match value {
                SweepValue::Number(x) if *x >= 0.0 => cfg.experiment.loc_error_m = *x,
                other => {
                    return Err(HarnessError::Config(format!(
                        "location error must be a non-negative number, got `{other}`"
                    )))
                }
            },
            SweepParam::FeatureSource => match value {
                SweepValue::Text(s) => cfg.experiment.feature_source = s.parse().map_err(HarnessError::Config)?,
                other => {
                    return Err(HarnessError::Config(format!(
                        "feature source must be a name, got `{other}`"
                    )))
                }
            },
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override. Keys are dotted paths such as
    /// `radio.num_pilots` or `solver.ims.alpha`; a bare key is accepted
    /// when exactly one section has a field of that name. Values are parsed
    /// as JSON, falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<(), HarnessError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut tree = serde_json::to_value(&*self).expect("config serialises");
        let path = resolve_key(&tree, key)?;
        let mut node = &mut tree;
        for part in &path {
            node = node
                .get_mut(part.as_str())
                .ok_or_else(|| HarnessError::Config(format!("unknown config key `{key}`")))?;
        }
        *node = value;
        let cfg: Config =
            serde_json::from_value(tree).map_err(|e| HarnessError::Config(format!("override `{assignment}`: {e}")))?;
        *self = cfg;
        Ok(())
    }
}

fn resolve_key(tree: &Value, key: &str) -> Result<Vec<String>, HarnessError> {
    let parts: Vec<String> = key.split('.').map(str::to_string).collect();
    let exists = |path: &[String]| {
        let mut node = tree;
        for p in path {
            match node.get(p.as_str()) {
                Some(n) => node = n,
                None => return false,
            }
        }
        true
    };
    if exists(&parts) {
        return Ok(parts);
    }
    if parts.len() == 1 {
        let hits: Vec<Vec<String>> = ["radio", "topology", "solver", "experiment"]
            .iter()
            .map(|s| vec![s.to_string(), key.to_string()])
            .filter(|p| exists(p))
            .collect();
        match hits.len() {
            1 => return Ok(hits.into_iter().next().expect("one hit")),
            n if n > 1 => {
                return Err(HarnessError::Config(format!(
                    "ambiguous config key `{key}`; qualify it with a section"
                )))
            }
            _ => {}
        }
    }
    Err(HarnessError::Config(format!("unknown config key `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = Config::default();
        let back = Config::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = Config::from_json_str(r#"{"radio": {"num_pilots": 3}, "topology": {"num_aps": 50}}"#).unwrap();
        assert_eq!(cfg.radio.num_pilots, 3);
        assert_eq!(cfg.topology.num_aps, 50);
        assert_eq!(cfg.radio.bandwidth_hz, 20e6);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(Config::from_json_str(r#"{"radio": {"nosie_figure": 9}}"#).is_err());
        assert!(Config::from_json_str(r#"{"extra": {}}"#).is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = Config::default();
        cfg.set("radio.num_pilots=5").unwrap();
        cfg.set("shadow_std_db=4").unwrap();
        cfg.set("solver.ims.alpha=7").unwrap();
        cfg.set("experiment.schemes=[\"random\",\"ims-vs\"]").unwrap();
        cfg.set("feature_source=lsf").unwrap();
        cfg.set("solver.ims.eta_w2=12").unwrap();
        assert_eq!(cfg.radio.num_pilots, 5);
        assert_eq!(cfg.radio.shadow_std_db, 4.0);
        assert_eq!(cfg.solver.ims.alpha, 7);
        assert_eq!(cfg.solver.ims.eta_w2, Some(12));
        assert_eq!(cfg.experiment.schemes, vec![Scheme::Random, Scheme::ImsVs]);
        assert_eq!(cfg.experiment.feature_source, FeatureSource::Lsf);
        assert!(cfg.set("radio.bogus=1").is_err());
        assert!(cfg.set("num_pilots").is_err());
        assert!(cfg.set("radio.num_pilots=abc").is_err());
    }

    #[test]
    fn sweep_points() {
        let cfg = Config::default();
        assert_eq!(
            cfg.at(SweepParam::NumPilots, &20.0.into()).unwrap().radio.num_pilots,
            20
        );
        assert_eq!(
            cfg.at(SweepParam::Antennas, &3.0.into())
                .unwrap()
                .topology
                .antennas_per_ap,
            3
        );
        assert_eq!(
            cfg.at(SweepParam::FeatureSource, &"both".into())
                .unwrap()
                .experiment
                .feature_source,
            FeatureSource::Both
        );
        assert!(cfg.at(SweepParam::NumUes, &2.5.into()).is_err());
        assert!(cfg.at(SweepParam::LocErrorM, &"x".into()).is_err());
    }

    #[test]
    fn sweep_parses_from_json() {
        let cfg =
            Config::from_json_str(r#"{"experiment": {"sweep": {"param": "tau_p", "values": [5, 10, 15]}}}"#).unwrap();
        let sweep = cfg.experiment.sweep.unwrap();
        assert_eq!(sweep.param, SweepParam::NumPilots);
        assert_eq!(sweep.values[1].to_string(), "10");
    }
}
