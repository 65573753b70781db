//! Experiment inputs: radio parameters, random network layout and toroidal
//! geometry.
//!
//! Positions are kept in kilometres because the path-loss law consumes
//! kilometres directly. Every drop draws from its own seeded generator, split
//! into independent streams (see [`Stream`]) so that changing the pilot
//! assignment scheme never perturbs the channel realisation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the deployment square, in km.
pub type Coord = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid radio parameter `{field}`: {reason}")]
    InvalidRadio { field: &'static str, reason: String },
    #[error("coordinate {0:?} lies outside the deployment square")]
    OutOfArea(Coord),
}

/// Link-budget and frame parameters. Defaults reproduce the reference
/// simulation table; carrier frequency and shadowing spread follow the
/// three-slope model's usual values since the table leaves them open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub carrier_freq_mhz: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
    pub d0_m: f64,
    pub d1_m: f64,
    pub shadow_std_db: f64,
    /// Receiver noise figure in dB.
    pub noise_figure: f64,
    pub noise_temp_k: f64,
    pub pilot_power_mw: f64,
    pub ul_power_mw: f64,
    pub dl_power_mw: f64,
    pub coherence_samples: usize,
    pub num_pilots: usize,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            carrier_freq_mhz: 1900.0,
            ap_height_m: 15.0,
            ue_height_m: 1.65,
            d0_m: 10.0,
            d1_m: 50.0,
            shadow_std_db: 8.0,
            noise_figure: 9.0,
            noise_temp_k: 290.0,
            pilot_power_mw: 100.0,
            ul_power_mw: 100.0,
            dl_power_mw: 200.0,
            coherence_samples: 200,
            num_pilots: 10,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_freq_mhz", self.carrier_freq_mhz),
            ("ap_height_m", self.ap_height_m),
            ("ue_height_m", self.ue_height_m),
            ("d0_m", self.d0_m),
            ("d1_m", self.d1_m),
            ("noise_temp_k", self.noise_temp_k),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::InvalidRadio {
                    field,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        // Powers, shadowing spread and noise figure may be zero (degenerate
        // but well defined), never negative.
        let non_negative = [
            ("shadow_std_db", self.shadow_std_db),
            ("noise_figure", self.noise_figure),
            ("pilot_power_mw", self.pilot_power_mw),
            ("ul_power_mw", self.ul_power_mw),
            ("dl_power_mw", self.dl_power_mw),
        ];
        for (field, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScenarioError::InvalidRadio {
                    field,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if self.d0_m >= self.d1_m {
            return Err(ScenarioError::InvalidRadio {
                field: "d0_m",
                reason: format!("d0 ({}) must be below d1 ({})", self.d0_m, self.d1_m),
            });
        }
        if self.num_pilots == 0 {
            return Err(ScenarioError::InvalidRadio {
                field: "num_pilots",
                reason: "at least one pilot is required".into(),
            });
        }
        if self.num_pilots > self.coherence_samples {
            return Err(ScenarioError::InvalidRadio {
                field: "num_pilots",
                reason: format!(
                    "{} pilots do not fit a coherence block of {} samples",
                    self.num_pilots, self.coherence_samples
                ),
            });
        }
        Ok(())
    }
}

/// Node placement over a square torus of side `area_km`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area_km: f64,
    pub ap_positions: Vec<Coord>,
    pub ue_positions: Vec<Coord>,
    pub antennas_per_ap: usize,
}

impl Topology {
    /// Builds a topology from explicit positions, checking every invariant.
    pub fn new(
        area_km: f64,
        ap_positions: Vec<Coord>,
        ue_positions: Vec<Coord>,
        antennas_per_ap: usize,
    ) -> Result<Self, ScenarioError> {
        if !(area_km.is_finite() && area_km > 0.0) {
            return Err(ScenarioError::InvalidDimension(format!(
                "area must be positive, got {area_km}"
            )));
        }
        if ap_positions.is_empty() || ue_positions.is_empty() {
            return Err(ScenarioError::InvalidDimension(
                "need at least one AP and one UE".into(),
            ));
        }
        if antennas_per_ap == 0 {
            return Err(ScenarioError::InvalidDimension(
                "antennas per AP must be at least 1".into(),
            ));
        }
        for p in ap_positions.iter().chain(&ue_positions) {
            if !p.iter().all(|&x| (0.0..area_km).contains(&x)) {
                return Err(ScenarioError::OutOfArea(*p));
            }
        }
        Ok(Self {
            area_km,
            ap_positions,
            ue_positions,
            antennas_per_ap,
        })
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// Wraparound distance between AP `m` and UE `k`, in km.
    pub fn ap_ue_distance(&self, m: usize, k: usize) -> f64 {
        wrap_distance(self.ap_positions[m], self.ue_positions[k], self.area_km)
    }
}

/// The immutable input of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub radio: RadioParams,
    pub topology: Topology,
    pub seed: u64,
}

/// Draws `num_aps` APs and `num_ues` UEs i.i.d. uniformly over the square.
pub fn generate_topology<R: Rng + ?Sized>(
    num_aps: usize,
    num_ues: usize,
    antennas_per_ap: usize,
    area_km: f64,
    rng: &mut R,
) -> Result<Topology, ScenarioError> {
    if num_aps == 0 || num_ues == 0 {
        return Err(ScenarioError::InvalidDimension(format!(
            "M and K must be at least 1 (got M={num_aps}, K={num_ues})"
        )));
    }
    if !(area_km.is_finite() && area_km > 0.0) {
        return Err(ScenarioError::InvalidDimension(format!(
            "area must be positive, got {area_km}"
        )));
    }
    let mut draw = |n: usize| -> Vec<Coord> {
        (0..n)
            .map(|_| [rng.random_range(0.0..area_km), rng.random_range(0.0..area_km)])
            .collect()
    };
    let ap_positions = draw(num_aps);
    let ue_positions = draw(num_ues);
    Topology::new(area_km, ap_positions, ue_positions, antennas_per_ap)
}

/// Shortest Euclidean distance between `a` and the nine periodic images of
/// `b` on a torus of side `area_km`.
pub fn wrap_distance(a: Coord, b: Coord, area_km: f64) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-area_km, 0.0, area_km] {
        for sy in [-area_km, 0.0, area_km] {
            let dx = a[0] - (b[0] + sx);
            let dy = a[1] - (b[1] + sy);
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Signed shortest displacement `a - b` along one periodic axis.
pub(crate) fn wrap_delta(a: f64, b: f64, period: f64) -> f64 {
    let d = a - b;
    d - period * (d / period).round()
}

/// Independent random streams derived from one (seed, drop) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Shadowing,
    LocationError,
    /// Solver randomness, keyed by a stable per-scheme identifier.
    Solver(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Shadowing => 2,
            Stream::LocationError => 3,
            Stream::Solver(s) => 0x100 + s,
        }
    }
}

/// Returns the generator for `stream` of drop `drop` under master `seed`.
pub fn drop_rng(seed: u64, drop: u64, stream: Stream) -> ChaCha8Rng {
    // splitmix64 finaliser decorrelates adjacent (seed, drop) pairs
    let mut z = seed ^ drop.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(stream.id());
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_across_x_edge() {
        let d = wrap_distance([0.05, 0.5], [0.95, 0.5], 1.0);
        assert!((d - 0.10).abs() < 1e-12);
    }

    #[test]
    fn wrap_identity_is_zero() {
        assert_eq!(wrap_distance([0.3, 0.7], [0.3, 0.7], 1.0), 0.0);
    }

    #[test]
    fn wrap_diagonal_matches_shift_enumeration() {
        // All nine images of (0.5, 0.5) sit at distance sqrt(0.5) from the
        // origin or further.
        let d = wrap_distance([0.0, 0.0], [0.5, 0.5], 1.0);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn minimal_topology() {
        let mut rng = drop_rng(7, 0, Stream::Placement);
        let t = generate_topology(1, 1, 1, 1.0, &mut rng).unwrap();
        assert_eq!(t.num_aps(), 1);
        assert_eq!(t.num_ues(), 1);
        for p in t.ap_positions.iter().chain(&t.ue_positions) {
            assert!(p.iter().all(|&x| (0.0..1.0).contains(&x)));
        }
    }

    #[test]
    fn reference_small_layout() {
        let mut rng = drop_rng(11, 3, Stream::Placement);
        let t = generate_topology(50, 12, 1, 1.0, &mut rng).unwrap();
        assert_eq!(t.ap_positions.len(), 50);
        assert_eq!(t.ue_positions.len(), 12);
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = drop_rng(0, 0, Stream::Placement);
        assert!(matches!(
            generate_topology(0, 3, 1, 1.0, &mut rng),
            Err(ScenarioError::InvalidDimension(_))
        ));
        assert!(generate_topology(3, 0, 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_topology() {
        let a = generate_topology(20, 8, 2, 1.0, &mut drop_rng(5, 9, Stream::Placement)).unwrap();
        let b = generate_topology(20, 8, 2, 1.0, &mut drop_rng(5, 9, Stream::Placement)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = drop_rng(5, 9, Stream::Placement);
        let mut b = drop_rng(5, 9, Stream::Shadowing);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }

    #[test]
    fn default_radio_is_valid() {
        RadioParams::default().validate().unwrap();
    }

    #[test]
    fn radio_rejects_bad_thresholds() {
        let r = RadioParams {
            d0_m: 60.0,
            ..RadioParams::default()
        };
        assert!(r.validate().is_err());
        let r = RadioParams {
            num_pilots: 201,
            ..RadioParams::default()
        };
        assert!(r.validate().is_err());
        let r = RadioParams {
            num_pilots: 0,
            ..RadioParams::default()
        };
        assert!(r.validate().is_err());
    }

    #[test]
    fn wrap_delta_is_shortest() {
        assert!((wrap_delta(0.05, 0.95, 1.0) - 0.10).abs() < 1e-12);
        assert!((wrap_delta(0.95, 0.05, 1.0) + 0.10).abs() < 1e-12);
        assert!((wrap_delta(0.2, 0.5, 1.0) + 0.3).abs() < 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn coord() -> impl Strategy<Value = Coord> {
            (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| [x, y])
        }

        proptest! {
            #[test]
            fn wrap_distance_metric_properties(a in coord(), b in coord()) {
                let d = wrap_distance(a, b, 1.0);
                prop_assert!(d >= 0.0);
                prop_assert!(d <= 0.5f64.sqrt() + 1e-12);
                prop_assert!((d - wrap_distance(b, a, 1.0)).abs() < 1e-15);
                if a != b {
                    prop_assert!(d > 0.0);
                }
            }
        }
    }
}
