//! Closed-form uplink/downlink achievable rates, power control and throughput
//! accounting.
//!
//! All SNRs are normalised by the receiver noise power: `rho = P_mW / P_n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{EstimationStats, LargeScale};
use crate::scenario::RadioParams;

/// Boltzmann constant as tabulated in the reference setup, J/K.
pub const BOLTZMANN: f64 = 1.381e-23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("max-min bisection did not converge after {iterations} iterations (interval {interval:e})")]
    NonConvergence { iterations: usize, interval: f64 },
}

/// `B * k_B * T0 * W` with `W` the linear noise figure, in mW.
pub fn noise_power_mw(radio: &RadioParams) -> f64 {
    let w = 10f64.powf(radio.noise_figure / 10.0);
    radio.bandwidth_hz * BOLTZMANN * radio.noise_temp_k * w * 1e3
}

/// Transmit powers divided by the noise power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedSnr {
    pub pilot: f64,
    pub ul: f64,
    pub dl: f64,
}

impl NormalizedSnr {
    pub fn from_radio(radio: &RadioParams) -> Self {
        let pn = noise_power_mw(radio);
        Self {
            pilot: radio.pilot_power_mw / pn,
            ul: radio.ul_power_mw / pn,
            dl: radio.dl_power_mw / pn,
        }
    }
}

/// Uplink SINR in linear-fractional form:
/// `SINR_k(eta) = gain_k eta_k / (sum_j interference[k, j] eta_j + noise_k)`.
///
/// `interference[k, k]` carries the beamforming-uncertainty term; off-diagonal
/// entries hold the non-coherent leakage plus, for co-pilot pairs, the
/// coherent contamination term.
#[derive(Debug, Clone, PartialEq)]
pub struct UlSinrTerms {
    pub gain: DVector<f64>,
    pub interference: DMatrix<f64>,
    pub noise: DVector<f64>,
}

fn check_dims(ls: &LargeScale, stats: &EstimationStats, pilots: &[usize]) -> Result<(), RateError> {
    if ls.beta.shape() != stats.gamma.shape() {
        return Err(RateError::DimensionMismatch(format!(
            "beta {:?} vs gamma {:?}",
            ls.beta.shape(),
            stats.gamma.shape()
        )));
    }
    if pilots.len() != ls.num_ues() {
        return Err(RateError::DimensionMismatch(format!(
            "{} pilot labels for {} UEs",
            pilots.len(),
            ls.num_ues()
        )));
    }
    Ok(())
}

impl UlSinrTerms {
    pub fn new(
        ls: &LargeScale,
        stats: &EstimationStats,
        pilots: &[usize],
        radio: &RadioParams,
        antennas: usize,
    ) -> Result<Self, RateError> {
        check_dims(ls, stats, pilots)?;
        let (m, k) = ls.beta.shape();
        let rho = NormalizedSnr::from_radio(radio).ul;
        let l = antennas as f64;
        let beta = &ls.beta;
        let gamma = &stats.gamma;

        let gamma_sum: Vec<f64> = (0..k).map(|u| gamma.column(u).sum()).collect();
        let gain = DVector::from_fn(k, |u, _| l * l * rho * gamma_sum[u] * gamma_sum[u]);
        let noise = DVector::from_fn(k, |u, _| l * gamma_sum[u]);
        let interference = DMatrix::from_fn(k, k, |u, j| {
            let mut leak = 0.0;
            let mut coherent = 0.0;
            for a in 0..m {
                leak += gamma[(a, u)] * beta[(a, j)];
                coherent += gamma[(a, u)] * beta[(a, j)] / beta[(a, u)];
            }
            let mut v = l * rho * leak;
            if j != u && pilots[j] == pilots[u] {
                v += l * l * rho * coherent * coherent;
            }
            v
        });
        Ok(Self {
            gain,
            interference,
            noise,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.gain.len()
    }

    pub fn sinr(&self, eta: &[f64]) -> Vec<f64> {
        let eta_v = DVector::from_column_slice(eta);
        let denom = &self.interference * &eta_v + &self.noise;
        (0..self.num_ues()).map(|u| self.gain[u] * eta[u] / denom[u]).collect()
    }
}

/// Uplink rates in bit/s/Hz for per-UE power coefficients `ul_eta`.
pub fn ul_rate(
    ls: &LargeScale,
    stats: &EstimationStats,
    pilots: &[usize],
    ul_eta: &[f64],
    radio: &RadioParams,
    antennas: usize,
) -> Result<Vec<f64>, RateError> {
    if ul_eta.len() != ls.num_ues() {
        return Err(RateError::DimensionMismatch(format!(
            "{} power coefficients for {} UEs",
            ul_eta.len(),
            ls.num_ues()
        )));
    }
    let terms = UlSinrTerms::new(ls, stats, pilots, radio, antennas)?;
    Ok(terms.sinr(ul_eta).into_iter().map(|s| (1.0 + s).log2()).collect())
}

/// Closed-form powers of the uplink signal components of every UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlTermPowers {
    pub desired: f64,
    pub beamforming_uncertainty: f64,
    pub interference: f64,
    pub noise: f64,
}

/// Splits the uplink SINR denominator into its components; the Monte-Carlo
/// decomposition estimates the same quantities.
pub fn ul_term_powers(terms: &UlSinrTerms, eta: &[f64]) -> Vec<UlTermPowers> {
    (0..terms.num_ues())
        .map(|u| {
            let interference = (0..terms.num_ues())
                .filter(|&j| j != u)
                .map(|j| terms.interference[(u, j)] * eta[j])
                .sum();
            UlTermPowers {
                desired: terms.gain[u] * eta[u],
                beamforming_uncertainty: terms.interference[(u, u)] * eta[u],
                interference,
                noise: terms.noise[u],
            }
        })
        .collect()
}

/// Downlink rates in bit/s/Hz for per-(AP, UE) power coefficients `dl_eta`.
pub fn dl_rate(
    ls: &LargeScale,
    stats: &EstimationStats,
    pilots: &[usize],
    dl_eta: &DMatrix<f64>,
    radio: &RadioParams,
    antennas: usize,
) -> Result<Vec<f64>, RateError> {
    check_dims(ls, stats, pilots)?;
    if dl_eta.shape() != ls.beta.shape() {
        return Err(RateError::DimensionMismatch(format!(
            "dl power {:?} vs beta {:?}",
            dl_eta.shape(),
            ls.beta.shape()
        )));
    }
    let (m, k) = ls.beta.shape();
    let rho = NormalizedSnr::from_radio(radio).dl;
    let l = antennas as f64;
    let beta = &ls.beta;
    let gamma = &stats.gamma;
    let sqrt_eta = dl_eta.map(f64::sqrt);

    let rates = (0..k)
        .map(|u| {
            let coherent: f64 = (0..m).map(|a| sqrt_eta[(a, u)] * gamma[(a, u)]).sum();
            let mut contamination = 0.0;
            let mut leak = 0.0;
            for j in 0..k {
                if j != u && pilots[j] == pilots[u] {
                    let s: f64 = (0..m)
                        .map(|a| sqrt_eta[(a, j)] * gamma[(a, j)] * beta[(a, u)] / beta[(a, j)])
                        .sum();
                    contamination += s * s;
                }
                leak += (0..m)
                    .map(|a| dl_eta[(a, j)] * gamma[(a, j)] * beta[(a, u)])
                    .sum::<f64>();
            }
            let sinr = l * l * rho * coherent * coherent / (l * l * rho * contamination + l * rho * leak + 1.0);
            (1.0 + sinr).log2()
        })
        .collect();
    Ok(rates)
}

/// Equal-fraction downlink allocation: every AP spends its whole power budget,
/// `eta_mk = 1 / sum_k gamma_mk`.
pub fn dl_power_alloc(stats: &EstimationStats) -> DMatrix<f64> {
    let (m, k) = stats.gamma.shape();
    let inv: Vec<f64> = (0..m).map(|a| 1.0 / stats.gamma.row(a).sum()).collect();
    DMatrix::from_fn(m, k, |a, _| inv[a])
}

/// Net per-user throughput in bit/s; the pilot overhead and the UL/DL time
/// split are both charged.
pub fn throughput(rate_bpshz: f64, radio: &RadioParams) -> f64 {
    let tau_p = radio.num_pilots as f64;
    let tau_c = radio.coherence_samples as f64;
    radio.bandwidth_hz * (1.0 - tau_p / tau_c) / 2.0 * rate_bpshz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxMinParams {
    /// Bisection stops once the SINR-target bracket is narrower than this
    /// fraction of its initial upper end.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for MaxMinParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 64,
        }
    }
}

/// Smallest power vector reaching SINR `target` for every UE, if it fits
/// under full power.
///
/// The SINR constraints at a fixed target are linear in `eta`. With a
/// non-negative interference matrix the minimal solution solves them with
/// equality, and a strictly positive solution exists exactly when the
/// target is achievable.
fn min_power_for_target(terms: &UlSinrTerms, target: f64) -> Option<DVector<f64>> {
    let k = terms.num_ues();
    let a = DMatrix::from_fn(k, k, |u, j| {
        let diag = if u == j { terms.gain[u] } else { 0.0 };
        diag - target * terms.interference[(u, j)]
    });
    let rhs = &terms.noise * target;
    let eta = a.lu().solve(&rhs)?;
    let ok = eta.iter().all(|&x| x.is_finite() && x > 0.0) && eta.max() <= 1.0;
    ok.then_some(eta)
}

/// Uplink max-min power control by bisection on the common SINR target.
///
/// The returned coefficients equalise every UE's SINR and are scaled so the
/// strongest user transmits at full power.
pub fn maxmin_ul_power(terms: &UlSinrTerms, params: &MaxMinParams) -> Result<Vec<f64>, RateError> {
    let k = terms.num_ues();
    // full power with no interference bounds every achievable target
    let hi0 = (0..k)
        .map(|u| terms.gain[u] / terms.noise[u])
        .fold(f64::INFINITY, f64::min);
    if !(hi0 > 0.0 && hi0.is_finite()) {
        return Ok(vec![1.0; k]);
    }
    let (mut lo, mut hi) = (0.0, hi0);
    let mut best: Option<DVector<f64>> = None;
    let mut iterations = 0;
    while hi - lo > params.rel_tol * hi0 {
        if iterations == params.max_iter {
            return Err(RateError::NonConvergence {
                iterations,
                interval: hi - lo,
            });
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match min_power_for_target(terms, mid) {
            Some(eta) => {
                lo = mid;
                best = Some(eta);
            }
            None => hi = mid,
        }
    }
    let eta = match best {
        Some(e) => e,
        None => min_power_for_target(terms, lo.max(hi0 * params.rel_tol)).ok_or(RateError::NonConvergence {
            iterations,
            interval: hi - lo,
        })?,
    };
    let peak = eta.max();
    Ok(eta.iter().map(|x| (x / peak).min(1.0)).collect())
}

/// Power coefficients for both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControl {
    pub ul_eta: Vec<f64>,
    pub dl_eta: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub ul_rate_bpshz: Vec<f64>,
    pub dl_rate_bpshz: Vec<f64>,
    pub ul_throughput_bps: Vec<f64>,
    pub dl_throughput_bps: Vec<f64>,
}

impl RateReport {
    pub fn new(ul_rate_bpshz: Vec<f64>, dl_rate_bpshz: Vec<f64>, radio: &RadioParams) -> Self {
        let ul_throughput_bps = ul_rate_bpshz.iter().map(|&r| throughput(r, radio)).collect();
        let dl_throughput_bps = dl_rate_bpshz.iter().map(|&r| throughput(r, radio)).collect();
        Self {
            ul_rate_bpshz,
            dl_rate_bpshz,
            ul_throughput_bps,
            dl_throughput_bps,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UlPowerPolicy {
    #[default]
    MaxMin,
    Full,
}

/// Rates and throughputs of one pilot assignment under the given policy.
pub fn evaluate(
    ls: &LargeScale,
    stats: &EstimationStats,
    pilots: &[usize],
    radio: &RadioParams,
    antennas: usize,
    policy: UlPowerPolicy,
    maxmin: &MaxMinParams,
) -> Result<(RateReport, PowerControl), RateError> {
    let terms = UlSinrTerms::new(ls, stats, pilots, radio, antennas)?;
    let ul_eta = match policy {
        UlPowerPolicy::MaxMin => maxmin_ul_power(&terms, maxmin)?,
        UlPowerPolicy::Full => vec![1.0; terms.num_ues()],
    };
    let ul: Vec<f64> = terms.sinr(&ul_eta).into_iter().map(|s| (1.0 + s).log2()).collect();
    let dl_eta = dl_power_alloc(stats);
    let dl = dl_rate(ls, stats, pilots, &dl_eta, radio, antennas)?;
    Ok((RateReport::new(ul, dl, radio), PowerControl { ul_eta, dl_eta }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::estimation_stats;

    fn radio() -> RadioParams {
        RadioParams::default()
    }

    #[test]
    fn noise_power_reference() {
        // 20e6 * 1.381e-23 * 290 * 10^0.9 W = 6.3621e-13 W
        let pn = noise_power_mw(&radio());
        assert!((pn / 6.3621e-10 - 1.0).abs() < 1e-4, "{pn:e}");
        let dbm = 10.0 * pn.log10();
        assert!((dbm + 91.964).abs() < 1e-2, "{dbm}");
    }

    #[test]
    fn noise_power_linear_in_bandwidth() {
        let r = radio();
        let r2 = RadioParams {
            bandwidth_hz: 2.0 * r.bandwidth_hz,
            ..r.clone()
        };
        assert!((noise_power_mw(&r2) / noise_power_mw(&r) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_noise_figure_is_thermal_floor() {
        let r = RadioParams {
            noise_figure: 0.0,
            ..radio()
        };
        let floor = BOLTZMANN * r.noise_temp_k * r.bandwidth_hz * 1e3;
        assert!((noise_power_mw(&r) - floor).abs() <= 1e-15 * floor);
    }

    #[test]
    fn throughput_accounting() {
        let r = radio();
        assert!((throughput(1.0, &r) - 9.5e6).abs() < 1e-6);
        assert_eq!(throughput(0.0, &r), 0.0);
        let full = RadioParams { num_pilots: 200, ..r };
        assert_eq!(throughput(3.0, &full), 0.0);
    }

    #[test]
    fn single_ue_uplink_reduction() {
        let r = radio();
        let beta = [2e-10, 5e-11, 1e-12];
        let ls = LargeScale::from_beta(DMatrix::from_column_slice(3, 1, &beta));
        let st = estimation_stats(&ls, &[0], &r).unwrap();
        let rho = NormalizedSnr::from_radio(&r).ul;
        for l in [1usize, 2, 4] {
            let rate = ul_rate(&ls, &st, &[0], &[1.0], &r, l).unwrap()[0];
            let lf = l as f64;
            let g: Vec<f64> = (0..3).map(|a| st.gamma[(a, 0)]).collect();
            let sg: f64 = g.iter().sum();
            let sgb: f64 = g.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let expected = (1.0 + lf * rho * sg * sg / (rho * sgb + sg)).log2();
            assert!((rate - expected).abs() < 1e-12, "L={l}: {rate} vs {expected}");
        }
    }

    #[test]
    fn single_link_downlink_reduction() {
        let r = radio();
        let beta = 4e-11;
        let ls = LargeScale::from_beta(DMatrix::from_element(1, 1, beta));
        let st = estimation_stats(&ls, &[0], &r).unwrap();
        let gamma = st.gamma[(0, 0)];
        let eta = DMatrix::from_element(1, 1, 1.0 / gamma);
        let rate = dl_rate(&ls, &st, &[0], &eta, &r, 1).unwrap()[0];
        let rho = NormalizedSnr::from_radio(&r).dl;
        let expected = (1.0 + rho * gamma / (rho * beta + 1.0)).log2();
        assert!((rate - expected).abs() < 1e-12);
    }

    #[test]
    fn dl_allocation_saturates_every_ap() {
        let beta = DMatrix::from_row_slice(
            3,
            4,
            &[
                1e-10, 2e-11, 3e-12, 9e-11, 4e-11, 5e-11, 1e-13, 2e-10, 7e-12, 3e-11, 6e-11, 8e-12,
            ],
        );
        let ls = LargeScale::from_beta(beta);
        let st = estimation_stats(&ls, &[0, 1, 0, 2], &radio()).unwrap();
        let eta = dl_power_alloc(&st);
        for a in 0..3 {
            let used: f64 = (0..4).map(|u| eta[(a, u)] * st.gamma[(a, u)]).sum();
            assert!((used - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dl_allocation_single_ue_and_equal_gamma() {
        let st = EstimationStats {
            c: DMatrix::zeros(2, 1),
            gamma: DMatrix::from_column_slice(2, 1, &[3.0, 0.5]),
        };
        let eta = dl_power_alloc(&st);
        assert_eq!(eta[(0, 0)], 1.0 / 3.0);
        assert_eq!(eta[(1, 0)], 2.0);
        let st = EstimationStats {
            c: DMatrix::zeros(2, 4),
            gamma: DMatrix::from_element(2, 4, 0.25),
        };
        let eta = dl_power_alloc(&st);
        assert!(eta.iter().all(|&e| (e - 1.0 / (4.0 * 0.25)).abs() < 1e-15));
    }

    #[test]
    fn maxmin_single_ue_uses_full_power() {
        let r = radio();
        let ls = LargeScale::from_beta(DMatrix::from_column_slice(2, 1, &[1e-10, 3e-11]));
        let st = estimation_stats(&ls, &[0], &r).unwrap();
        let terms = UlSinrTerms::new(&ls, &st, &[0], &r, 1).unwrap();
        assert_eq!(maxmin_ul_power(&terms, &MaxMinParams::default()).unwrap(), vec![1.0]);
    }

    #[test]
    fn maxmin_symmetric_pair() {
        // mirror-image geometry: UE 0 sees (b1, b2) what UE 1 sees (b2, b1)
        let r = radio();
        let ls = LargeScale::from_beta(DMatrix::from_row_slice(2, 2, &[1e-10, 2e-12, 2e-12, 1e-10]));
        for pilots in [[0, 0], [0, 1]] {
            let st = estimation_stats(&ls, &pilots, &r).unwrap();
            let terms = UlSinrTerms::new(&ls, &st, &pilots, &r, 1).unwrap();
            let eta = maxmin_ul_power(&terms, &MaxMinParams::default()).unwrap();
            assert!((eta[0] - eta[1]).abs() < 1e-9);
            let s = terms.sinr(&eta);
            assert!((s[0] / s[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn maxmin_beats_full_power_and_matches_grid() {
        let r = radio();
        let ls = LargeScale::from_beta(DMatrix::from_row_slice(
            3,
            2,
            &[3e-10, 1e-11, 4e-11, 2e-12, 1e-12, 6e-11],
        ));
        let pilots = [0, 0];
        let st = estimation_stats(&ls, &pilots, &r).unwrap();
        let terms = UlSinrTerms::new(&ls, &st, &pilots, &r, 1).unwrap();
        let eta = maxmin_ul_power(&terms, &MaxMinParams::default()).unwrap();
        let s = terms.sinr(&eta);
        assert!((s[0] / s[1] - 1.0).abs() < 1e-6);
        assert!(eta.contains(&1.0));
        let full = terms.sinr(&[1.0, 1.0]);
        let min_full = full[0].min(full[1]);
        assert!(s[0].min(s[1]) >= min_full * (1.0 - 1e-12));
        // brute-force grid over the unit square
        let mut grid_best = 0.0f64;
        let n = 2000;
        for i in 0..=n {
            for e in [[i as f64 / n as f64, 1.0], [1.0, i as f64 / n as f64]] {
                let g = terms.sinr(&e);
                grid_best = grid_best.max(g[0].min(g[1]));
            }
        }
        let ours = s[0].min(s[1]);
        assert!(ours >= grid_best * (1.0 - 1e-9));
        assert!(ours <= grid_best * (1.0 + 1e-2));
    }

    #[test]
    fn dimension_mismatch_reported() {
        let r = radio();
        let ls = LargeScale::from_beta(DMatrix::from_element(2, 2, 1e-10));
        let st = estimation_stats(&ls, &[0, 1], &r).unwrap();
        assert!(matches!(
            ul_rate(&ls, &st, &[0, 1], &[1.0], &r, 1),
            Err(RateError::DimensionMismatch(_))
        ));
        assert!(matches!(
            dl_rate(&ls, &st, &[0, 1], &DMatrix::zeros(1, 2), &r, 1),
            Err(RateError::DimensionMismatch(_))
        ));
    }
}
