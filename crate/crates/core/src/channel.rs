//! Large-scale fading and MMSE channel-estimation statistics.
//!
//! The main pipeline never instantiates small-scale fading: the closed-form
//! rates only need the large-scale coefficients `beta` and the estimate
//! mean-squares `gamma`. [`simulate_ul_decomposition`] is the exception, a
//! Monte-Carlo check of those closed forms on small instances.
//!
//! Pilots are orthonormal, so `|phi_i^H phi_j|^2` is the indicator `i == j`
//! and pilot sequences are identified by their index only.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rates::NormalizedSnr;
use crate::scenario::{RadioParams, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance too large for Monte-Carlo: {cost} work units exceed budget {budget}")]
    InstanceTooLarge { cost: u128, budget: u128 },
}

/// Hata-style constant `L` of the three-slope law, in dB.
pub fn hata_constant_db(radio: &RadioParams) -> f64 {
    let lf = radio.carrier_freq_mhz.log10();
    46.3 + 33.9 * lf - 13.82 * radio.ap_height_m.log10() - (1.1 * lf - 0.7) * radio.ue_height_m + (1.56 * lf - 0.8)
}

/// Three-slope path loss in dB (a negative gain) at distance `d_km`.
///
/// Flat below `d0`, 20 dB/decade up to `d1`, 35 dB/decade beyond. Distances
/// at or below zero fall into the flat regime.
pub fn path_loss_db(d_km: f64, radio: &RadioParams) -> f64 {
    let l = hata_constant_db(radio);
    let d0 = radio.d0_m / 1000.0;
    let d1 = radio.d1_m / 1000.0;
    if d_km <= d0 {
        -l - 15.0 * d1.log10() - 20.0 * d0.log10()
    } else if d_km <= d1 {
        -l - 15.0 * d1.log10() - 20.0 * d_km.log10()
    } else {
        -l - 35.0 * d_km.log10()
    }
}

/// Large-scale fading between every AP (rows) and UE (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    /// Linear coefficients, `10^((pl_db + shadow_db) / 10)`.
    pub beta: DMatrix<f64>,
    pub pl_db: DMatrix<f64>,
    pub shadow_db: DMatrix<f64>,
}

impl LargeScale {
    /// Assembles the linear coefficients from path loss and shadowing in dB.
    pub fn from_db(pl_db: DMatrix<f64>, shadow_db: DMatrix<f64>) -> Result<Self, ChannelError> {
        if pl_db.shape() != shadow_db.shape() {
            return Err(ChannelError::DimensionMismatch(format!(
                "path loss {:?} vs shadowing {:?}",
                pl_db.shape(),
                shadow_db.shape()
            )));
        }
        let beta = pl_db.zip_map(&shadow_db, |pl, sh| 10f64.powf((pl + sh) / 10.0));
        Ok(Self { beta, pl_db, shadow_db })
    }

    /// Wraps a given `beta` matrix (no shadowing, path loss implied).
    pub fn from_beta(beta: DMatrix<f64>) -> Self {
        let pl_db = beta.map(|b| 10.0 * b.log10());
        let shadow_db = DMatrix::zeros(beta.nrows(), beta.ncols());
        Self { beta, pl_db, shadow_db }
    }

    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.beta.ncols()
    }
}

/// Draws log-normal shadowing on top of the three-slope path loss.
pub fn large_scale<R: Rng + ?Sized>(topology: &Topology, radio: &RadioParams, rng: &mut R) -> LargeScale {
    let (m, k) = (topology.num_aps(), topology.num_ues());
    let pl_db = DMatrix::from_fn(m, k, |a, u| path_loss_db(topology.ap_ue_distance(a, u), radio));
    // column-major fill keeps the draw order (UE-major) independent of M
    let shadow_db = DMatrix::from_fn(m, k, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        radio.shadow_std_db * z
    });
    LargeScale::from_db(pl_db, shadow_db).expect("shapes agree by construction")
}

/// MMSE estimation statistics for one pilot assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    pub c: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

/// Computes `c_mk` and `gamma_mk` for the pilot labels `pilots`.
///
/// Labels only matter through equality, so they may exceed the number of
/// pilots; the contamination-free reference assigns `0..K`. The processing
/// gain always uses `radio.num_pilots`.
pub fn estimation_stats(
    ls: &LargeScale,
    pilots: &[usize],
    radio: &RadioParams,
) -> Result<EstimationStats, ChannelError> {
    let (m, k) = ls.beta.shape();
    if pilots.len() != k {
        return Err(ChannelError::DimensionMismatch(format!(
            "{} pilot labels for {} UEs",
            pilots.len(),
            k
        )));
    }
    let snr = NormalizedSnr::from_radio(radio);
    let tau_rho = radio.num_pilots as f64 * snr.pilot;
    let sqrt_tau_rho = tau_rho.sqrt();
    let labels = pilots.iter().copied().max().map_or(0, |p| p + 1);

    let mut c = DMatrix::zeros(m, k);
    let mut gamma = DMatrix::zeros(m, k);
    let mut copilot_sum = vec![0.0; labels];
    for a in 0..m {
        copilot_sum.iter_mut().for_each(|s| *s = 0.0);
        for (u, &p) in pilots.iter().enumerate() {
            copilot_sum[p] += ls.beta[(a, u)];
        }
        for (u, &p) in pilots.iter().enumerate() {
            let b = ls.beta[(a, u)];
            let cmk = sqrt_tau_rho * b / (tau_rho * copilot_sum[p] + 1.0);
            c[(a, u)] = cmk;
            gamma[(a, u)] = sqrt_tau_rho * b * cmk;
        }
    }
    Ok(EstimationStats { c, gamma })
}

/// Empirical statistics of the uplink MR-combined signal of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStats {
    /// Sample mean of the desired-signal gain `sqrt(rho_u eta_k) sum ghat^* g`.
    pub ds_mean: Complex64,
    /// `|E{DS}|^2`.
    pub ds_power: f64,
    /// Beamforming-uncertainty power (sample variance of the desired gain).
    pub bu_power: f64,
    /// Interference power from every other UE, co-pilot or not.
    pub cpi_power: f64,
    pub noise_power: f64,
    /// Use-and-then-forget SINR built from the empirical moments.
    pub sinr: f64,
    /// Jackknife standard error of `sinr` over draw batches.
    pub sinr_std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UlDecomposition {
    pub draws: usize,
    pub terms: Vec<TermStats>,
}

/// Default cap on `M * K * L * draws` for [`simulate_ul_decomposition`].
pub const DEFAULT_MC_BUDGET: u128 = 200_000_000;

const JACKKNIFE_BATCHES: usize = 50;

/// Per-batch raw moment sums for one UE.
#[derive(Clone)]
struct Moments {
    n: usize,
    gain_sum: Complex64,
    gain_sq: f64,
    // E|sum_m ghat_mk^* g_mk'|^2 for every k' (k' = k included, unused)
    cross_sq: Vec<f64>,
    noise_sq: f64,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            n: 0,
            gain_sum: Complex64::new(0.0, 0.0),
            gain_sq: 0.0,
            cross_sq: vec![0.0; k],
            noise_sq: 0.0,
        }
    }

    fn add(&mut self, other: &Moments) {
        self.n += other.n;
        self.gain_sum += other.gain_sum;
        self.gain_sq += other.gain_sq;
        for (a, b) in self.cross_sq.iter_mut().zip(&other.cross_sq) {
            *a += b;
        }
        self.noise_sq += other.noise_sq;
    }

    fn sub(&self, other: &Moments) -> Moments {
        Moments {
            n: self.n - other.n,
            gain_sum: self.gain_sum - other.gain_sum,
            gain_sq: self.gain_sq - other.gain_sq,
            cross_sq: self.cross_sq.iter().zip(&other.cross_sq).map(|(a, b)| a - b).collect(),
            noise_sq: self.noise_sq - other.noise_sq,
        }
    }

    /// (ds, bu, interference, noise) powers for UE `k`.
    fn powers(&self, k: usize, rho_u: f64, eta: &[f64]) -> (Complex64, f64, f64, f64) {
        let n = self.n as f64;
        let mean = self.gain_sum / n;
        let var = (self.gain_sq / n - mean.norm_sqr()).max(0.0);
        let scale = (rho_u * eta[k]).sqrt();
        let cpi: f64 = (0..eta.len())
            .filter(|&j| j != k)
            .map(|j| rho_u * eta[j] * self.cross_sq[j] / n)
            .sum();
        (mean * scale, rho_u * eta[k] * var, cpi, self.noise_sq / n)
    }
}

fn sinr_of(p: (Complex64, f64, f64, f64)) -> f64 {
    let (ds, bu, cpi, noise) = p;
    ds.norm_sqr() / (bu + cpi + noise)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Monte-Carlo uplink signal decomposition with explicit small-scale fading.
///
/// Each draw generates `h ~ CN(0, I_L)` per link, the pilot observation
/// projected onto every pilot (co-pilot UEs share the projected noise), the
/// MMSE estimates `ghat = c * y`, and the MR-combined uplink data noise. The
/// desired, beamforming-uncertainty, interference and noise powers are the
/// empirical moments of the combined signal.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ul_decomposition<R: Rng + ?Sized>(
    ls: &LargeScale,
    pilots: &[usize],
    radio: &RadioParams,
    antennas: usize,
    ul_eta: &[f64],
    draws: usize,
    budget: u128,
    rng: &mut R,
) -> Result<UlDecomposition, ChannelError> {
    let (m, k) = ls.beta.shape();
    if ul_eta.len() != k {
        return Err(ChannelError::DimensionMismatch(format!(
            "{} power coefficients for {} UEs",
            ul_eta.len(),
            k
        )));
    }
    let cost = (m * k * antennas) as u128 * draws as u128;
    if cost > budget {
        return Err(ChannelError::InstanceTooLarge { cost, budget });
    }
    if draws < JACKKNIFE_BATCHES {
        return Err(ChannelError::DimensionMismatch(format!(
            "need at least {JACKKNIFE_BATCHES} draws, got {draws}"
        )));
    }
    let stats = estimation_stats(ls, pilots, radio)?;
    let snr = NormalizedSnr::from_radio(radio);
    let sqrt_tau_rho = (radio.num_pilots as f64 * snr.pilot).sqrt();
    let labels = pilots.iter().copied().max().map_or(0, |p| p + 1);
    let sqrt_beta = ls.beta.map(f64::sqrt);

    let mut batches: Vec<Vec<Moments>> = vec![vec![Moments::new(k); k]; JACKKNIFE_BATCHES];
    let mut g = vec![Complex64::new(0.0, 0.0); k];
    let mut ghat = vec![Complex64::new(0.0, 0.0); k];
    let mut y_proj = vec![Complex64::new(0.0, 0.0); labels];
    // per-draw accumulators over (AP, antenna)
    let mut cross = vec![Complex64::new(0.0, 0.0); k * k];
    let mut noise_comb = vec![Complex64::new(0.0, 0.0); k];

    for draw in 0..draws {
        cross.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        noise_comb.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for a in 0..m {
            for _ in 0..antennas {
                for u in 0..k {
                    g[u] = complex_normal(rng) * sqrt_beta[(a, u)];
                }
                for y in y_proj.iter_mut() {
                    *y = complex_normal(rng);
                }
                for (u, &p) in pilots.iter().enumerate() {
                    y_proj[p] += g[u] * sqrt_tau_rho;
                }
                for (u, &p) in pilots.iter().enumerate() {
                    ghat[u] = y_proj[p] * stats.c[(a, u)];
                }
                let w = complex_normal(rng);
                for u in 0..k {
                    let gh = ghat[u].conj();
                    for j in 0..k {
                        cross[u * k + j] += gh * g[j];
                    }
                    noise_comb[u] += gh * w;
                }
            }
        }
        let batch = &mut batches[draw % JACKKNIFE_BATCHES];
        for u in 0..k {
            let mo = &mut batch[u];
            mo.n += 1;
            let gain = cross[u * k + u];
            mo.gain_sum += gain;
            mo.gain_sq += gain.norm_sqr();
            for j in 0..k {
                mo.cross_sq[j] += cross[u * k + j].norm_sqr();
            }
            mo.noise_sq += noise_comb[u].norm_sqr();
        }
    }

    let terms = (0..k)
        .map(|u| {
            let mut total = Moments::new(k);
            for b in &batches {
                total.add(&b[u]);
            }
            let full = total.powers(u, snr.ul, ul_eta);
            let sinr = sinr_of(full);
            let loo: Vec<f64> = batches
                .iter()
                .map(|b| sinr_of(total.sub(&b[u]).powers(u, snr.ul, ul_eta)))
                .collect();
            let nb = loo.len() as f64;
            let loo_mean = loo.iter().sum::<f64>() / nb;
            let var = (nb - 1.0) / nb * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
            let (ds_mean, bu_power, cpi_power, noise_power) = full;
            TermStats {
                ds_mean,
                ds_power: ds_mean.norm_sqr(),
                bu_power,
                cpi_power,
                noise_power,
                sinr,
                sinr_std_err: var.sqrt(),
            }
        })
        .collect();
    Ok(UlDecomposition { draws, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{drop_rng, generate_topology, Stream};

    fn radio() -> RadioParams {
        RadioParams::default()
    }

    #[test]
    fn hata_constant_reference_value() {
        // 46.3 + 33.9*3.278754 - 13.82*1.176091 - (1.1*3.278754 - 0.7)*1.65
        //   + (1.56*3.278754 - 0.8) evaluated term by term
        let l = hata_constant_db(&radio());
        assert!((l - 140.7155).abs() < 1e-3, "L = {l}");
    }

    #[test]
    fn continuity_at_thresholds() {
        let r = radio();
        let eps = 1e-9;
        for d in [r.d0_m / 1000.0, r.d1_m / 1000.0] {
            let below = path_loss_db(d - eps, &r);
            let at = path_loss_db(d, &r);
            let above = path_loss_db(d + eps, &r);
            assert!((below - at).abs() < 1e-6);
            assert!((above - at).abs() < 1e-6);
        }
    }

    #[test]
    fn flat_regime_includes_zero_distance() {
        let r = radio();
        assert_eq!(path_loss_db(0.0, &r), path_loss_db(r.d0_m / 1000.0, &r));
        assert_eq!(path_loss_db(0.004, &r), path_loss_db(0.0, &r));
    }

    #[test]
    fn no_shadowing_gives_pure_path_loss() {
        let r = RadioParams {
            shadow_std_db: 0.0,
            ..radio()
        };
        let topo = generate_topology(6, 4, 1, 1.0, &mut drop_rng(1, 0, Stream::Placement)).unwrap();
        let ls = large_scale(&topo, &r, &mut drop_rng(1, 0, Stream::Shadowing));
        for (b, pl) in ls.beta.iter().zip(ls.pl_db.iter()) {
            assert_eq!(*b, 10f64.powf(pl / 10.0));
        }
    }

    #[test]
    fn large_scale_positive_and_deterministic() {
        let r = radio();
        let topo = generate_topology(10, 5, 1, 1.0, &mut drop_rng(2, 0, Stream::Placement)).unwrap();
        let a = large_scale(&topo, &r, &mut drop_rng(2, 0, Stream::Shadowing));
        let b = large_scale(&topo, &r, &mut drop_rng(2, 0, Stream::Shadowing));
        assert_eq!(a, b);
        assert!(a.beta.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn single_ue_gamma() {
        let r = radio();
        let beta = 3e-11;
        let ls = LargeScale::from_beta(DMatrix::from_element(1, 1, beta));
        let st = estimation_stats(&ls, &[0], &r).unwrap();
        let tr = r.num_pilots as f64 * NormalizedSnr::from_radio(&r).pilot;
        let expected = tr * beta * beta / (tr * beta + 1.0);
        assert!((st.gamma[(0, 0)] - expected).abs() <= 1e-12 * expected);
        assert!(st.gamma[(0, 0)] < beta);
    }

    #[test]
    fn two_copilot_equal_beta() {
        let r = radio();
        let beta = 5e-12;
        let ls = LargeScale::from_beta(DMatrix::from_element(1, 2, beta));
        let st = estimation_stats(&ls, &[1, 1], &r).unwrap();
        let tr = r.num_pilots as f64 * NormalizedSnr::from_radio(&r).pilot;
        let expected = tr * beta * beta / (2.0 * tr * beta + 1.0);
        assert!((st.gamma[(0, 0)] - expected).abs() <= 1e-12 * expected);
        assert!((st.gamma[(0, 1)] - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn high_snr_unique_pilots_approach_beta() {
        let r = RadioParams {
            pilot_power_mw: 1e12,
            ..radio()
        };
        let beta = DMatrix::from_row_slice(2, 2, &[1e-9, 2e-10, 4e-11, 7e-10]);
        let ls = LargeScale::from_beta(beta.clone());
        let st = estimation_stats(&ls, &[0, 1], &r).unwrap();
        for (g, b) in st.gamma.iter().zip(beta.iter()) {
            assert!((g / b - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pilot_label_length_checked() {
        let ls = LargeScale::from_beta(DMatrix::from_element(2, 3, 1e-10));
        assert!(matches!(
            estimation_stats(&ls, &[0, 1], &radio()),
            Err(ChannelError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mc_budget_enforced() {
        let ls = LargeScale::from_beta(DMatrix::from_element(3, 2, 1e-10));
        let err = simulate_ul_decomposition(
            &ls,
            &[0, 0],
            &radio(),
            1,
            &[1.0, 1.0],
            1000,
            100,
            &mut drop_rng(0, 0, Stream::Solver(0)),
        );
        assert!(matches!(err, Err(ChannelError::InstanceTooLarge { .. })));
    }

    #[test]
    fn mc_zero_ul_power_leaves_only_noise() {
        let r = RadioParams {
            ul_power_mw: 0.0,
            ..radio()
        };
        let ls = LargeScale::from_beta(DMatrix::from_row_slice(
            3,
            2,
            &[1e-10, 3e-11, 2e-11, 8e-11, 5e-12, 1e-11],
        ));
        let dec = simulate_ul_decomposition(
            &ls,
            &[0, 0],
            &r,
            1,
            &[1.0, 1.0],
            2000,
            DEFAULT_MC_BUDGET,
            &mut drop_rng(3, 0, Stream::Solver(0)),
        )
        .unwrap();
        for t in &dec.terms {
            assert_eq!(t.ds_power, 0.0);
            assert_eq!(t.bu_power, 0.0);
            assert_eq!(t.cpi_power, 0.0);
            assert!(t.noise_power > 0.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gamma_bounded_by_beta_and_monotone_in_sharing(
                betas in proptest::collection::vec(-14.0..-8.0f64, 6),
                labels in proptest::collection::vec(0usize..3, 6),
                extra in 0usize..6,
            ) {
                let r = RadioParams::default();
                let beta = DMatrix::from_iterator(2, 3, betas.iter().map(|e| 10f64.powf(*e)));
                let ls = LargeScale::from_beta(beta.clone());
                let pilots: Vec<usize> = labels[..3].to_vec();
                let st = estimation_stats(&ls, &pilots, &r).unwrap();
                for (g, b) in st.gamma.iter().zip(beta.iter()) {
                    prop_assert!(*g > 0.0 && g <= b);
                }
                // moving UE `j` onto UE 0's pilot never raises gamma of UE 0
                let j = 1 + extra % 2;
                let mut shared = pilots.clone();
                shared[j] = shared[0];
                let st2 = estimation_stats(&ls, &shared, &r).unwrap();
                for a in 0..2 {
                    if pilots[j] != pilots[0] {
                        prop_assert!(st2.gamma[(a, 0)] <= st.gamma[(a, 0)]);
                    }
                }
            }

            #[test]
            fn path_loss_non_increasing(d1 in 0.0..2.0f64, d2 in 0.0..2.0f64) {
                let r = RadioParams::default();
                let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
                prop_assert!(path_loss_db(hi, &r) <= path_loss_db(lo, &r) + 1e-12);
            }
        }
    }
}
