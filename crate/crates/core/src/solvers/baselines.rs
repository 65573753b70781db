//! Reference assignments: random, greedy, repulsive and ideal.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{estimation_stats, LargeScale};
use crate::dcp::{Bounds, Clustering, DcpError, DiversityMatrix, PilotSolution, SwapDelta};
use crate::rates::UlSinrTerms;
use crate::scenario::RadioParams;

/// Independent uniform pilot per UE.
pub fn random_assignment<R: Rng + ?Sized>(num_ues: usize, num_pilots: usize, rng: &mut R) -> Vec<usize> {
    (0..num_ues).map(|_| rng.random_range(0..num_pilots)).collect()
}

/// Uplink SINR of every UE at full transmit power.
pub fn full_power_ul_sinr(ls: &LargeScale, pilots: &[usize], radio: &RadioParams, antennas: usize) -> Vec<f64> {
    let stats = estimation_stats(ls, pilots, radio).expect("pilot vector sized to the channel");
    let terms = UlSinrTerms::new(ls, &stats, pilots, radio, antennas).expect("consistent dimensions");
    terms.sinr(&vec![1.0; pilots.len()])
}

/// Starting from a random assignment, `n_iters` times moves the weakest UE
/// to the pilot whose other users have the smallest total large-scale gain
/// summed over all APs. Ties go to the lowest pilot index.
pub fn greedy_assignment<R: Rng + ?Sized>(
    ls: &LargeScale,
    radio: &RadioParams,
    antennas: usize,
    num_pilots: usize,
    n_iters: usize,
    rng: &mut R,
) -> Vec<usize> {
    let k = ls.num_ues();
    let mut p = random_assignment(k, num_pilots, rng);
    let load: Vec<f64> = (0..k).map(|u| ls.beta.column(u).sum()).collect();
    for _ in 0..n_iters {
        let sinr = full_power_ul_sinr(ls, &p, radio, antennas);
        let worst = (0..k)
            .min_by(|&a, &b| sinr[a].total_cmp(&sinr[b]))
            .expect("at least one UE");
        let mut metric = vec![0.0; num_pilots];
        for (u, &q) in p.iter().enumerate() {
            if u != worst {
                metric[q] += load[u];
            }
        }
        let mut choice = 0;
        for (q, &m) in metric.iter().enumerate() {
            if m < metric[choice] {
                choice = q;
            }
        }
        p[worst] = choice;
    }
    p
}

/// Shuffled round-robin split into as-equal-as-possible clusters, then
/// first-improvement swaps on the raw diversity sum until none improves.
pub fn repulsive_assignment<R: Rng + ?Sized>(
    dm: &DiversityMatrix,
    num_pilots: usize,
    rng: &mut R,
) -> Result<Vec<usize>, DcpError> {
    let k = dm.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let mut p = vec![0; k];
    for (slot, &ue) in order.iter().enumerate() {
        p[ue] = slot % num_pilots;
    }
    let bounds = Bounds::equal_size(k, num_pilots);
    let mut cl = Clustering::new(dm, PilotSolution::new(p, num_pilots, bounds, dm)?)?;
    let eps = dm.tolerance();
    loop {
        let mut improved = false;
        for a in 0..k {
            for b in a + 1..k {
                if cl.pilot_of(a) != cl.pilot_of(b) && cl.delta_swap(a, b, SwapDelta::Unweighted)? > eps {
                    cl.apply_swap(a, b)?;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok(cl.into_solution().p);
        }
    }
}

/// A private pilot for every UE.
pub fn ideal_assignment(num_ues: usize) -> Vec<usize> {
    (0..num_ues).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcp::fitness;
    use crate::scenario::{drop_rng, Stream};
    use nalgebra::DMatrix;

    #[test]
    fn random_marginals_uniform() {
        let mut rng = drop_rng(1, 0, Stream::Solver(0));
        let tau = 5;
        let mut counts = vec![0usize; tau];
        for _ in 0..10_000 {
            counts[random_assignment(1, tau, &mut rng)[0]] += 1;
        }
        let expected = 10_000.0 / tau as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 4 degrees of freedom
        assert!(chi2 < 18.47, "chi2 = {chi2}");
    }

    #[test]
    fn greedy_without_iterations_is_random() {
        let ls = LargeScale::from_beta(DMatrix::from_element(3, 6, 1e-11));
        let radio = RadioParams::default();
        let g = greedy_assignment(&ls, &radio, 1, 3, 0, &mut drop_rng(2, 0, Stream::Solver(1)));
        let r = random_assignment(6, 3, &mut drop_rng(2, 0, Stream::Solver(1)));
        assert_eq!(g, r);
    }

    #[test]
    fn greedy_resolves_contamination_when_pilots_suffice() {
        // identical channels: a shared pilot is always the weakest link
        let ls = LargeScale::from_beta(DMatrix::from_element(4, 5, 1e-11));
        let radio = RadioParams::default();
        for seed in 0..20 {
            let p = greedy_assignment(&ls, &radio, 1, 5, 5, &mut drop_rng(seed, 0, Stream::Solver(1)));
            let mut sorted = p.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), 5, "{p:?}");
        }
    }

    #[test]
    fn repulsive_is_swap_optimal_and_balanced() {
        let mut rng = drop_rng(3, 0, Stream::Solver(0));
        let dm = DiversityMatrix::from_fn(23, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let p = repulsive_assignment(&dm, 5, &mut rng).unwrap();
        let mut s = [0; 5];
        p.iter().for_each(|&q| s[q] += 1);
        assert!(s.iter().all(|&n| n == 4 || n == 5));
        let base: f64 = raw_sum(&p, &dm);
        for a in 0..23 {
            for b in a + 1..23 {
                if p[a] != p[b] {
                    let mut q = p.clone();
                    q.swap(a, b);
                    assert!(raw_sum(&q, &dm) <= base + 1e-9);
                }
            }
        }
        assert!(fitness(&p, 5, &dm) > 0.0);
    }

    fn raw_sum(p: &[usize], dm: &DiversityMatrix) -> f64 {
        let mut total = 0.0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if p[i] == p[j] {
                    total += dm.get(i, j);
                }
            }
        }
        total
    }
}
