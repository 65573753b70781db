//! Sample statistics over per-UE throughputs.

use super::HarnessError;

/// Linearly interpolated percentile, `q` in `[0, 100]`: the order statistic
/// at fractional rank `(n - 1) q / 100` of the sorted samples.
pub fn percentile(samples: &[f64], q: f64) -> Result<f64, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptySample);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(HarnessError::Config(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

/// [`percentile`] on data that is already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let w = rank - lo as f64;
    if w == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

pub fn mean(samples: &[f64]) -> Result<f64, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptySample);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Empirical CDF as `(x, F(x))` steps: one point per distinct sample value,
/// `F` counting samples `<= x`.
pub fn ecdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0).unwrap(), 2.5);
        assert_eq!(percentile(&[7.5; 9], 13.0).unwrap(), 7.5);
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        assert!((percentile(&ramp, 95.0).unwrap() - 94.05).abs() < 1e-12);
        assert_eq!(percentile(&ramp, 0.0).unwrap(), 0.0);
        assert_eq!(percentile(&ramp, 100.0).unwrap(), 99.0);
    }

    #[test]
    fn percentile_errors() {
        assert!(matches!(percentile(&[], 50.0), Err(HarnessError::EmptySample)));
        assert!(percentile(&[1.0], 101.0).is_err());
        assert!(mean(&[]).is_err());
    }

    #[test]
    fn ecdf_shape() {
        let f = ecdf(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(f, vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn percentile_bounded_and_monotone(xs in prop::collection::vec(-1e6..1e6f64, 1..60), a in 0.0..100.0f64, b in 0.0..100.0f64) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let pl = percentile(&xs, lo).unwrap();
                let ph = percentile(&xs, hi).unwrap();
                prop_assert!(pl <= ph + 1e-9);
                let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(pl >= min && ph <= max);
            }

            #[test]
            fn ecdf_non_decreasing_ends_at_one(xs in prop::collection::vec(-10.0..10.0f64, 1..50)) {
                let f = ecdf(&xs);
                prop_assert!(f.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
                prop_assert_eq!(f.last().unwrap().1, 1.0);
            }

            #[test]
            fn statistics_permutation_invariant(mut xs in prop::collection::vec(0.0..1.0f64, 2..40), q in 0.0..100.0f64) {
                let p = percentile(&xs, q).unwrap();
                let m = mean(&xs).unwrap();
                xs.reverse();
                prop_assert_eq!(percentile(&xs, q).unwrap(), p);
                prop_assert!((mean(&xs).unwrap() - m).abs() < 1e-12);
            }
        }
    }
}
