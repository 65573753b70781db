//! Exact search over all pilot partitions of a small instance.
//!
//! Assignments are enumerated as restricted growth strings (UE `k` may only
//! open label `max(p_0..p_k) + 1`), so every partition is visited once
//! regardless of how its pilots are named.

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::dcp::{fitness, Bounds, DiversityMatrix};

/// What the exhaustive search maximises.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustiveObjective {
    /// Size-regularised diversity.
    #[default]
    Fitness,
    /// Sum of uplink spectral efficiency at full power.
    SumRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustiveParams {
    /// Largest number of partitions the search may visit.
    pub budget: u64,
    pub objective: ExhaustiveObjective,
    pub lb: Option<usize>,
    pub ub: Option<usize>,
}

impl Default for ExhaustiveParams {
    fn default() -> Self {
        Self {
            budget: 10_000_000,
            objective: ExhaustiveObjective::Fitness,
            lb: None,
            ub: None,
        }
    }
}

/// Number of partitions of `n` UEs into at most `blocks` non-empty groups,
/// saturating at `u64::MAX`.
pub fn partition_count(n: usize, blocks: usize) -> u64 {
    // Stirling numbers of the second kind, row by row
    let mut row = vec![0u128; blocks + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=blocks).rev() {
            row[j] = (j as u128).saturating_mul(row[j]).saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    let total = row[1..].iter().fold(0u128, |a, &b| a.saturating_add(b));
    u64::try_from(total).unwrap_or(u64::MAX)
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub assignment: Vec<usize>,
    pub value: f64,
    /// Feasible partitions scored.
    pub visited: u64,
}

/// Maximises `objective` over every feasible partition into at most
/// `num_pilots` clusters with sizes in `bounds`. Ties keep the first
/// partition in enumeration order.
pub fn exhaustive_search(
    num_ues: usize,
    num_pilots: usize,
    bounds: Bounds,
    budget: u64,
    mut objective: impl FnMut(&[usize]) -> f64,
) -> Result<ExhaustiveResult, SolverError> {
    bounds.check(num_ues, num_pilots)?;
    let states = partition_count(num_ues, num_pilots);
    if states > budget {
        return Err(SolverError::BudgetExceeded { states, budget });
    }
    let mut search = Search {
        k: num_ues,
        tau: num_pilots,
        bounds,
        p: vec![0; num_ues],
        sizes: vec![0; num_pilots],
        best: None,
        visited: 0,
    };
    search.descend(0, 0, &mut objective);
    let (assignment, value) = search.best.expect("bounds admit at least one partition");
    Ok(ExhaustiveResult {
        assignment,
        value,
        visited: search.visited,
    })
}

/// Exact maximiser of the clustering fitness.
pub fn exhaustive_fitness(
    dm: &DiversityMatrix,
    num_pilots: usize,
    bounds: Bounds,
    budget: u64,
) -> Result<ExhaustiveResult, SolverError> {
    exhaustive_search(dm.len(), num_pilots, bounds, budget, |p| fitness(p, num_pilots, dm))
}

struct Search {
    k: usize,
    tau: usize,
    bounds: Bounds,
    p: Vec<usize>,
    sizes: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
    visited: u64,
}

impl Search {
    fn descend(&mut self, ue: usize, used: usize, objective: &mut impl FnMut(&[usize]) -> f64) {
        let remaining = self.k - ue;
        let missing: usize = (0..self.tau)
            .map(|q| self.bounds.lb.saturating_sub(self.sizes[q]))
            .sum();
        if missing > remaining {
            return;
        }
        if ue == self.k {
            self.visited += 1;
            let v = objective(&self.p);
            if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
                self.best = Some((self.p.clone(), v));
            }
            return;
        }
        let open = (used + 1).min(self.tau);
        for q in 0..open {
            if self.sizes[q] >= self.bounds.ub {
                continue;
            }
            self.p[ue] = q;
            self.sizes[q] += 1;
            self.descend(ue + 1, used.max(q + 1), objective);
            self.sizes[q] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts() {
        assert_eq!(partition_count(4, 2), 8);
        assert_eq!(partition_count(5, 5), 52);
        assert_eq!(partition_count(12, 3), 1 + 2047 + 86526);
        assert_eq!(partition_count(200, 50), u64::MAX);
    }

    #[test]
    fn four_ues_two_pilots_three_bipartitions() {
        let rows = vec![
            vec![0.0, 1.0, 5.0, 2.0],
            vec![1.0, 0.0, 3.0, 4.0],
            vec![5.0, 3.0, 0.0, 1.5],
            vec![2.0, 4.0, 1.5, 0.0],
        ];
        let dm = DiversityMatrix::from_rows(&rows).unwrap();
        let res = exhaustive_fitness(&dm, 2, Bounds::new(2, 2), 1000).unwrap();
        assert_eq!(res.visited, 3);
        // {0,2}{1,3}: (5 + 4) / 2
        assert_eq!(res.assignment, vec![0, 1, 0, 1]);
        assert_eq!(res.value, 4.5);
    }

    #[test]
    fn two_ues_merge_under_free_sizes() {
        let dm = DiversityMatrix::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let merged = exhaustive_fitness(&dm, 2, Bounds::new(0, 2), 100).unwrap();
        assert_eq!(merged.assignment, vec![0, 0]);
        assert_eq!(merged.value, 1.5);
        let split = exhaustive_fitness(&dm, 2, Bounds::new(0, 1), 100).unwrap();
        assert_eq!(split.assignment, vec![0, 1]);
        assert_eq!(split.value, 0.0);
    }

    #[test]
    fn budget_enforced() {
        let err = exhaustive_search(20, 5, Bounds::new(0, 20), 1000, |_| 0.0).unwrap_err();
        assert!(matches!(err, SolverError::BudgetExceeded { .. }));
    }

    #[test]
    fn visits_every_feasible_partition_once() {
        let mut seen = std::collections::HashSet::new();
        let res = exhaustive_search(6, 3, Bounds::new(1, 6), 10_000, |p| {
            assert!(seen.insert(p.to_vec()));
            0.0
        })
        .unwrap();
        // S(6,3)
        assert_eq!(res.visited, 90);
    }
}
