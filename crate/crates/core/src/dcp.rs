//! Diverse clustering: UEs are partitioned into one cluster per pilot so that
//! co-pilot UEs are as dissimilar as possible.
//!
//! The objective of a partition is
//!
//! ```text
//! f(p) = sum over clusters P of  c_P / s_P,   c_P = sum_{k<k' in P} d_kk'
//! ```
//!
//! with empty clusters contributing nothing. [`Clustering`] keeps the tuple
//! `(p, c, s)` together with the `K x tau_p` move matrix
//! `M[k][q] = sum_{k' in cluster q} d_kk'`, which turns every OneMove and
//! SwapMove evaluation into O(1) work and every applied move into O(K).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::LargeScale;
use crate::scenario::{wrap_delta, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcpError {
    #[error("invalid diversity matrix: {0}")]
    InvalidMatrix(String),
    #[error("infeasible bounds: {num_ues} UEs cannot fill {num_pilots} clusters with sizes in [{lb}, {ub}]")]
    InfeasibleBounds {
        num_ues: usize,
        num_pilots: usize,
        lb: usize,
        ub: usize,
    },
    #[error("assignment violates bounds: cluster {pilot} has {size} members, allowed [{lb}, {ub}]")]
    BoundsViolated {
        pilot: usize,
        size: usize,
        lb: usize,
        ub: usize,
    },
    #[error("pilot label {label} out of range for {num_pilots} pilots")]
    InvalidPilot { label: usize, num_pilots: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("infeasible move of UE {ue} from cluster {from} to {to}")]
    InfeasibleMove { ue: usize, from: usize, to: usize },
    #[error("UEs {0} and {1} share a cluster; a swap needs two clusters")]
    SameCluster(usize, usize),
}

/// Which per-UE features the diversity is measured on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    /// Estimated 2-D position, wraparound aware.
    #[default]
    Location,
    /// Large-scale fading to every AP, in dB.
    Lsf,
    /// Both of the above, each dimension scaled to unit variance.
    Both,
}

impl std::fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSource::Location => "location",
            FeatureSource::Lsf => "lsf",
            FeatureSource::Both => "both",
        })
    }
}

impl std::str::FromStr for FeatureSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "location" => Ok(FeatureSource::Location),
            "lsf" => Ok(FeatureSource::Lsf),
            "both" => Ok(FeatureSource::Both),
            other => Err(format!("unknown feature source `{other}`")),
        }
    }
}

/// Symmetric, non-negative `K x K` matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityMatrix {
    k: usize,
    d: Vec<f64>,
    source: Option<FeatureSource>,
}

impl DiversityMatrix {
    /// Builds the matrix from `f(i, j)` for `i < j` and mirrors it.
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, DcpError> {
        let mut d = vec![0.0; k * k];
        for i in 0..k {
            for j in i + 1..k {
                let v = f(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(DcpError::InvalidMatrix(format!("d[{i}][{j}] = {v}")));
                }
                d[i * k + j] = v;
                d[j * k + i] = v;
            }
        }
        Ok(Self { k, d, source: None })
    }

    /// Validates a full row-major matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DcpError> {
        let k = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(DcpError::InvalidMatrix(format!("row {i} has {} entries", r.len())));
            }
            if r[i] != 0.0 {
                return Err(DcpError::InvalidMatrix(format!("non-zero diagonal at {i}")));
            }
            for (j, &v) in r.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(DcpError::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Self::from_fn(k, |i, j| rows[i][j])
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.k + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.k..(i + 1) * self.k]
    }

    pub fn source(&self) -> Option<FeatureSource> {
        self.source
    }

    pub fn max_entry(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k: self.k,
            d: self.d.iter().map(|v| v * factor).collect(),
            source: self.source,
        }
    }

    /// Threshold below which a fitness change counts as no change. Scales
    /// with the matrix so that the improving-move set is scale invariant.
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.max_entry()
    }
}

/// One feature axis: values per UE and whether differences wrap around.
struct Axis {
    values: Vec<f64>,
    period: Option<f64>,
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Pairwise Euclidean diversity over the chosen UE features.
///
/// Location features are the true positions perturbed by i.i.d. Gaussian
/// error of standard deviation `loc_error_std_m` per coordinate, folded back
/// onto the torus. LSF features are `beta` in dB.
pub fn build_diversity<R: Rng + ?Sized>(
    topology: &Topology,
    ls: &LargeScale,
    source: FeatureSource,
    loc_error_std_m: f64,
    rng: &mut R,
) -> Result<DiversityMatrix, DcpError> {
    let k = topology.num_ues();
    if ls.num_ues() != k {
        return Err(DcpError::DimensionMismatch(format!(
            "topology has {k} UEs, large-scale matrix {}",
            ls.num_ues()
        )));
    }
    if !(loc_error_std_m.is_finite() && loc_error_std_m >= 0.0) {
        return Err(DcpError::DimensionMismatch(format!(
            "location error std must be non-negative, got {loc_error_std_m}"
        )));
    }
    let area = topology.area_km;
    let location_axes = |rng: &mut R| -> Vec<Axis> {
        let err = Normal::new(0.0, loc_error_std_m / 1000.0).expect("finite std");
        let noisy: Vec<[f64; 2]> = topology
            .ue_positions
            .iter()
            .map(|p| {
                let mut q = *p;
                for x in q.iter_mut() {
                    if loc_error_std_m > 0.0 {
                        *x = (*x + err.sample(rng)).rem_euclid(area);
                    }
                }
                q
            })
            .collect();
        (0..2)
            .map(|dim| Axis {
                values: noisy.iter().map(|q| q[dim]).collect(),
                period: Some(area),
            })
            .collect()
    };
    let lsf_axes = || -> Vec<Axis> {
        (0..ls.num_aps())
            .map(|a| Axis {
                values: (0..k).map(|u| 10.0 * ls.beta[(a, u)].log10()).collect(),
                period: None,
            })
            .collect()
    };
    let (axes, standardize) = match source {
        FeatureSource::Location => (location_axes(rng), false),
        FeatureSource::Lsf => (lsf_axes(), false),
        FeatureSource::Both => {
            let mut axes = location_axes(rng);
            axes.extend(lsf_axes());
            (axes, true)
        }
    };
    let scales: Vec<f64> = axes
        .iter()
        .map(|ax| {
            if standardize {
                let s = std_dev(&ax.values);
                if s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            } else {
                1.0
            }
        })
        .collect();
    let mut dm = DiversityMatrix::from_fn(k, |i, j| {
        axes.iter()
            .zip(&scales)
            .map(|(ax, w)| {
                let delta = match ax.period {
                    Some(p) => wrap_delta(ax.values[i], ax.values[j], p),
                    None => ax.values[i] - ax.values[j],
                };
                (delta * w).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    })?;
    dm.source = Some(source);
    Ok(dm)
}

/// Capacity bounds `lb <= |cluster| <= ub` shared by every cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub lb: usize,
    pub ub: usize,
}

impl Bounds {
    pub fn new(lb: usize, ub: usize) -> Self {
        Self { lb, ub }
    }

    /// As-equal-as-possible sizes: `floor(K/tau)..=ceil(K/tau)`.
    pub fn equal_size(num_ues: usize, num_pilots: usize) -> Self {
        Self {
            lb: num_ues / num_pilots,
            ub: num_ues.div_ceil(num_pilots),
        }
    }

    /// Free sizes, but every pilot used whenever there are enough UEs.
    pub fn variable_size(num_ues: usize, num_pilots: usize) -> Self {
        Self {
            lb: usize::from(num_ues >= num_pilots),
            ub: num_ues,
        }
    }

    pub fn check(&self, num_ues: usize, num_pilots: usize) -> Result<(), DcpError> {
        let fits =
            self.lb <= self.ub && num_pilots > 0 && num_pilots * self.lb <= num_ues && num_ues <= num_pilots * self.ub;
        if fits {
            Ok(())
        } else {
            Err(DcpError::InfeasibleBounds {
                num_ues,
                num_pilots,
                lb: self.lb,
                ub: self.ub,
            })
        }
    }

    pub fn admits(&self, size: usize) -> bool {
        (self.lb..=self.ub).contains(&size)
    }
}

/// Assignment vector with per-cluster diversity sums and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSolution {
    pub p: Vec<usize>,
    pub c: Vec<f64>,
    pub s: Vec<usize>,
    pub bounds: Bounds,
}

impl PilotSolution {
    /// Computes `c` and `s` for assignment `p`; fails if any cluster size
    /// breaks `bounds`.
    pub fn new(p: Vec<usize>, num_pilots: usize, bounds: Bounds, dm: &DiversityMatrix) -> Result<Self, DcpError> {
        if p.len() != dm.len() {
            return Err(DcpError::DimensionMismatch(format!(
                "{} labels for a {}-UE diversity matrix",
                p.len(),
                dm.len()
            )));
        }
        if let Some(&label) = p.iter().find(|&&q| q >= num_pilots) {
            return Err(DcpError::InvalidPilot { label, num_pilots });
        }
        let (c, s) = cluster_sums(&p, num_pilots, dm);
        let sol = Self { p, c, s, bounds };
        if let Some((pilot, &size)) = sol.s.iter().enumerate().find(|(_, &n)| !bounds.admits(n)) {
            return Err(DcpError::BoundsViolated {
                pilot,
                size,
                lb: bounds.lb,
                ub: bounds.ub,
            });
        }
        Ok(sol)
    }

    pub fn num_pilots(&self) -> usize {
        self.s.len()
    }

    pub fn num_ues(&self) -> usize {
        self.p.len()
    }

    /// Objective from the cached cluster sums.
    pub fn fitness(&self) -> f64 {
        self.c.iter().zip(&self.s).map(|(&c, &s)| ratio(c, s)).sum()
    }

    pub fn is_feasible(&self) -> bool {
        self.s.iter().all(|&n| self.bounds.admits(n)) && self.s.iter().sum::<usize>() == self.p.len()
    }
}

#[inline]
fn ratio(c: f64, s: usize) -> f64 {
    if s == 0 {
        0.0
    } else {
        c / s as f64
    }
}

fn cluster_sums(p: &[usize], num_pilots: usize, dm: &DiversityMatrix) -> (Vec<f64>, Vec<usize>) {
    let mut c = vec![0.0; num_pilots];
    let mut s = vec![0; num_pilots];
    for (i, &pi) in p.iter().enumerate() {
        s[pi] += 1;
        for (j, &pj) in p.iter().enumerate().skip(i + 1) {
            if pj == pi {
                c[pi] += dm.get(i, j);
            }
        }
    }
    (c, s)
}

/// Fitness recomputed from scratch in O(K^2).
pub fn fitness(p: &[usize], num_pilots: usize, dm: &DiversityMatrix) -> f64 {
    let (c, s) = cluster_sums(p, num_pilots, dm);
    c.iter().zip(&s).map(|(&c, &s)| ratio(c, s)).sum()
}

/// `M[k][q]`: summed diversity between UE `k` and the members of cluster `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveMatrix {
    num_pilots: usize,
    m: Vec<f64>,
}

impl MoveMatrix {
    pub fn build(p: &[usize], num_pilots: usize, dm: &DiversityMatrix) -> Self {
        let k = p.len();
        let mut m = vec![0.0; k * num_pilots];
        for i in 0..k {
            let row = dm.row(i);
            for (j, &pj) in p.iter().enumerate() {
                m[i * num_pilots + pj] += row[j];
            }
        }
        Self { num_pilots, m }
    }

    #[inline]
    pub fn get(&self, ue: usize, pilot: usize) -> f64 {
        self.m[ue * self.num_pilots + pilot]
    }

    pub fn row(&self, ue: usize) -> &[f64] {
        &self.m[ue * self.num_pilots..(ue + 1) * self.num_pilots]
    }

    #[inline]
    fn add_column(&mut self, pilot: usize, dm: &DiversityMatrix, ue: usize, sign: f64) {
        let row = dm.row(ue);
        for (x, &d) in row.iter().enumerate() {
            self.m[x * self.num_pilots + pilot] += sign * d;
        }
    }
}

/// How SwapMove deltas are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwapDelta {
    /// Exact change of the size-regularised fitness.
    #[default]
    Weighted,
    /// Change of the raw intra-cluster diversity sum.
    Unweighted,
}

/// A neighbourhood move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Reassign `ue` to cluster `to`.
    One { ue: usize, to: usize },
    /// Exchange the clusters of two UEs.
    Swap { a: usize, b: usize },
}

/// Mutable search state: a solution, its move matrix and the diversity it is
/// scored against.
#[derive(Debug, Clone)]
pub struct Clustering<'a> {
    dm: &'a DiversityMatrix,
    sol: PilotSolution,
    mm: MoveMatrix,
}

impl<'a> Clustering<'a> {
    pub fn new(dm: &'a DiversityMatrix, sol: PilotSolution) -> Result<Self, DcpError> {
        if sol.p.len() != dm.len() {
            return Err(DcpError::DimensionMismatch(format!(
                "{} labels for a {}-UE diversity matrix",
                sol.p.len(),
                dm.len()
            )));
        }
        let mm = MoveMatrix::build(&sol.p, sol.num_pilots(), dm);
        Ok(Self { dm, sol, mm })
    }

    pub fn diversity(&self) -> &'a DiversityMatrix {
        self.dm
    }

    pub fn solution(&self) -> &PilotSolution {
        &self.sol
    }

    pub fn into_solution(self) -> PilotSolution {
        self.sol
    }

    pub fn move_matrix(&self) -> &MoveMatrix {
        &self.mm
    }

    pub fn fitness(&self) -> f64 {
        self.sol.fitness()
    }

    pub fn pilot_of(&self, ue: usize) -> usize {
        self.sol.p[ue]
    }

    /// Recomputes `c` and `M` from `p`, discarding accumulated rounding.
    pub fn refresh(&mut self) {
        let (c, _) = cluster_sums(&self.sol.p, self.sol.num_pilots(), self.dm);
        self.sol.c = c;
        self.mm = MoveMatrix::build(&self.sol.p, self.sol.num_pilots(), self.dm);
    }

    /// True when `ue` may leave its cluster for `to` within the bounds.
    pub fn can_move(&self, ue: usize, to: usize) -> bool {
        let from = self.sol.p[ue];
        from != to && self.sol.s[from] > self.sol.bounds.lb && self.sol.s[to] < self.sol.bounds.ub
    }

    /// Exact fitness change of moving `ue` to cluster `to`.
    pub fn delta_one_move(&self, ue: usize, to: usize) -> Result<f64, DcpError> {
        if !self.can_move(ue, to) {
            return Err(DcpError::InfeasibleMove {
                ue,
                from: self.sol.p[ue],
                to,
            });
        }
        Ok(self.delta_one_unchecked(ue, to))
    }

    #[inline]
    pub(crate) fn delta_one_unchecked(&self, ue: usize, to: usize) -> f64 {
        let i = self.sol.p[ue];
        let (ci, si) = (self.sol.c[i], self.sol.s[i]);
        let (cj, sj) = (self.sol.c[to], self.sol.s[to]);
        ratio(cj + self.mm.get(ue, to), sj + 1) - ratio(cj, sj) + ratio(ci - self.mm.get(ue, i), si - 1) - ratio(ci, si)
    }

    /// Fitness change of exchanging the clusters of `a` and `b`.
    pub fn delta_swap(&self, a: usize, b: usize, mode: SwapDelta) -> Result<f64, DcpError> {
        if self.sol.p[a] == self.sol.p[b] {
            return Err(DcpError::SameCluster(a, b));
        }
        Ok(self.delta_swap_unchecked(a, b, mode))
    }

    #[inline]
    pub(crate) fn delta_swap_unchecked(&self, a: usize, b: usize, mode: SwapDelta) -> f64 {
        let (i, j) = (self.sol.p[a], self.sol.p[b]);
        let dab = self.dm.get(a, b);
        let dci = self.mm.get(b, i) - self.mm.get(a, i) - dab;
        let dcj = self.mm.get(a, j) - self.mm.get(b, j) - dab;
        match mode {
            SwapDelta::Weighted => dci / self.sol.s[i] as f64 + dcj / self.sol.s[j] as f64,
            SwapDelta::Unweighted => dci + dcj,
        }
    }

    pub fn delta(&self, mv: Move, mode: SwapDelta) -> Result<f64, DcpError> {
        match mv {
            Move::One { ue, to } => self.delta_one_move(ue, to),
            Move::Swap { a, b } => self.delta_swap(a, b, mode),
        }
    }

    /// Moves `ue` to cluster `to`, updating `c`, `s` and `M` in O(K).
    pub fn apply_move(&mut self, ue: usize, to: usize) -> Result<(), DcpError> {
        if !self.can_move(ue, to) {
            return Err(DcpError::InfeasibleMove {
                ue,
                from: self.sol.p[ue],
                to,
            });
        }
        self.relocate(ue, to);
        Ok(())
    }

    fn relocate(&mut self, ue: usize, to: usize) {
        let from = self.sol.p[ue];
        self.sol.c[from] -= self.mm.get(ue, from);
        self.sol.c[to] += self.mm.get(ue, to);
        self.sol.s[from] -= 1;
        self.sol.s[to] += 1;
        self.sol.p[ue] = to;
        self.mm.add_column(from, self.dm, ue, -1.0);
        self.mm.add_column(to, self.dm, ue, 1.0);
    }

    /// Exchanges the clusters of `a` and `b`; sizes are unchanged.
    pub fn apply_swap(&mut self, a: usize, b: usize) -> Result<(), DcpError> {
        let (i, j) = (self.sol.p[a], self.sol.p[b]);
        if i == j {
            return Err(DcpError::SameCluster(a, b));
        }
        let dab = self.dm.get(a, b);
        self.sol.c[i] += self.mm.get(b, i) - self.mm.get(a, i) - dab;
        self.sol.c[j] += self.mm.get(a, j) - self.mm.get(b, j) - dab;
        self.sol.p[a] = j;
        self.sol.p[b] = i;
        self.mm.add_column(i, self.dm, a, -1.0);
        self.mm.add_column(j, self.dm, a, 1.0);
        self.mm.add_column(j, self.dm, b, -1.0);
        self.mm.add_column(i, self.dm, b, 1.0);
        Ok(())
    }

    pub fn apply(&mut self, mv: Move) -> Result<(), DcpError> {
        match mv {
            Move::One { ue, to } => self.apply_move(ue, to),
            Move::Swap { a, b } => self.apply_swap(a, b),
        }
    }
}
