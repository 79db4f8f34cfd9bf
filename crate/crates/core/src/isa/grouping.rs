//! Grouping of ICA outputs into dependent subspaces.
//!
//! Channels that belong to one multidimensional component stay dependent after
//! ICA even though they are uncorrelated. Dependence is scored with
//! correlations of nonlinear transforms, and the partition into equally sized
//! groups with the largest within-group score is selected.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fir::LinearMap;
use crate::linalg::permutation_matrix;
use crate::model::Partition;
use crate::series::TimeSeries;

/// Exhaustive search is used when the number of candidate partitions is at most this.
pub const EXHAUSTIVE_LIMIT: f64 = 1e5;
const MAX_SWAP_ROUNDS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingOutcome {
    pub partition: Partition,
    /// Permutation bringing the members of each group next to each other.
    pub permutation: LinearMap,
    /// Within-group dependence mass of the chosen partition.
    pub objective: f64,
    pub exhaustive: bool,
    /// Objective after greedy seeding and after each accepted swap.
    pub trajectory: Vec<f64>,
}

fn nonlinearity_bank() -> [fn(f64) -> f64; 3] {
    [|u| u * u, f64::abs, f64::tanh]
}

/// `S_ij = max_f |corr(f(y_i), f(y_j))|` over `f ∈ {u², |u|, tanh u}`; zero diagonal.
pub fn dependence_matrix(y: &TimeSeries) -> DMatrix<f64> {
    let n = y.dim();
    let tf = y.len() as f64;
    let mut s = DMatrix::<f64>::zeros(n, n);
    for f in nonlinearity_bank() {
        let mut fy = y.values().map(f);
        for mut row in fy.row_iter_mut() {
            let mean = row.sum() / tf;
            row.add_scalar_mut(-mean);
            let sd = (row.norm_squared() / tf).sqrt();
            if sd > 0.0 {
                row /= sd;
            } else {
                row.fill(0.0);
            }
        }
        let corr = &fy * fy.transpose() / tf;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s[(i, j)] = s[(i, j)].max(corr[(i, j)].abs());
                }
            }
        }
    }
    s
}

pub fn within_group_mass(s: &DMatrix<f64>, groups: &[Vec<usize>]) -> f64 {
    groups
        .iter()
        .map(|g| {
            let mut acc = 0.0;
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    acc += s[(i, j)];
                }
            }
            acc
        })
        .sum()
}

/// Number of ways to split `m·d` labelled channels into `m` unlabelled groups of `d`.
pub fn partition_count(d: usize, m: usize) -> f64 {
    let n = d * m;
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    (0..m).map(|k| binom(n - k * d - 1, d - 1)).product()
}

struct Exhaustive<'a> {
    s: &'a DMatrix<f64>,
    d: usize,
    used: Vec<bool>,
    groups: Vec<Vec<usize>>,
    best: Option<(f64, Vec<Vec<usize>>)>,
}

impl Exhaustive<'_> {
    fn recurse(&mut self, mass: f64) {
        let Some(first) = self.used.iter().position(|u| !u) else {
            if self.best.as_ref().is_none_or(|(b, _)| mass > *b) {
                self.best = Some((mass, self.groups.clone()));
            }
            return;
        };
        self.used[first] = true;
        let mut group = vec![first];
        self.extend(first + 1, &mut group, mass);
        self.used[first] = false;
    }

    /// Completes `group` with members chosen in lexicographic order.
    fn extend(&mut self, from: usize, group: &mut Vec<usize>, mass: f64) {
        if group.len() == self.d {
            self.groups.push(group.clone());
            self.recurse(mass);
            self.groups.pop();
            return;
        }
        for c in from..self.used.len() {
            if self.used[c] {
                continue;
            }
            let gain: f64 = group.iter().map(|&g| self.s[(g, c)]).sum();
            self.used[c] = true;
            group.push(c);
            self.extend(c + 1, group, mass + gain);
            group.pop();
            self.used[c] = false;
        }
    }
}

fn exhaustive_groups(s: &DMatrix<f64>, d: usize) -> Vec<Vec<usize>> {
    let mut search = Exhaustive {
        s,
        d,
        used: vec![false; s.nrows()],
        groups: Vec::new(),
        best: None,
    };
    search.recurse(0.0);
    search.best.expect("at least one partition").1
}

/// Seeds each group with the most dependent free pair and grows it with the
/// channel most dependent on the current members.
fn greedy_groups(s: &DMatrix<f64>, d: usize) -> Vec<Vec<usize>> {
    let n = s.nrows();
    let mut free: Vec<bool> = vec![true; n];
    let mut groups = Vec::with_capacity(n / d);
    while let Some(first_free) = free.iter().position(|&f| f) {
        if d == 1 {
            free[first_free] = false;
            groups.push(vec![first_free]);
            continue;
        }
        let mut seed = None;
        for i in 0..n {
            for j in i + 1..n {
                if free[i] && free[j] && seed.is_none_or(|(_, _, v)| s[(i, j)] > v) {
                    seed = Some((i, j, s[(i, j)]));
                }
            }
        }
        let (i, j, _) = seed.expect("at least two free channels");
        free[i] = false;
        free[j] = false;
        let mut group = vec![i, j];
        while group.len() < d {
            let (k, _) = (0..n)
                .filter(|&k| free[k])
                .map(|k| (k, group.iter().map(|&g| s[(g, k)]).sum::<f64>()))
                .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((k, v)),
                })
                .expect("enough free channels");
            free[k] = false;
            group.push(k);
        }
        groups.push(group);
    }
    groups
}

/// Steepest-ascent pairwise swaps between groups until no swap helps.
/// Returns the objective after each accepted swap.
fn hill_climb(s: &DMatrix<f64>, groups: &mut [Vec<usize>]) -> Vec<f64> {
    let mut trajectory = Vec::new();
    let mut current = within_group_mass(s, groups);
    for _ in 0..MAX_SWAP_ROUNDS {
        let mut best: Option<(usize, usize, usize, usize, f64)> = None;
        for ga in 0..groups.len() {
            for gb in ga + 1..groups.len() {
                for (ia, &a) in groups[ga].iter().enumerate() {
                    for (ib, &b) in groups[gb].iter().enumerate() {
                        let delta: f64 = groups[ga]
                            .iter()
                            .filter(|&&g| g != a)
                            .map(|&g| s[(b, g)] - s[(a, g)])
                            .sum::<f64>()
                            + groups[gb]
                                .iter()
                                .filter(|&&h| h != b)
                                .map(|&h| s[(a, h)] - s[(b, h)])
                                .sum::<f64>();
                        if delta > 1e-12 && best.is_none_or(|(.., v)| delta > v) {
                            best = Some((ga, ia, gb, ib, delta));
                        }
                    }
                }
            }
        }
        let Some((ga, ia, gb, ib, _)) = best else {
            break;
        };
        let a = groups[ga][ia];
        groups[ga][ia] = groups[gb][ib];
        groups[gb][ib] = a;
        let next = within_group_mass(s, groups);
        debug_assert!(next >= current - 1e-12);
        current = next;
        trajectory.push(current);
    }
    trajectory
}

/// Partitions a precomputed dependence matrix.
pub fn group_by_dependence(s: &DMatrix<f64>, d: usize, m: usize) -> Result<GroupingOutcome> {
    let n = s.nrows();
    if d == 0 || n != d * m || s.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} channels into {m} groups of {d}"
        )));
    }
    let exhaustive = partition_count(d, m) <= EXHAUSTIVE_LIMIT;
    let (groups, trajectory) = if exhaustive {
        let g = exhaustive_groups(s, d);
        let obj = within_group_mass(s, &g);
        (g, vec![obj])
    } else {
        let mut g = greedy_groups(s, d);
        let mut trajectory = vec![within_group_mass(s, &g)];
        trajectory.extend(hill_climb(s, &mut g));
        (g, trajectory)
    };
    let partition = Partition::from_groups(&groups)?;
    let objective = within_group_mass(s, &partition.groups());
    let permutation = LinearMap::new(permutation_matrix(&partition.ordering()))?;
    Ok(GroupingOutcome {
        partition,
        permutation,
        objective,
        exhaustive,
        trajectory,
    })
}

/// Groups the channels of `y` into `m` subspaces of dimension `d`.
pub fn group_components(y: &TimeSeries, d: usize, m: usize) -> Result<GroupingOutcome> {
    if d == 0 || y.dim() % d != 0 || y.dim() / d != m {
        return Err(Error::InvalidArgument(format!(
            "{} channels are not {m} groups of dimension {d}",
            y.dim()
        )));
    }
    group_by_dependence(&dependence_matrix(y), d, m)
}
