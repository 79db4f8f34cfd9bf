//! Problem dimensions and subspace partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of one convolutive mixing problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Dimension of each hidden component.
    pub d: usize,
    /// Number of hidden components.
    pub m: usize,
    /// Observation dimension.
    pub dx: usize,
    /// Degree of the mixing filter (convolution length is `l + 1`).
    pub l: usize,
    /// Number of samples.
    pub t: usize,
}

impl ModelDims {
    pub fn new(d: usize, m: usize, dx: usize, l: usize, t: usize) -> Result<Self> {
        let dims = ModelDims { d, m, dx, l, t };
        dims.validate()?;
        Ok(dims)
    }

    /// Observation dimension twice the source dimension.
    pub fn doubled(d: usize, m: usize, l: usize, t: usize) -> Result<Self> {
        Self::new(d, m, 2 * d * m, l, t)
    }

    pub fn ds(&self) -> usize {
        self.d * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.t == 0 {
            return Err(Error::InvalidArgument(format!(
                "d, M and T must be positive: {self:?}"
            )));
        }
        if self.dx <= self.ds() {
            return Err(Error::InvalidArgument(format!(
                "only the undercomplete case is supported: D_x = {} must exceed D_s = {}",
                self.dx,
                self.ds()
            )));
        }
        Ok(())
    }

    /// Whether `T` exceeds the `(L+1)·D_x` estimation floor.
    pub fn has_enough_samples(&self) -> bool {
        self.t > (self.l + 1) * self.dx
    }

    /// AR candidate order cap `2(L+1)`.
    pub fn ar_order_cap(&self) -> usize {
        2 * (self.l + 1)
    }
}

/// Assignment of `D_s` one-dimensional channels to `M` groups of `d` channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    num_groups: usize,
    group_dim: usize,
    assignment: Vec<usize>,
}

impl Partition {
    pub fn new(num_groups: usize, group_dim: usize, assignment: Vec<usize>) -> Result<Self> {
        if num_groups == 0 || group_dim == 0 {
            return Err(Error::InvalidArgument("empty partition".into()));
        }
        if assignment.len() != num_groups * group_dim {
            return Err(Error::Dimension {
                context: "partition assignment",
                expected: num_groups * group_dim,
                actual: assignment.len(),
            });
        }
        let mut counts = vec![0usize; num_groups];
        for &g in &assignment {
            if g >= num_groups {
                return Err(Error::InvalidArgument(format!("group index {g} out of range")));
            }
            counts[g] += 1;
        }
        if counts.iter().any(|&c| c != group_dim) {
            return Err(Error::InvalidArgument(format!(
                "every group needs exactly {group_dim} members, got sizes {counts:?}"
            )));
        }
        Ok(Partition {
            num_groups,
            group_dim,
            assignment,
        })
    }

    /// Consecutive blocks: channels `[k·d, (k+1)·d)` form group `k`.
    pub fn contiguous(num_groups: usize, group_dim: usize) -> Self {
        let assignment = (0..num_groups * group_dim).map(|i| i / group_dim).collect();
        Partition {
            num_groups,
            group_dim,
            assignment,
        }
    }

    /// Builds a partition from explicit member lists, renumbering groups so
    /// that they are ordered by their smallest member.
    pub fn from_groups(groups: &[Vec<usize>]) -> Result<Self> {
        let group_dim = groups.first().map_or(0, Vec::len);
        let n: usize = groups.iter().map(Vec::len).sum();
        let mut sorted: Vec<Vec<usize>> = groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.sort_unstable();
                g
            })
            .collect();
        sorted.sort();
        let mut assignment = vec![usize::MAX; n];
        for (k, g) in sorted.iter().enumerate() {
            for &c in g {
                if c >= n || assignment[c] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "channel {c} missing or repeated"
                    )));
                }
                assignment[c] = k;
            }
        }
        Self::new(groups.len(), group_dim, assignment)
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn group_dim(&self) -> usize {
        self.group_dim
    }

    pub fn num_channels(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Members of every group, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::with_capacity(self.group_dim); self.num_groups];
        for (c, &g) in self.assignment.iter().enumerate() {
            groups[g].push(c);
        }
        groups
    }

    /// Channel order that lists group 0 first, then group 1, and so on.
    pub fn ordering(&self) -> Vec<usize> {
        self.groups().into_iter().flatten().collect()
    }

    /// Same grouping regardless of group labels.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        let canon = |p: &Partition| {
            let mut g = p.groups();
            g.sort();
            g
        };
        canon(self) == canon(other)
    }
}
