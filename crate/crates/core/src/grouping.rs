//! Predictor groups and orderings from hierarchical clustering of the
//! predictor correlation matrix.

use std::str::FromStr;

use kodama::{Method, linkage};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Partition of predictors into `k` non-empty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl GroupAssignment {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("group assignment over zero predictors"));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("group {empty} is empty")));
        }
        Ok(Self { labels, sizes })
    }

    /// Every predictor in its own group.
    pub fn singletons(m: usize) -> Self {
        Self {
            labels: (0..m).collect(),
            sizes: vec![1; m],
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member indices of each group, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (j, &l) in self.labels.iter().enumerate() {
            out[l].push(j);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(Error::invalid(format!("unknown linkage `{other}`"))),
        }
    }
}

/// Pearson correlation of the columns of `x`. Constant columns correlate 0
/// with everything else and keep a unit diagonal.
pub fn correlation_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = x.shape();
    let mut centered = x.clone();
    let mut scale = vec![0.0; m];
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        scale[j] = if norm > f64::EPSILON * mean.abs().max(1.0) * (n as f64).sqrt() {
            norm
        } else {
            0.0
        };
    }
    let mut c = DMatrix::identity(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let r = if scale[i] == 0.0 || scale[j] == 0.0 {
                0.0
            } else {
                (centered.column(i).dot(&centered.column(j)) / (scale[i] * scale[j])).clamp(-1.0, 1.0)
            };
            c[(i, j)] = r;
            c[(j, i)] = r;
        }
    }
    c
}

/// Agglomerative clustering of the rows of `c` under Euclidean distance, cut
/// to exactly `k` clusters. Labels are numbered by the smallest member index.
pub fn cluster_predictors(c: &DMatrix<f64>, k: usize, method: Linkage) -> Result<GroupAssignment> {
    let m = c.nrows();
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k = {k} outside 1..={m}")));
    }
    let mut condensed = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            condensed.push((c.row(i) - c.row(j)).norm());
        }
    }
    let method = match method {
        Linkage::Average => Method::Average,
        Linkage::Complete => Method::Complete,
        Linkage::Single => Method::Single,
    };
    let dendrogram = if m > 1 {
        Some(linkage(&mut condensed, m, method))
    } else {
        None
    };

    // Apply the first m - k merges with union-find over kodama's cluster ids.
    let mut parent: Vec<usize> = (0..2 * m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    if let Some(d) = &dendrogram {
        for (step, s) in d.steps().iter().take(m - k).enumerate() {
            let new = m + step;
            let a = find(&mut parent, s.cluster1);
            let b = find(&mut parent, s.cluster2);
            parent[a] = new;
            parent[b] = new;
        }
    }

    let mut root_label = std::collections::HashMap::new();
    let labels = (0..m)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = root_label.len();
            *root_label.entry(root).or_insert(next)
        })
        .collect();
    GroupAssignment::new(labels)
}

/// Permutation placing same-group predictors next to each other: blocks in
/// group-id order, ascending original index within a block.
pub fn order_predictors(assignment: &GroupAssignment) -> Vec<usize> {
    assignment.members().into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_and_negated_columns() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, -1.0, 2.0, 2.0, -2.0, 0.5, 0.5, -0.5, 3.0, 3.0, -3.0]);
        let c = correlation_matrix(&x);
        assert!((c[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((c[(0, 2)] + 1.0).abs() < 1e-12);
        assert_eq!(c, c.transpose());
    }

    #[test]
    fn constant_column_has_zero_correlation() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 4.0, 3.0, 4.0]);
        let c = correlation_matrix(&x);
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c[(1, 1)], 1.0);
    }

    #[test]
    fn independent_columns_are_nearly_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(10_000, 4, |_, _| StandardNormal.sample(&mut rng));
        let c = correlation_matrix(&x);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(c[(i, j)].abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn scaling_a_column_leaves_correlations_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(30, 3, |_, _| StandardNormal.sample(&mut rng));
        let mut scaled = x.clone();
        scaled.column_mut(1).scale_mut(37.5);
        assert!((correlation_matrix(&x) - correlation_matrix(&scaled)).amax() < 1e-12);
    }

    #[test]
    fn full_and_empty_cuts() {
        let c = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { 0.1 * (i + j) as f64 });
        let all = cluster_predictors(&c, 5, Linkage::Average).unwrap();
        assert_eq!(all.labels(), [0, 1, 2, 3, 4]);
        let one = cluster_predictors(&c, 1, Linkage::Average).unwrap();
        assert_eq!(one.sizes(), [5]);
        assert!(cluster_predictors(&c, 0, Linkage::Average).is_err());
        assert!(cluster_predictors(&c, 6, Linkage::Average).is_err());
    }

    #[test]
    fn two_perfect_blocks_are_recovered() {
        let block = [0, 1, 0, 1, 1, 0];
        let c = DMatrix::from_fn(6, 6, |i, j| if block[i] == block[j] { 1.0 } else { 0.0 });
        for method in [Linkage::Average, Linkage::Complete, Linkage::Single] {
            let g = cluster_predictors(&c, 2, method).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    assert_eq!(g.labels()[i] == g.labels()[j], block[i] == block[j]);
                }
            }
        }
    }

    #[test]
    fn ordering_groups_predictors_contiguously() {
        let g = GroupAssignment::new(vec![1, 0, 1]).unwrap();
        assert_eq!(order_predictors(&g), [1, 0, 2]);
        let one = GroupAssignment::new(vec![0; 4]).unwrap();
        assert_eq!(order_predictors(&one), [0, 1, 2, 3]);
    }

    #[test]
    fn rejects_empty_groups() {
        assert!(GroupAssignment::new(vec![0, 2]).is_err());
    }
}
