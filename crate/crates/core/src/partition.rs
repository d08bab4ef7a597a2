//! Partitions of `{0..N}` into labelled blocks.

use serde::{Deserialize, Serialize};

/// A partition stored in canonical form: blocks are numbered `0..K` in order
/// of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupPartition {
    labels: Vec<usize>,
    k: usize,
}

impl GroupPartition {
    /// Canonicalizes arbitrary labels.
    pub fn from_labels(raw: &[usize]) -> Self {
        let (labels, k) = canonicalize(raw);
        Self { labels, k }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            k: n,
        }
    }

    pub fn one_block(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of nonempty blocks.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Labels shifted to `1..=K` for output.
    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|g| g + 1).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &g in &self.labels {
            s[g] += 1;
        }
        s
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut b = vec![Vec::new(); self.k];
        for (i, &g) in self.labels.iter().enumerate() {
            b[g].push(i);
        }
        b
    }

    pub fn same(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }
}

/// Relabels by first appearance; returns the labels and the block count.
pub fn canonicalize(raw: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let labels = raw
        .iter()
        .map(|&g| {
            let next = map.len();
            *map.entry(g).or_insert(next)
        })
        .collect();
    (labels, map.len())
}

/// Every set partition of `{0..n}`, generated as restricted growth strings.
pub fn enumerate_partitions(n: usize) -> Vec<GroupPartition> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut a = vec![0usize; n];
    let mut max = vec![0usize; n];
    loop {
        out.push(GroupPartition::from_labels(&a));
        // Find the rightmost position that can be incremented.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= max[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        max[i] = max[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 0;
            max[j] = max[i];
        }
    }
}
