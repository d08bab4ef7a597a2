//! Posterior similarity and the Variation-of-Information point estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorChain;
use crate::partition::GroupPartition;

/// Pairwise co-clustering frequencies, row-major `N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSimilarity {
    n: usize,
    psm: Vec<f64>,
}

impl PosteriorSimilarity {
    pub fn from_partitions(parts: &[&[usize]]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyChain)?;
        let n = first.len();
        let counts = parts
            .par_iter()
            .fold(
                || vec![0u32; n * n],
                |mut acc, g| {
                    for i in 0..n {
                        for j in i + 1..n {
                            if g[i] == g[j] {
                                acc[i * n + j] += 1;
                            }
                        }
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u32; n * n],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let s = parts.len() as f64;
        let mut psm = vec![0.0; n * n];
        for i in 0..n {
            psm[i * n + i] = 1.0;
            for j in i + 1..n {
                let v = counts[i * n + j] as f64 / s;
                psm[i * n + j] = v;
                psm[j * n + i] = v;
            }
        }
        Ok(Self { n, psm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.psm[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.psm[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psm
    }
}

pub fn compute_psm(chain: &PosteriorChain) -> Result<PosteriorSimilarity> {
    let parts: Vec<&[usize]> = chain.draws.iter().map(|d| d.labels.as_slice()).collect();
    PosteriorSimilarity::from_partitions(&parts)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Variation of Information in bits: `2 H(G ^ G') - H(G) - H(G')`.
pub fn variation_of_information(g1: &GroupPartition, g2: &GroupPartition) -> Result<f64> {
    if g1.n() != g2.n() {
        return Err(Error::LengthMismatch(g1.n(), g2.n()));
    }
    let n = g1.n() as f64;
    if g1.n() == 0 {
        return Ok(0.0);
    }
    let mut joint = std::collections::HashMap::new();
    for i in 0..g1.n() {
        *joint.entry((g1.label(i), g2.label(i))).or_insert(0usize) += 1;
    }
    let h1 = entropy(g1.sizes().into_iter(), n);
    let h2 = entropy(g2.sizes().into_iter(), n);
    let h12 = entropy(joint.into_values(), n);
    Ok((2.0 * h12 - h1 - h2).max(0.0))
}

/// `sum_i log2 |block(i)| - 2 sum_i log2 sum_j psm_ij 1(same block)`.
pub fn vi_objective(labels: &[usize], psm: &PosteriorSimilarity) -> f64 {
    let n = labels.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &g in labels {
        sizes[g] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let row = psm.row(i);
        let s: f64 = (0..n).filter(|&j| labels[j] == labels[i]).map(|j| row[j]).sum();
        total += (sizes[labels[i]] as f64).log2() - 2.0 * s.log2();
    }
    total
}

/// Where the chosen partition came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    /// A stored draw, by index.
    Draw(usize),
    /// Local search starting from the given draw.
    LocalSearch { start: usize, moves: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub g_star: GroupPartition,
    pub vi_score: f64,
    pub candidate_source: CandidateSource,
}

/// Local search state: labels plus, for each unit, the PSM mass it shares
/// with every block.
struct Search<'a> {
    psm: &'a PosteriorSimilarity,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    /// `rowsum[i][b] = sum_{j in block b} psm_ij`.
    rowsum: Vec<Vec<f64>>,
}

impl<'a> Search<'a> {
    fn new(labels: &[usize], psm: &'a PosteriorSimilarity) -> Self {
        let n = labels.len();
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        let mut rowsum = vec![vec![0.0; k]; n];
        for (j, &g) in labels.iter().enumerate() {
            sizes[g] += 1;
            for (i, rs) in rowsum.iter_mut().enumerate() {
                rs[g] += psm.get(i, j);
            }
        }
        Self {
            psm,
            labels: labels.to_vec(),
            sizes,
            rowsum,
        }
    }

    fn members(&self, b: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&j| self.labels[j] == b).collect()
    }

    /// Contribution of block `b` to the objective.
    fn block_cost(&self, b: usize) -> f64 {
        let m = self.members(b);
        self.block_cost_of(&m, self.sizes[b], |i| self.rowsum[i][b])
    }

    fn block_cost_of(&self, members: &[usize], size: usize, rs: impl Fn(usize) -> f64) -> f64 {
        if size == 0 {
            return 0.0;
        }
        let ls = (size as f64).log2();
        members.iter().map(|&i| ls - 2.0 * rs(i).log2()).sum()
    }

    /// Change in objective from moving unit `i` into block `to` (which may
    /// be a fresh index `== sizes.len()`).
    fn move_delta(&self, i: usize, to: usize) -> f64 {
        let from = self.labels[i];
        let a = self.members(from);
        let before_a = self.block_cost_of(&a, self.sizes[from], |j| self.rowsum[j][from]);
        let a_new: Vec<usize> = a.iter().copied().filter(|&j| j != i).collect();
        let after_a = self.block_cost_of(&a_new, self.sizes[from] - 1, |j| {
            self.rowsum[j][from] - self.psm.get(j, i)
        });
        let (b, size_b) = if to < self.sizes.len() {
            (self.members(to), self.sizes[to])
        } else {
            (Vec::new(), 0)
        };
        let rs_to = |j: usize| if to < self.sizes.len() { self.rowsum[j][to] } else { 0.0 };
        let before_b = self.block_cost_of(&b, size_b, rs_to);
        let mut b_new = b.clone();
        b_new.push(i);
        let after_b = self.block_cost_of(&b_new, size_b + 1, |j| rs_to(j) + self.psm.get(j, i));
        (after_a + after_b) - (before_a + before_b)
    }

    fn apply_move(&mut self, i: usize, to: usize) {
        let from = self.labels[i];
        if to == self.sizes.len() {
            self.sizes.push(0);
            for rs in &mut self.rowsum {
                rs.push(0.0);
            }
        }
        for j in 0..self.labels.len() {
            let p = self.psm.get(j, i);
            self.rowsum[j][from] -= p;
            self.rowsum[j][to] += p;
        }
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.labels[i] = to;
    }

    fn merge_delta(&self, a: usize, b: usize) -> f64 {
        let ma = self.members(a);
        let mb = self.members(b);
        let before = self.block_cost(a) + self.block_cost(b);
        let mut m = ma.clone();
        m.extend(&mb);
        let after = self.block_cost_of(&m, self.sizes[a] + self.sizes[b], |j| self.rowsum[j][a] + self.rowsum[j][b]);
        after - before
    }

    fn apply_merge(&mut self, a: usize, b: usize) {
        for i in self.members(b) {
            self.apply_move(i, a);
        }
    }

    /// Greedy single-unit moves and block merges until no strict improvement.
    fn run(&mut self) -> usize {
        const EPS: f64 = 1e-10;
        let n = self.labels.len();
        let mut moves = 0;
        loop {
            let mut improved = false;
            for i in 0..n {
                let from = self.labels[i];
                // An empty slot, or a new index, stands for a fresh singleton.
                let fresh = self.sizes.iter().position(|&s| s == 0).unwrap_or(self.sizes.len());
                let mut best = (0.0, from);
                for to in 0..self.sizes.len() {
                    if to != from && self.sizes[to] > 0 {
                        let d = self.move_delta(i, to);
                        if d < best.0 - EPS {
                            best = (d, to);
                        }
                    }
                }
                if self.sizes[from] > 1 {
                    let d = self.move_delta(i, fresh);
                    if d < best.0 - EPS {
                        best = (d, fresh);
                    }
                }
                if best.1 != from {
                    self.apply_move(i, best.1);
                    moves += 1;
                    improved = true;
                }
            }
            let occupied: Vec<usize> = (0..self.sizes.len()).filter(|&b| self.sizes[b] > 0).collect();
            let mut best = (0.0, 0, 0);
            for (x, &a) in occupied.iter().enumerate() {
                for &b in &occupied[x + 1..] {
                    let d = self.merge_delta(a, b);
                    if d < best.0 - EPS {
                        best = (d, a, b);
                    }
                }
            }
            if best.0 < 0.0 {
                self.apply_merge(best.1, best.2);
                moves += 1;
                improved = true;
            }
            if !improved {
                return moves;
            }
        }
    }
}

/// Best stored draw under the VI objective, refined by local search. Ties
/// among draws go to the earliest.
pub fn point_estimate_partition(chain: &PosteriorChain, psm: &PosteriorSimilarity) -> Result<PartitionEstimate> {
    let parts: Vec<&[usize]> = chain.draws.iter().map(|d| d.labels.as_slice()).collect();
    point_estimate_from_draws(&parts, psm)
}

pub fn point_estimate_from_draws(parts: &[&[usize]], psm: &PosteriorSimilarity) -> Result<PartitionEstimate> {
    if parts.is_empty() {
        return Err(Error::EmptyChain);
    }
    // Distinct draws only; the first occurrence keeps its index.
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<(usize, &[usize])> = parts
        .iter()
        .enumerate()
        .filter(|(_, g)| seen.insert(g.to_vec()))
        .map(|(s, g)| (s, *g))
        .collect();
    let scores: Vec<f64> = unique.par_iter().map(|(_, g)| vi_objective(g, psm)).collect();
    let mut best = 0;
    for k in 1..unique.len() {
        if scores[k] < scores[best] {
            best = k;
        }
    }
    let (start, labels) = unique[best];
    let start_score = scores[best];
    let mut search = Search::new(labels, psm);
    let moves = search.run();
    let g_star = GroupPartition::from_labels(&search.labels);
    let refined = vi_objective(g_star.labels(), psm);
    debug_assert!(refined <= start_score + 1e-9, "local search increased the objective");
    let (g_star, vi_score, candidate_source) = if moves > 0 && refined < start_score {
        (g_star, refined, CandidateSource::LocalSearch { start, moves })
    } else {
        (GroupPartition::from_labels(labels), start_score, CandidateSource::Draw(start))
    };
    Ok(PartitionEstimate {
        g_star,
        vi_score,
        candidate_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gp(l: &[usize]) -> GroupPartition {
        GroupPartition::from_labels(l)
    }

    #[test]
    fn vi_hand_values() {
        assert_abs_diff_eq!(variation_of_information(&gp(&[0, 0, 1, 1]), &gp(&[0, 1, 0, 1])).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(variation_of_information(&gp(&[0, 0, 0, 0]), &gp(&[0, 1, 2, 3])).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(variation_of_information(&gp(&[0, 1, 1]), &gp(&[5, 2, 2])).unwrap(), 0.0);
        assert!(matches!(
            variation_of_information(&gp(&[0, 1]), &gp(&[0])),
            Err(Error::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn psm_counts() {
        let a = [0usize, 0, 1];
        let b = [0usize, 1, 1];
        let psm = PosteriorSimilarity::from_partitions(&[&a, &b]).unwrap();
        assert_eq!(psm.get(0, 1), 0.5);
        assert_eq!(psm.get(1, 2), 0.5);
        assert_eq!(psm.get(0, 2), 0.0);
        assert_eq!(psm.get(2, 2), 1.0);
        assert!(PosteriorSimilarity::from_partitions(&[]).is_err());
    }

    #[test]
    fn objective_by_hand() {
        // Draws (1,1,2) and (1,2,2): psm_12 = psm_23 = 0.5, psm_13 = 0.
        let a = [0usize, 0, 1];
        let b = [0usize, 1, 1];
        let psm = PosteriorSimilarity::from_partitions(&[&a, &b]).unwrap();
        // Candidate (1,1,2): units 1,2 have block size 2 and mass 1.5; unit 3
        // has size 1 and mass 1.
        let want = 2.0 * (2f64.log2() - 2.0 * 1.5f64.log2()) + (1f64.log2() - 2.0 * 1f64.log2());
        assert_abs_diff_eq!(vi_objective(&a, &psm), want, epsilon = 1e-12);
        // Relabelling leaves the objective unchanged.
        assert_abs_diff_eq!(vi_objective(&[1, 1, 0], &psm), want, epsilon = 1e-12);
    }

    #[test]
    fn concentrated_chain() {
        let g = [0usize, 0, 1, 1, 2];
        let parts: Vec<&[usize]> = vec![&g; 5];
        let psm = PosteriorSimilarity::from_partitions(&parts).unwrap();
        let est = point_estimate_from_draws(&parts, &psm).unwrap();
        assert_eq!(est.g_star, gp(&g));
        assert_eq!(est.candidate_source, CandidateSource::Draw(0));
    }
}
