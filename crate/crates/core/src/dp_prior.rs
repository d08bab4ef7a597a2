//! Dirichlet-process partition prior, with and without constraint tilting.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::constraints::{weight_from, ConstraintSet, LinkType};
use crate::error::{Error, Result};
use crate::partition::GroupPartition;

/// Stick lengths `xi` and the implied group probabilities `pi`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StickWeights {
    xi: Vec<f64>,
    pi: Vec<f64>,
    /// `leftover[k] = prod_{j <= k} (1 - xi_j)`.
    leftover: Vec<f64>,
}

impl StickWeights {
    pub fn from_xi(xi: Vec<f64>) -> Self {
        let mut s = Self::default();
        for x in xi {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, xi: f64) {
        let prev = self.leftover.last().copied().unwrap_or(1.0);
        self.xi.push(xi);
        self.pi.push(xi * prev);
        self.leftover.push(prev * (1.0 - xi));
    }

    pub fn truncate(&mut self, k: usize) {
        self.xi.truncate(k);
        self.pi.truncate(k);
        self.leftover.truncate(k);
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `1 - sum_{j < k} pi_j` for the first `k` sticks (1 when `k = 0`).
    pub fn leftover(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.leftover[k - 1]
        }
    }
}

/// Concentration, its Gamma hyperprior and the base measure for group
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpHyper {
    /// Starting (or fixed) concentration.
    pub a: f64,
    /// Gamma hyperprior shape.
    pub m: f64,
    /// Gamma hyperprior rate.
    pub n: f64,
    /// Resample `a` each sweep.
    pub update_a: bool,
    pub mu_alpha: Vec<f64>,
    /// Row-major `p x p` prior covariance.
    pub sigma_alpha: Vec<f64>,
    /// Use a flat prior on group coefficients (fixed partitions only).
    pub flat_alpha: bool,
    /// Inverse-gamma prior on variances is IG(nu_sigma / 2, delta_sigma / 2).
    pub nu_sigma: f64,
    pub delta_sigma: f64,
    /// Prior variance of each common coefficient (prior mean zero).
    pub gamma_var: f64,
}

impl DpHyper {
    /// Default hyperparameters for `p` group-specific coefficients.
    pub fn default_for(p: usize) -> Self {
        let mut sigma_alpha = vec![0.0; p * p];
        for c in 0..p {
            sigma_alpha[c * p + c] = 1.0;
        }
        Self {
            a: 0.4 / 10.0,
            m: 0.4,
            n: 10.0,
            update_a: true,
            mu_alpha: vec![0.0; p],
            sigma_alpha,
            flat_alpha: false,
            nu_sigma: 12.0,
            delta_sigma: 10.0,
            gamma_var: 1.0,
        }
    }

    pub fn p(&self) -> usize {
        self.mu_alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.sigma_alpha.len() != p * p {
            return Err(Error::Config("sigma_alpha must be p x p".into()));
        }
        if !(self.a > 0.0 && self.m > 0.0 && self.n > 0.0) {
            return Err(Error::Config("a, m and n must be positive".into()));
        }
        if !(self.nu_sigma > 0.0 && self.delta_sigma > 0.0 && self.gamma_var > 0.0) {
            return Err(Error::Config("variance hyperparameters must be positive".into()));
        }
        for r in 0..p {
            for c in 0..r {
                if (self.sigma_alpha[r * p + c] - self.sigma_alpha[c * p + r]).abs() > 1e-12 {
                    return Err(Error::Config("sigma_alpha must be symmetric".into()));
                }
            }
        }
        let m = nalgebra::DMatrix::from_row_slice(p, p, &self.sigma_alpha);
        if m.cholesky().is_none() {
            return Err(Error::Config("sigma_alpha must be positive definite".into()));
        }
        Ok(())
    }
}

/// Log of the Dirichlet-process EPPF,
/// `ln[Gamma(a) / Gamma(a + N) * a^K * prod_k Gamma(|B_k|)]`.
pub fn log_eppf(partition: &GroupPartition, a: f64) -> f64 {
    let n = partition.n() as f64;
    let sizes = partition.sizes();
    ln_gamma(a) - ln_gamma(a + n)
        + sizes.len() as f64 * a.ln()
        + sizes.iter().map(|&s| ln_gamma(s as f64)).sum::<f64>()
}

/// EPPF plus the constraint tilt; not normalized.
pub fn log_constrained_prior_unnormalized(partition: &GroupPartition, a: f64, cs: &ConstraintSet) -> f64 {
    log_eppf(partition, a) + cs.tilt(partition.labels())
}

/// `Pr(g_1 = g_2)` for two units with one constraint, under `a = 1`.
pub fn two_unit_same_group_prob(psi: f64, ctype: LinkType, c: f64) -> Result<f64> {
    let w = weight_from(ctype, psi)?;
    Ok(1.0 / (1.0 + (-4.0 * c * w).exp()))
}

/// Antoniak approximations to the mean and variance of the number of groups
/// among `n` draws.
pub fn expected_k(a: f64, n: usize) -> (f64, f64) {
    let n = n as f64;
    let l = ((a + n) / a).ln();
    (a * l, a * (l - n / (a + n)))
}

/// Pólya-urn draw from the unconstrained prior.
pub fn polya_urn<R: Rng + ?Sized>(n: usize, a: f64, rng: &mut R) -> GroupPartition {
    let mut labels = Vec::with_capacity(n);
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let u = rng.random::<f64>() * (i as f64 + a);
        let mut acc = 0.0;
        let mut chosen = counts.len();
        for (k, &c) in counts.iter().enumerate() {
            acc += c as f64;
            if u < acc {
                chosen = k;
                break;
            }
        }
        if chosen == counts.len() {
            counts.push(0);
        }
        counts[chosen] += 1;
        labels.push(chosen);
    }
    GroupPartition::from_labels(&labels)
}

/// Single-site Gibbs sampler on the constrained prior. An existing block `k`
/// has weight `n_k^{(-i)}`, a new block weight `a`, each multiplied by the
/// unit's constraint term.
#[derive(Debug, Clone)]
pub struct PriorGibbs<'a> {
    a: f64,
    cs: &'a ConstraintSet,
    labels: Vec<usize>,
    counts: Vec<usize>,
    free: Vec<usize>,
    logw: Vec<f64>,
}

/// Blocks of units joined by positive links with accuracy above 1/2; other
/// units are singletons. Labels are canonical.
pub fn linked_components(cs: &ConstraintSet) -> GroupPartition {
    let n = cs.n_units();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for c in cs.constraints() {
        if c.ctype == LinkType::PositiveLink && c.accuracy > 0.5 {
            let (a, b) = (root(&mut parent, c.i), root(&mut parent, c.j));
            parent[a.max(b)] = a.min(b);
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| root(&mut parent, i)).collect();
    GroupPartition::from_labels(&labels)
}

impl<'a> PriorGibbs<'a> {
    /// Starts from the positively linked components. Single-site moves cannot
    /// split a large block along a pre-grouping, so a start from singletons
    /// can coalesce into one block and stay there under strong constraints.
    pub fn new(n: usize, a: f64, cs: &'a ConstraintSet) -> Self {
        let start = if cs.n_units() == n {
            linked_components(cs)
        } else {
            GroupPartition::singletons(n)
        };
        Self {
            a,
            cs,
            labels: start.labels().to_vec(),
            counts: start.sizes(),
            free: Vec::new(),
            logw: Vec::new(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn partition(&self) -> GroupPartition {
        GroupPartition::from_labels(&self.labels)
    }

    pub fn update_unit<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) {
        let old = self.labels[i];
        self.counts[old] -= 1;
        if self.counts[old] == 0 {
            self.free.push(old);
        }
        // Slot used if unit i opens a new block.
        let fresh = self.free.last().copied().unwrap_or(self.counts.len());
        let active = self.cs.is_active(i);
        self.logw.clear();
        let mut cands = Vec::with_capacity(self.counts.len() + 1);
        for (k, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                let mut lw = (c as f64).ln();
                if active {
                    lw += self.cs.candidate_term(i, k, &self.labels);
                }
                cands.push(k);
                self.logw.push(lw);
            }
        }
        let mut lw_new = self.a.ln();
        if active {
            lw_new += self.cs.candidate_term(i, usize::MAX, &self.labels);
        }
        cands.push(fresh);
        self.logw.push(lw_new);

        let pick = sample_log_weights(&self.logw, rng);
        let k = cands[pick];
        if k == fresh {
            if self.free.last() == Some(&fresh) {
                self.free.pop();
            } else {
                self.counts.push(0);
            }
        }
        self.counts[k] += 1;
        self.labels[i] = k;
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.labels.len() {
            self.update_unit(i, rng);
        }
    }
}

/// Index drawn with probability proportional to `exp(logw)`.
pub fn sample_log_weights<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|&l| (l - max).exp()).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &l) in logw.iter().enumerate() {
        acc += (l - max).exp();
        if u < acc {
            return k;
        }
    }
    // Rounding can leave u at the very top; take the last positive entry.
    logw.iter().rposition(|&l| l > f64::NEG_INFINITY).unwrap_or(0)
}

/// One draw from the prior. Constrained priors run `100 * n` single-site
/// updates from the positively linked components.
pub fn simulate_prior_partition<R: Rng + ?Sized>(
    n: usize,
    a: f64,
    cs: &ConstraintSet,
    rng: &mut R,
) -> GroupPartition {
    if cs.is_neutral() || n < 2 {
        return polya_urn(n, a, rng);
    }
    let mut g = PriorGibbs::new(n, a, cs);
    for _ in 0..100 {
        g.sweep(rng);
    }
    g.partition()
}

/// Fraction of prior draws placing each pair together, row-major `N x N`.
/// Constrained priors record one draw per sweep after a burn-in of 100 sweeps.
pub fn prior_similarity_matrix<R: Rng + ?Sized>(
    n: usize,
    a: f64,
    cs: &ConstraintSet,
    n_draws: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut counts = vec![0u64; n * n];
    let mut record = |labels: &[usize]| {
        for i in 0..n {
            for j in i..n {
                if labels[i] == labels[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    };
    if cs.is_neutral() {
        for _ in 0..n_draws {
            record(polya_urn(n, a, rng).labels());
        }
    } else {
        let mut g = PriorGibbs::new(n, a, cs);
        for _ in 0..100 {
            g.sweep(rng);
        }
        for _ in 0..n_draws {
            g.sweep(rng);
            record(g.labels());
        }
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = counts[i * n + j] as f64 / n_draws as f64;
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    m
}
