//! Pairwise-constrained k-means, the constrained grouped fixed-effects
//! estimator built on it, and a small-variance comparison with the Gibbs
//! assignment step.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, LinkType};
use crate::dp_prior::sample_log_weights;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::panel::PanelDataset;
use crate::rng;

/// Violation costs per constrained pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCosts {
    n: usize,
    entries: Vec<(usize, usize, LinkType, f64)>,
    nbrs: Vec<Vec<(usize, LinkType, f64)>>,
}

impl PairCosts {
    pub fn new(n: usize, entries: Vec<(usize, usize, LinkType, f64)>) -> Result<Self> {
        let mut nbrs = vec![Vec::new(); n];
        for &(i, j, t, w) in &entries {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidConstraint(format!("bad pair ({i}, {j})")));
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidConstraint(format!("negative cost {w}")));
            }
            nbrs[i].push((j, t, w));
            nbrs[j].push((i, t, w));
        }
        Ok(Self { n, entries, nbrs })
    }

    pub fn none(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
            nbrs: vec![Vec::new(); n],
        }
    }

    /// Costs `factor * |W_ij|` for every constraint.
    pub fn from_constraints(cs: &ConstraintSet, factor: f64) -> Result<Self> {
        let entries = cs
            .constraints()
            .iter()
            .map(|c| Ok((c.i, c.j, c.ctype, factor * c.weight()?.abs())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cs.n_units(), entries)
    }

    /// Costs under which the k-means objective and the Gibbs log-mass (with
    /// weights divided by the variance) differ by a partition-free constant:
    /// `w = 4 c |W|`.
    pub fn kmeans_equivalent(cs: &ConstraintSet) -> Result<Self> {
        Self::from_constraints(cs, 4.0 * cs.strength())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn violated(t: LinkType, same: bool) -> bool {
        match t {
            LinkType::PositiveLink => !same,
            LinkType::NegativeLink => same,
        }
    }

    /// Total violation cost of a labelling.
    pub fn penalty(&self, labels: &[usize]) -> f64 {
        self.entries
            .iter()
            .filter(|&&(i, j, t, _)| Self::violated(t, labels[i] == labels[j]))
            .map(|e| e.3)
            .sum()
    }

    /// Cost incurred by unit `i` sitting in block `k`, given everyone else.
    pub fn unit_penalty(&self, i: usize, k: usize, labels: &[usize]) -> f64 {
        self.nbrs[i]
            .iter()
            .filter(|&&(j, t, _)| Self::violated(t, labels[j] == k))
            .map(|e| e.2)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 100,
            tol: 1e-10,
            restarts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KmeansInit {
    PlusPlus,
    Random,
    /// Row-major `K x d` centroids.
    Centroids(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansState {
    pub labels: Vec<usize>,
    /// Row-major `K x d`.
    pub centroids: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Empty clusters reseeded during the run.
    pub repairs: usize,
    /// Objective after each assignment and each update step.
    pub trajectory: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `1/2 sum_i ||x_i - mu_{g_i}||^2` plus violation costs.
pub fn kmeans_objective(points: &[f64], d: usize, labels: &[usize], centroids: &[f64], costs: &PairCosts) -> f64 {
    let wcss: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &g)| sq_dist(&points[i * d..(i + 1) * d], &centroids[g * d..(g + 1) * d]))
        .sum();
    0.5 * wcss + costs.penalty(labels)
}

/// Sequential constrained assignment; ties go to the lowest block index.
pub fn assignment_step(points: &[f64], d: usize, centroids: &[f64], costs: &PairCosts, labels: &mut [usize]) {
    let k = centroids.len() / d;
    for i in 0..labels.len() {
        let x = &points[i * d..(i + 1) * d];
        let mut best = (f64::INFINITY, 0);
        for c in 0..k {
            let cost = 0.5 * sq_dist(x, &centroids[c * d..(c + 1) * d]) + costs.unit_penalty(i, c, labels);
            if cost < best.0 {
                best = (cost, c);
            }
        }
        labels[i] = best.1;
    }
}

/// Block means; empty blocks keep their previous centroid.
pub fn update_step(points: &[f64], d: usize, labels: &[usize], centroids: &mut [f64]) {
    let k = centroids.len() / d;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &g) in labels.iter().enumerate() {
        counts[g] += 1;
        for c in 0..d {
            sums[g * d + c] += points[i * d + c];
        }
    }
    for g in 0..k {
        if counts[g] > 0 {
            for c in 0..d {
                centroids[g * d + c] = sums[g * d + c] / counts[g] as f64;
            }
        }
    }
}

/// Moves the point farthest from its centroid into each empty block.
fn repair_empty(points: &[f64], d: usize, labels: &mut [usize], centroids: &mut [f64]) -> usize {
    let k = centroids.len() / d;
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        for &g in labels.iter() {
            counts[g] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repairs;
        };
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| {
                let g = labels[i];
                (sq_dist(&points[i * d..(i + 1) * d], &centroids[g * d..(g + 1) * d]), i)
            })
            .fold((f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 { b } else { a });
        if far.1 == usize::MAX {
            return repairs;
        }
        labels[far.1] = empty;
        centroids[empty * d..(empty + 1) * d].copy_from_slice(&points[far.1 * d..(far.1 + 1) * d]);
        repairs += 1;
    }
}

fn seed_centroids<R: Rng + ?Sized>(points: &[f64], d: usize, k: usize, plus_plus: bool, rng: &mut R) -> Vec<f64> {
    let n = points.len() / d;
    let chosen: Vec<usize> = if plus_plus {
        let mut c = vec![rng.random_range(0..n)];
        let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(&points[i * d..(i + 1) * d], &points[c[0] * d..(c[0] + 1) * d])).collect();
        while c.len() < k {
            let total: f64 = dist.iter().sum();
            let next = if total > 0.0 {
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &w) in dist.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            c.push(next);
            for i in 0..n {
                dist[i] = dist[i].min(sq_dist(&points[i * d..(i + 1) * d], &points[next * d..(next + 1) * d]));
            }
        }
        c
    } else {
        rand::seq::index::sample(rng, n, k).into_vec()
    };
    chosen.iter().flat_map(|&i| points[i * d..(i + 1) * d].iter().copied()).collect()
}

/// A single run from one initialization.
pub fn pc_kmeans_run<R: Rng + ?Sized>(
    points: &[f64],
    d: usize,
    costs: &PairCosts,
    config: &KmeansConfig,
    init: KmeansInit,
    rng: &mut R,
) -> Result<KmeansState> {
    let n = points.len() / d;
    if config.k == 0 || n < config.k {
        return Err(Error::Config(format!("need 1 <= k <= N, got k={} N={n}", config.k)));
    }
    if costs.n() != n {
        return Err(Error::LengthMismatch(costs.n(), n));
    }
    let mut centroids = match init {
        KmeansInit::PlusPlus => seed_centroids(points, d, config.k, true, rng),
        KmeansInit::Random => seed_centroids(points, d, config.k, false, rng),
        KmeansInit::Centroids(c) => {
            if c.len() != config.k * d {
                return Err(Error::DimensionMismatch("initial centroids".into()));
            }
            c
        }
    };
    // Unconstrained nearest-centroid start for the sequential sweep.
    let mut labels = vec![0usize; n];
    assignment_step(points, d, &centroids, &PairCosts::none(n), &mut labels);
    let mut objective = kmeans_objective(points, d, &labels, &centroids, costs);
    let mut trajectory = vec![objective];
    let mut repairs = 0;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let before = objective;
        assignment_step(points, d, &centroids, costs, &mut labels);
        let r = repair_empty(points, d, &mut labels, &mut centroids);
        repairs += r;
        let after_assign = kmeans_objective(points, d, &labels, &centroids, costs);
        debug_assert!(r > 0 || after_assign <= before + 1e-9, "assignment step increased the objective");
        trajectory.push(after_assign);
        update_step(points, d, &labels, &mut centroids);
        objective = kmeans_objective(points, d, &labels, &centroids, costs);
        debug_assert!(objective <= after_assign + 1e-9, "update step increased the objective");
        trajectory.push(objective);
        if r == 0 && before - objective < config.tol {
            break;
        }
    }
    Ok(KmeansState {
        labels,
        centroids,
        objective,
        iterations,
        repairs,
        trajectory,
    })
}

/// Best of `config.restarts` runs: k-means++ seeding first, uniform after.
/// Restarts run in parallel on independent streams of `seed`.
pub fn pc_kmeans(points: &[f64], d: usize, costs: &PairCosts, config: &KmeansConfig, seed: u64) -> Result<KmeansState> {
    let runs: Vec<KmeansState> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            let init = if r == 0 { KmeansInit::PlusPlus } else { KmeansInit::Random };
            pc_kmeans_run(points, d, costs, config, init, &mut g)
        })
        .collect::<Result<_>>()?;
    Ok(best_of(runs, |s| s.objective))
}

fn best_of<T>(runs: Vec<T>, score: impl Fn(&T) -> f64) -> T {
    let mut best = 0;
    for k in 1..runs.len() {
        if score(&runs[k]) < score(&runs[best]) {
            best = k;
        }
    }
    runs.into_iter().nth(best).expect("at least one run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcGfeResult {
    /// Common coefficients, ordered as `regressor_names`.
    pub theta: Vec<f64>,
    pub regressor_names: Vec<String>,
    /// Row-major `K x T` group-time effects.
    pub alpha: Vec<f64>,
    pub labels: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

/// Regressors with common coefficients: z columns and the x columns that
/// vary across observations. Returns the row-major design and its names.
fn common_design(data: &PanelDataset) -> (Vec<f64>, Vec<String>, usize) {
    let (n, t, p, q) = data.dims();
    let varying: Vec<usize> = (0..p)
        .filter(|&c| {
            let first = data.x_row(0, 0)[c];
            (0..n).any(|i| (0..t).any(|s| data.x_row(i, s)[c] != first))
        })
        .collect();
    let d = varying.len() + q;
    let mut r = Vec::with_capacity(n * t * d);
    for i in 0..n {
        for s in 0..t {
            let x = data.x_row(i, s);
            r.extend(varying.iter().map(|&c| x[c]));
            r.extend_from_slice(data.z_row(i, s));
        }
    }
    let mut names: Vec<String> = varying.iter().map(|&c| data.x_names()[c].clone()).collect();
    names.extend(data.z_names().iter().cloned());
    (r, names, d)
}

struct Gfe<'a> {
    y: &'a [f64],
    r: &'a [f64],
    n: usize,
    t: usize,
    d: usize,
    k: usize,
}

impl Gfe<'_> {
    /// Given groups: `theta` by OLS on group-time demeaned data, then
    /// `alpha_kt` as group-time means of `y - r' theta`.
    fn coefficients(&self, labels: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, t, d, k) = (self.n, self.t, self.d, self.k);
        let mut cnt = vec![0usize; k];
        let mut ybar = vec![0.0; k * t];
        let mut rbar = vec![0.0; k * t * d];
        for i in 0..n {
            let g = labels[i];
            cnt[g] += 1;
            for s in 0..t {
                ybar[g * t + s] += self.y[i * t + s];
                for c in 0..d {
                    rbar[(g * t + s) * d + c] += self.r[(i * t + s) * d + c];
                }
            }
        }
        for g in 0..k {
            let m = cnt[g].max(1) as f64;
            for s in 0..t {
                ybar[g * t + s] /= m;
                for c in 0..d {
                    rbar[(g * t + s) * d + c] /= m;
                }
            }
        }
        let theta = if d == 0 {
            Vec::new()
        } else {
            let mut rtr = nalgebra::DMatrix::zeros(d, d);
            let mut rty = nalgebra::DVector::zeros(d);
            for i in 0..n {
                let g = labels[i];
                for s in 0..t {
                    let row: Vec<f64> = (0..d)
                        .map(|c| self.r[(i * t + s) * d + c] - rbar[(g * t + s) * d + c])
                        .collect();
                    let yd = self.y[i * t + s] - ybar[g * t + s];
                    for a in 0..d {
                        rty[a] += row[a] * yd;
                        for b in 0..d {
                            rtr[(a, b)] += row[a] * row[b];
                        }
                    }
                }
            }
            solve_spd(rtr, &rty).ok_or(Error::CollinearDesign)?.iter().copied().collect()
        };
        let mut alpha = vec![0.0; k * t];
        for g in 0..k {
            for s in 0..t {
                let fit: f64 = (0..d).map(|c| rbar[(g * t + s) * d + c] * theta[c]).sum();
                alpha[g * t + s] = ybar[g * t + s] - fit;
            }
        }
        Ok((theta, alpha))
    }

    /// Residual vectors `y_i - r_i' theta`, row-major `N x T`.
    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n * self.t)
            .map(|o| {
                let fit: f64 = (0..self.d).map(|c| self.r[o * self.d + c] * theta[c]).sum();
                self.y[o] - fit
            })
            .collect()
    }
}

/// Squared residuals plus violation costs.
pub fn spc_gfe_objective(data: &PanelDataset, costs: &PairCosts, labels: &[usize], theta: &[f64], alpha: &[f64]) -> f64 {
    let (r, _, d) = common_design(data);
    let (n, t) = (data.n_units(), data.n_periods());
    let mut ssr = 0.0;
    for i in 0..n {
        for s in 0..t {
            let o = i * t + s;
            let fit: f64 = (0..d).map(|c| r[o * d + c] * theta[c]).sum();
            ssr += (data.y(i, s) - fit - alpha[labels[i] * t + s]).powi(2);
        }
    }
    ssr + costs.penalty(labels)
}

/// Constrained grouped fixed effects with `k` groups: alternate per-unit
/// group choice and least squares, over several random starts.
pub fn spc_gfe(data: &PanelDataset, costs: &PairCosts, config: &KmeansConfig, seed: u64) -> Result<SpcGfeResult> {
    let (n, t) = (data.n_units(), data.n_periods());
    let k = config.k;
    if k == 0 || n < k {
        return Err(Error::Config(format!("need 1 <= k <= N, got k={k} N={n}")));
    }
    if costs.n() != n {
        return Err(Error::LengthMismatch(costs.n(), n));
    }
    let (r, names, d) = common_design(data);
    let y: Vec<f64> = (0..n).flat_map(|i| data.y_unit(i).iter().copied()).collect();
    let gfe = Gfe { y: &y, r: &r, n, t, d, k };
    // Start from the single-group fit.
    let pooled = Gfe { k: 1, ..gfe };
    let (theta0, _) = pooled.coefficients(&vec![0; n])?;
    let resid0 = gfe.residuals(&theta0);

    let runs: Vec<SpcGfeResult> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|run| -> Result<SpcGfeResult> {
            let mut g = rng::stream(seed, run as u64);
            let mut alpha = seed_centroids(&resid0, t, k, run == 0, &mut g);
            let mut theta = theta0.clone();
            let mut labels = vec![0usize; n];
            let mut resid = resid0.clone();
            // Squared error is twice the k-means half-WCSS.
            let half = PairCosts::new(n, costs.entries.iter().map(|&(i, j, ty, w)| (i, j, ty, w / 2.0)).collect())?;
            assignment_step(&resid, t, &alpha, &PairCosts::none(n), &mut labels);
            let mut objective = f64::INFINITY;
            let mut iterations = 0;
            while iterations < config.max_iter {
                iterations += 1;
                assignment_step(&resid, t, &alpha, &half, &mut labels);
                repair_empty(&resid, t, &mut labels, &mut alpha);
                let (th, al) = gfe.coefficients(&labels)?;
                theta = th;
                alpha = al;
                resid = gfe.residuals(&theta);
                let obj = spc_gfe_objective(data, costs, &labels, &theta, &alpha);
                let done = objective - obj < config.tol;
                objective = obj;
                if done {
                    break;
                }
            }
            Ok(SpcGfeResult {
                theta,
                regressor_names: names.clone(),
                alpha,
                labels,
                objective,
                iterations,
            })
        })
        .collect::<Result<_>>()?;
    Ok(best_of(runs, |s| s.objective))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub sigma2: Vec<f64>,
    /// Share of units whose modal Gibbs assignment matches the k-means step.
    pub agreement: Vec<f64>,
    pub monotone: bool,
    pub full_at_smallest: bool,
}

/// Compares the Gibbs assignment kernel with the constrained k-means
/// assignment step for intercept-only groups with fixed effects `alpha`,
/// a common variance and equal group probabilities.
///
/// `y` is row-major `N x T`. With `scale_weights` the constraint weights are
/// divided by each `sigma2`; without it the comparison is the ablation.
#[allow(clippy::too_many_arguments)]
pub fn small_variance_equivalence_test<R: Rng + ?Sized>(
    y: &[f64],
    t: usize,
    alpha: &[f64],
    cs: &ConstraintSet,
    start: &[usize],
    sigma2_seq: &[f64],
    replicates: usize,
    scale_weights: bool,
    rng: &mut R,
) -> Result<EquivalenceReport> {
    let n = start.len();
    let k = alpha.len();
    if y.len() != n * t {
        return Err(Error::DimensionMismatch("y must be N x T".into()));
    }
    let centroids: Vec<f64> = alpha.iter().flat_map(|&a| std::iter::repeat_n(a, t)).collect();
    let costs = PairCosts::kmeans_equivalent(cs)?;
    let mut reference = start.to_vec();
    assignment_step(y, t, &centroids, &costs, &mut reference);

    let dist: Vec<f64> = (0..n)
        .flat_map(|i| (0..k).map(move |c| (i, c)))
        .map(|(i, c)| sq_dist(&y[i * t..(i + 1) * t], &centroids[c * t..(c + 1) * t]))
        .collect();
    let mut agreement = Vec::with_capacity(sigma2_seq.len());
    let mut terms = vec![0.0; k];
    let mut logw = vec![0.0; k];
    for &s2 in sigma2_seq {
        // Scaling W by 1 / sigma2 is the same as dividing the whole kernel by
        // sigma2; doing the latter keeps the pair terms away from the clamp.
        let (dist_scale, term_scale) = if scale_weights { (0.5 / s2, 1.0 / s2) } else { (0.5 / s2, 1.0) };
        let mut tally = vec![0usize; n * k];
        for _ in 0..replicates {
            let mut labels = start.to_vec();
            for i in 0..n {
                cs.candidate_terms(i, &labels, &mut terms);
                for c in 0..k {
                    logw[c] = -dist[i * k + c] * dist_scale + terms[c] * term_scale;
                }
                labels[i] = sample_log_weights(&logw, rng);
            }
            for (i, &g) in labels.iter().enumerate() {
                tally[i * k + g] += 1;
            }
        }
        let agree = (0..n)
            .filter(|&i| {
                let row = &tally[i * k..(i + 1) * k];
                let mode = (0..k).fold(0, |b, c| if row[c] > row[b] { c } else { b });
                mode == reference[i]
            })
            .count();
        agreement.push(agree as f64 / n as f64);
    }
    let monotone = agreement.windows(2).all(|w| w[1] >= w[0]);
    let full_at_smallest = agreement.last().is_some_and(|&a| a == 1.0);
    Ok(EquivalenceReport {
        sigma2: sigma2_seq.to_vec(),
        agreement,
        monotone,
        full_at_smallest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::PairwiseConstraint;

    #[test]
    fn separates_a_negative_link() {
        let pts = [0.0, 0.1, 1.0, 1.1];
        let costs = PairCosts::new(4, vec![(0, 1, LinkType::NegativeLink, 1e6)]).unwrap();
        let cfg = KmeansConfig {
            k: 2,
            restarts: 10,
            ..Default::default()
        };
        let s = pc_kmeans(&pts, 1, &costs, &cfg, 3).unwrap();
        assert_ne!(s.labels[0], s.labels[1]);
        // Brute force over all 2^4 labellings with both blocks used.
        let mut best = f64::INFINITY;
        for mask in 1..15u32 {
            let l: Vec<usize> = (0..4).map(|b| ((mask >> b) & 1) as usize).collect();
            let mut c = vec![0.0; 2];
            update_step(&pts, 1, &l, &mut c);
            best = best.min(kmeans_objective(&pts, 1, &l, &c, &costs));
        }
        assert!((s.objective - best).abs() < 1e-12);
    }

    #[test]
    fn one_point_per_cluster() {
        let pts = [0.0, 5.0, 9.0];
        let cfg = KmeansConfig {
            k: 3,
            ..Default::default()
        };
        let s = pc_kmeans(&pts, 1, &PairCosts::none(3), &cfg, 1).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn gibbs_and_kmeans_agree_at_small_variance() {
        let y = [0.0, 0.1, 0.9, 1.0, 0.45, 0.55];
        let cs = ConstraintSet::new(
            6,
            vec![PairwiseConstraint {
                i: 4,
                j: 5,
                ctype: LinkType::NegativeLink,
                accuracy: 0.9,
            }],
            0.5,
        )
        .unwrap();
        let mut r = rng::from_seed(2);
        let rep = small_variance_equivalence_test(&y, 1, &[0.05, 0.95], &cs, &[0, 0, 1, 1, 0, 1], &[1.0, 0.1, 0.01, 0.001], 400, true, &mut r).unwrap();
        assert!(rep.full_at_smallest, "{rep:?}");
        assert!(rep.monotone, "{rep:?}");
    }
}
