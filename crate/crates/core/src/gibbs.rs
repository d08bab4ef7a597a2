//! Blocked Gibbs sampler with slice variables.
//!
//! One sweep updates, in order: the active group count, group coefficients,
//! group variances, common coefficients, stick lengths, slice variables, the
//! concentration, potential groups, and finally every unit's group index.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::dp_prior::{sample_log_weights, DpHyper, StickWeights};
use crate::error::{Error, Result};
use crate::linalg::{ols, solve_spd, GaussianPrecision};
use crate::panel::{ModelConfig, PanelDataset};
use crate::partition::{canonicalize, GroupPartition};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub n_burn: usize,
    pub n_keep: usize,
    /// Store every `thin`-th sweep after burn-in.
    pub thin: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            n_burn: 5000,
            n_keep: 5000,
            thin: 1,
        }
    }
}

/// Whether the partition is sampled or held fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionMode {
    Free,
    Fixed(GroupPartition),
}

/// Counts of slice-sampler invariant checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceDiagnostics {
    pub sweeps_checked: usize,
    /// Sweeps where an invariant failed.
    pub violations: usize,
    /// Sweeps where spawning stopped at the `K <= N` cap.
    pub capped: usize,
}

/// One stored posterior draw. Groups are numbered by first appearance and
/// only occupied groups are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub labels: Vec<usize>,
    /// Row-major `K x p_group`.
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub gamma: Vec<f64>,
    pub a: f64,
    /// Largest group index in use during the sweep that produced the draw.
    pub k_active: usize,
    pub loglik: f64,
}

impl Draw {
    pub fn k(&self) -> usize {
        self.sigma2.len()
    }

    pub fn alpha_row(&self, k: usize, p: usize) -> &[f64] {
        &self.alpha[k * p..(k + 1) * p]
    }

    pub fn partition(&self) -> GroupPartition {
        GroupPartition::from_labels(&self.labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub n_units: usize,
    pub n_periods: usize,
    /// x-columns with group-specific coefficients.
    pub group_columns: Vec<usize>,
    /// x-columns with common coefficients; they precede z in `gamma`.
    pub common_x_columns: Vec<usize>,
    pub q: usize,
    pub heteroskedastic: bool,
    pub draws: Vec<Draw>,
    pub diagnostics: SliceDiagnostics,
}

impl PosteriorChain {
    pub fn p_group(&self) -> usize {
        self.group_columns.len()
    }

    pub fn n_common(&self) -> usize {
        self.common_x_columns.len() + self.q
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    /// Conditional mean of unit `i`'s outcome under draw `s` for full
    /// covariate rows `x` (length p) and `z` (length q).
    pub fn mean(&self, s: usize, i: usize, x: &[f64], z: &[f64]) -> f64 {
        let d = &self.draws[s];
        let p = self.p_group();
        let alpha = d.alpha_row(d.labels[i], p);
        let mut m: f64 = self.group_columns.iter().zip(alpha).map(|(&c, a)| a * x[c]).sum();
        let nx = self.common_x_columns.len();
        for (k, &c) in self.common_x_columns.iter().enumerate() {
            m += d.gamma[k] * x[c];
        }
        for (k, zv) in z.iter().enumerate() {
            m += d.gamma[nx + k] * zv;
        }
        m
    }

    pub fn variance(&self, s: usize, i: usize) -> f64 {
        let d = &self.draws[s];
        d.sigma2[d.labels[i]]
    }

    pub fn logliks(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.loglik).collect()
    }
}

/// Per-unit sufficient statistics. `X` holds the group-specific columns and
/// `W` the common ones.
#[derive(Debug, Clone)]
struct UnitStats {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    xtw: DMatrix<f64>,
    wtw: DMatrix<f64>,
    wty: DVector<f64>,
    yty: f64,
}

/// Normal posterior for group coefficients given summed `X'X` and `X'y~`.
pub fn alpha_posterior(
    prior_precision: &DMatrix<f64>,
    prior_precision_mean: &DVector<f64>,
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    sigma2: f64,
) -> Option<GaussianPrecision> {
    let prec = prior_precision + xtx / sigma2;
    let b = prior_precision_mean + xty / sigma2;
    GaussianPrecision::new(prec, &b)
}

/// Shape and scale of the inverse-gamma posterior for a variance.
pub fn sigma2_posterior(nu: f64, delta: f64, n_obs: usize, rss: f64) -> (f64, f64) {
    ((nu + n_obs as f64) / 2.0, (delta + rss) / 2.0)
}

/// Draws from IG(shape, scale).
pub fn draw_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    scale / g
}

/// Beta parameters for stick `k` given block sizes and the concentration.
pub fn stick_posterior(sizes: &[usize], k: usize, a: f64) -> (f64, f64) {
    let above: usize = sizes[k + 1..].iter().sum();
    (sizes[k] as f64 + 1.0, a + above as f64)
}

/// Mixture weight on `Gamma(m + K, rate)` in the two-step concentration
/// update.
pub fn concentration_mixture_weight(m: f64, k_active: usize, n_units: usize, rate: f64) -> f64 {
    let odds = (m + k_active as f64 - 1.0) / (n_units as f64 * rate);
    odds / (1.0 + odds)
}

/// Two-step concentration update. Returns `(a, eta)`.
pub fn update_concentration<R: Rng + ?Sized>(
    a: f64,
    k_active: usize,
    n_units: usize,
    m: f64,
    n: f64,
    rng: &mut R,
) -> (f64, f64) {
    let eta: f64 = Beta::new(a + 1.0, n_units as f64)
        .expect("positive parameters")
        .sample(rng);
    let eta = eta.max(f64::MIN_POSITIVE);
    let rate = n - eta.ln();
    let w = concentration_mixture_weight(m, k_active, n_units, rate);
    let shape = if rng.random::<f64>() < w {
        m + k_active as f64
    } else {
        m + k_active as f64 - 1.0
    };
    let new_a: f64 = Gamma::new(shape, 1.0 / rate).expect("positive shape").sample(rng);
    (new_a.max(f64::MIN_POSITIVE), eta)
}

/// One sequential sweep over units. `log_mass(i, k)` is the unit's
/// log-likelihood in block `k`, or `-inf` if `k` is not eligible; the
/// constraint term is added only for units that carry constraints.
pub fn partition_sweep<R: Rng + ?Sized, F: FnMut(usize, usize) -> f64>(
    labels: &mut [usize],
    n_blocks: usize,
    cs: &ConstraintSet,
    mut log_mass: F,
    rng: &mut R,
) -> Result<()> {
    let mut mass = vec![0.0; n_blocks];
    let mut terms = vec![0.0; n_blocks];
    for i in 0..labels.len() {
        for (k, slot) in mass.iter_mut().enumerate() {
            *slot = log_mass(i, k);
        }
        if cs.is_active(i) {
            cs.candidate_terms(i, labels, &mut terms);
            for (m, t) in mass.iter_mut().zip(&terms) {
                if *m > f64::NEG_INFINITY {
                    *m += t;
                }
            }
        }
        if mass.iter().all(|m| !(*m > f64::NEG_INFINITY)) {
            return Err(Error::AllZeroMass { unit: i });
        }
        labels[i] = sample_log_weights(&mass, rng);
    }
    Ok(())
}

/// Sampler state for one chain.
pub struct GibbsSampler<'a> {
    cs: &'a ConstraintSet,
    hyper: &'a DpHyper,
    mode: PartitionMode,
    heteroskedastic: bool,
    n: usize,
    t: usize,
    pg: usize,
    qc: usize,
    group_columns: Vec<usize>,
    common_x_columns: Vec<usize>,
    q: usize,
    stats: Vec<UnitStats>,
    prior_prec: DMatrix<f64>,
    prior_prec_mean: DVector<f64>,
    prior_chol: Option<DMatrix<f64>>,
    // State.
    labels: Vec<usize>,
    alpha: Vec<DVector<f64>>,
    sigma2: Vec<f64>,
    gamma: DVector<f64>,
    sticks: StickWeights,
    u: Vec<f64>,
    a: f64,
    eta: f64,
    k_active: usize,
    // Per-unit residual statistics given gamma: y~'y~ and X'y~.
    ryy: Vec<f64>,
    rxy: Vec<DVector<f64>>,
    diagnostics: SliceDiagnostics,
}

impl<'a> GibbsSampler<'a> {
    pub fn new<R: Rng + ?Sized>(
        data: &PanelDataset,
        model: &ModelConfig,
        cs: &'a ConstraintSet,
        hyper: &'a DpHyper,
        mode: PartitionMode,
        rng: &mut R,
    ) -> Result<Self> {
        model.validate(data)?;
        hyper.validate()?;
        let (n, t, p, q) = data.dims();
        let group_columns = model.group_columns();
        let common_x_columns = model.common_x_columns();
        let pg = group_columns.len();
        let qc = common_x_columns.len() + q;
        if hyper.p() != pg {
            return Err(Error::DimensionMismatch(format!(
                "prior has {} coefficients, model has {pg} group-specific columns",
                hyper.p()
            )));
        }
        if cs.n_units() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraints cover {} units, panel has {n}",
                cs.n_units()
            )));
        }
        if let PartitionMode::Fixed(g) = &mode {
            if g.n() != n {
                return Err(Error::LengthMismatch(g.n(), n));
            }
        } else if hyper.flat_alpha {
            return Err(Error::Config("a flat coefficient prior needs a fixed partition".into()));
        }
        let _ = p;

        let mut stats = Vec::with_capacity(n);
        let mut xall = Vec::with_capacity(n * t * (pg + qc));
        let mut yall = Vec::with_capacity(n * t);
        for i in 0..n {
            let mut xm = DMatrix::zeros(t, pg);
            let mut wm = DMatrix::zeros(t, qc);
            let yv = DVector::from_column_slice(data.y_unit(i));
            for s in 0..t {
                let xr = data.x_row(i, s);
                for (c, &col) in group_columns.iter().enumerate() {
                    xm[(s, c)] = xr[col];
                }
                for (c, &col) in common_x_columns.iter().enumerate() {
                    wm[(s, c)] = xr[col];
                }
                for (c, &v) in data.z_row(i, s).iter().enumerate() {
                    wm[(s, common_x_columns.len() + c)] = v;
                }
                xall.extend(xm.row(s).iter());
                xall.extend(wm.row(s).iter());
                yall.push(yv[s]);
            }
            stats.push(UnitStats {
                xtx: xm.transpose() * &xm,
                xty: xm.transpose() * &yv,
                xtw: xm.transpose() * &wm,
                wtw: wm.transpose() * &wm,
                wty: wm.transpose() * &yv,
                yty: yv.norm_squared(),
            });
        }

        let (prior_prec, prior_prec_mean, prior_chol) = if hyper.flat_alpha {
            (DMatrix::zeros(pg, pg), DVector::zeros(pg), None)
        } else {
            let sa = DMatrix::from_row_slice(pg, pg, &hyper.sigma_alpha);
            let chol = sa.clone().cholesky().ok_or_else(|| Error::Config("sigma_alpha not positive definite".into()))?;
            let prec = chol.inverse();
            let mu = DVector::from_column_slice(&hyper.mu_alpha);
            let pm = &prec * mu;
            (prec, pm, Some(chol.l()))
        };

        let labels: Vec<usize> = match &mode {
            PartitionMode::Free => (0..n).collect(),
            PartitionMode::Fixed(g) => g.labels().to_vec(),
        };
        let k0 = labels.iter().max().map_or(0, |m| m + 1);
        let (alpha, gamma, resid_var) = match within_start(&stats, &labels, k0, pg, qc, t) {
            Some(start) => start,
            None => pooled_start(&xall, &yall, n * t, pg, qc, k0, rng),
        };

        let mut s = Self {
            cs,
            hyper,
            mode,
            heteroskedastic: model.heteroskedastic,
            n,
            t,
            pg,
            qc,
            group_columns,
            common_x_columns,
            q,
            stats,
            prior_prec,
            prior_prec_mean,
            prior_chol,
            labels,
            alpha,
            sigma2: vec![resid_var; k0],
            gamma,
            sticks: StickWeights::default(),
            u: vec![0.0; n],
            a: hyper.a,
            eta: 0.5,
            k_active: k0,
            ryy: vec![0.0; n],
            rxy: vec![DVector::zeros(pg); n],
            diagnostics: SliceDiagnostics::default(),
        };
        s.refresh_residual_stats();
        Ok(s)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn concentration(&self) -> f64 {
        self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sticks(&self) -> &StickWeights {
        &self.sticks
    }

    pub fn slice_variables(&self) -> &[f64] {
        &self.u
    }

    pub fn diagnostics(&self) -> SliceDiagnostics {
        self.diagnostics
    }

    pub fn n_potential(&self) -> usize {
        self.alpha.len()
    }

    fn free(&self) -> bool {
        matches!(self.mode, PartitionMode::Free)
    }

    fn refresh_residual_stats(&mut self) {
        for (i, st) in self.stats.iter().enumerate() {
            if self.qc == 0 {
                self.ryy[i] = st.yty;
                self.rxy[i] = st.xty.clone();
            } else {
                let g = &self.gamma;
                self.ryy[i] = st.yty - 2.0 * g.dot(&st.wty) + g.dot(&(&st.wtw * g));
                self.rxy[i] = &st.xty - &st.xtw * g;
            }
        }
    }

    /// Residual sum of squares of unit `i` under `alpha`.
    fn unit_rss(&self, i: usize, alpha: &DVector<f64>) -> f64 {
        let st = &self.stats[i];
        let rss = self.ryy[i] - 2.0 * alpha.dot(&self.rxy[i]) + alpha.dot(&(&st.xtx * alpha));
        rss.max(0.0)
    }

    fn unit_loglik(&self, i: usize, alpha: &DVector<f64>, sigma2: f64) -> f64 {
        -0.5 * self.t as f64 * (LN_2PI + sigma2.ln()) - self.unit_rss(i, alpha) / (2.0 * sigma2)
    }

    /// Full-data log-likelihood at the current state.
    pub fn log_likelihood(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let k = self.labels[i];
                self.unit_loglik(i, &self.alpha[k], self.sigma2[k])
            })
            .sum()
    }

    fn draw_alpha_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let l = self.prior_chol.as_ref().expect("proper prior in free mode");
        let e = DVector::from_fn(self.pg, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        DVector::from_column_slice(&self.hyper.mu_alpha) + l * e
    }

    fn members(&self, k_total: usize) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); k_total];
        for (i, &g) in self.labels.iter().enumerate() {
            m[g].push(i);
        }
        m
    }

    /// Coefficients for groups `0..K^a`; empty groups draw from the prior.
    pub fn update_alpha<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let members = self.members(self.k_active);
        for (k, units) in members.iter().enumerate() {
            let mut xtx = DMatrix::zeros(self.pg, self.pg);
            let mut xty = DVector::zeros(self.pg);
            for &i in units {
                xtx += &self.stats[i].xtx;
                xty += &self.rxy[i];
            }
            if units.is_empty() && self.prior_chol.is_some() {
                self.alpha[k] = self.draw_alpha_prior(rng);
                continue;
            }
            let post = alpha_posterior(&self.prior_prec, &self.prior_prec_mean, &xtx, &xty, self.sigma2[k])
                .ok_or(Error::SingularPrecision { group: k })?;
            self.alpha[k] = post.sample(rng);
        }
        Ok(())
    }

    pub fn update_sigma2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (nu, delta) = (self.hyper.nu_sigma, self.hyper.delta_sigma);
        if self.heteroskedastic {
            let members = self.members(self.k_active);
            for (k, units) in members.iter().enumerate() {
                let rss: f64 = units.iter().map(|&i| self.unit_rss(i, &self.alpha[k])).sum();
                let (shape, scale) = sigma2_posterior(nu, delta, units.len() * self.t, rss);
                self.sigma2[k] = draw_inv_gamma(shape, scale, rng);
            }
        } else {
            let rss: f64 = (0..self.n).map(|i| self.unit_rss(i, &self.alpha[self.labels[i]])).sum();
            let (shape, scale) = sigma2_posterior(nu, delta, self.n * self.t, rss);
            let s2 = draw_inv_gamma(shape, scale, rng);
            self.sigma2.iter_mut().for_each(|v| *v = s2);
        }
    }

    pub fn update_gamma<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.qc == 0 {
            return Ok(());
        }
        let mut prec = DMatrix::identity(self.qc, self.qc) / self.hyper.gamma_var;
        let mut b = DVector::zeros(self.qc);
        for (i, st) in self.stats.iter().enumerate() {
            let k = self.labels[i];
            let s2 = self.sigma2[k];
            prec += &st.wtw / s2;
            b += (&st.wty - st.xtw.transpose() * &self.alpha[k]) / s2;
        }
        let post = GaussianPrecision::new(prec, &b).ok_or(Error::SingularPrecision { group: usize::MAX })?;
        self.gamma = post.sample(rng);
        self.refresh_residual_stats();
        Ok(())
    }

    pub fn update_sticks<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut sizes = vec![0usize; self.k_active];
        for &g in &self.labels {
            sizes[g] += 1;
        }
        let mut sticks = StickWeights::default();
        for k in 0..self.k_active {
            let (p1, p2) = stick_posterior(&sizes, k, self.a);
            let xi: f64 = Beta::new(p1, p2).expect("positive parameters").sample(rng);
            sticks.push(xi.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
        }
        self.sticks = sticks;
    }

    pub fn update_slice<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.n {
            let v = 1.0 - rng.random::<f64>();
            self.u[i] = self.sticks.pi()[self.labels[i]] * v;
        }
    }

    pub fn update_concentration<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.hyper.update_a {
            return;
        }
        let mut seen = vec![false; self.k_active];
        self.labels.iter().for_each(|&g| seen[g] = true);
        let occupied = seen.iter().filter(|&&s| s).count();
        let (a, eta) = update_concentration(self.a, occupied, self.n, self.hyper.m, self.hyper.n, rng);
        self.a = a;
        self.eta = eta;
    }

    /// Extends sticks and parameters until the leftover mass drops below
    /// `u* = min_i u_i`, or the group count reaches `N`.
    pub fn spawn_potential_groups<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let u_star = self.u.iter().cloned().fold(f64::INFINITY, f64::min);
        let common_s2 = self.sigma2.first().copied();
        while self.sticks.leftover(self.sticks.len()) >= u_star && self.sticks.len() < self.n {
            let xi: f64 = Beta::new(1.0, self.a).expect("positive parameters").sample(rng);
            self.sticks.push(xi.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
            let alpha = self.draw_alpha_prior(rng);
            let s2 = if self.heteroskedastic {
                draw_inv_gamma(self.hyper.nu_sigma / 2.0, self.hyper.delta_sigma / 2.0, rng)
            } else {
                common_s2.expect("at least one group")
            };
            self.alpha.push(alpha);
            self.sigma2.push(s2);
        }
        self.check_slice(u_star);
    }

    fn check_slice(&mut self, u_star: f64) {
        let k_star = self.sticks.len();
        let mut ok = self.k_active <= k_star;
        ok &= (0..self.n).all(|i| self.u[i] > 0.0 && self.u[i] <= self.sticks.pi()[self.labels[i]]);
        // For k > K*, pi_k <= leftover(K*), so u_i > pi_k follows from this.
        if self.sticks.leftover(k_star) >= u_star {
            if k_star >= self.n {
                self.diagnostics.capped += 1;
            } else {
                ok = false;
            }
        }
        self.diagnostics.sweeps_checked += 1;
        if !ok {
            self.diagnostics.violations += 1;
        }
    }

    pub fn update_partition<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let k_star = self.sticks.len();
        let log_norm: Vec<f64> = self.sigma2[..k_star]
            .iter()
            .map(|s2| -0.5 * self.t as f64 * (LN_2PI + s2.ln()))
            .collect();
        let pi = self.sticks.pi().to_vec();
        let mut labels = std::mem::take(&mut self.labels);
        let this = &*self;
        let res = partition_sweep(
            &mut labels,
            k_star,
            self.cs,
            |i, k| {
                if this.u[i] <= pi[k] {
                    log_norm[k] - this.unit_rss(i, &this.alpha[k]) / (2.0 * this.sigma2[k])
                } else {
                    f64::NEG_INFINITY
                }
            },
            rng,
        );
        self.labels = labels;
        res
    }

    /// One full sweep.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let free = self.free();
        if free {
            self.k_active = self.labels.iter().max().map_or(0, |m| m + 1);
            self.alpha.truncate(self.k_active);
            self.sigma2.truncate(self.k_active);
            self.sticks.truncate(self.k_active);
        }
        self.update_alpha(rng)?;
        self.update_sigma2(rng);
        self.update_gamma(rng)?;
        if free {
            self.update_sticks(rng);
            self.update_slice(rng);
            self.update_concentration(rng);
            self.spawn_potential_groups(rng);
            self.update_partition(rng)?;
        }
        Ok(())
    }

    /// Snapshot of the current state with groups relabelled by first
    /// appearance.
    pub fn snapshot(&self) -> Draw {
        let (canon, k) = canonicalize(&self.labels);
        let mut old_of = vec![0usize; k];
        for (i, &c) in canon.iter().enumerate() {
            old_of[c] = self.labels[i];
        }
        let mut alpha = Vec::with_capacity(k * self.pg);
        let mut sigma2 = Vec::with_capacity(k);
        for &o in &old_of {
            alpha.extend(self.alpha[o].iter());
            sigma2.push(self.sigma2[o]);
        }
        Draw {
            labels: canon,
            alpha,
            sigma2,
            gamma: self.gamma.iter().copied().collect(),
            a: self.a,
            k_active: self.k_active,
            loglik: self.log_likelihood(),
        }
    }

    pub fn into_chain(self, draws: Vec<Draw>) -> PosteriorChain {
        PosteriorChain {
            n_units: self.n,
            n_periods: self.t,
            group_columns: self.group_columns,
            common_x_columns: self.common_x_columns,
            q: self.q,
            heteroskedastic: self.heteroskedastic,
            draws,
            diagnostics: self.diagnostics,
        }
    }
}

type Start = (Vec<DVector<f64>>, DVector<f64>, f64);

/// Least squares with one coefficient vector per starting group and common
/// coefficients shared by all, via the within transformation. `None` when a
/// group design is singular or the residual degrees of freedom run out.
fn within_start(stats: &[UnitStats], labels: &[usize], k0: usize, pg: usize, qc: usize, t: usize) -> Option<Start> {
    let n = stats.len();
    let dof = (n * t).checked_sub(k0 * pg + qc).filter(|&d| d > 0)?;
    let mut xtx = vec![DMatrix::zeros(pg, pg); k0];
    let mut xty = vec![DVector::zeros(pg); k0];
    let mut xtw = vec![DMatrix::zeros(pg, qc); k0];
    let mut wtw = DMatrix::zeros(qc, qc);
    let mut wty = DVector::zeros(qc);
    let mut yty = 0.0;
    for (st, &g) in stats.iter().zip(labels) {
        xtx[g] += &st.xtx;
        xty[g] += &st.xty;
        xtw[g] += &st.xtw;
        wtw += &st.wtw;
        wty += &st.wty;
        yty += st.yty;
    }
    let mut a = wtw.clone();
    let mut b = wty.clone();
    let mut inv = Vec::with_capacity(k0);
    for k in 0..k0 {
        let chol = xtx[k].clone().cholesky()?;
        let solve_y = chol.solve(&xty[k]);
        let solve_w = chol.solve(&xtw[k]);
        a -= xtw[k].transpose() * &solve_w;
        b -= xtw[k].transpose() * &solve_y;
        inv.push((solve_y, solve_w));
    }
    let gamma = if qc == 0 { DVector::zeros(0) } else { solve_spd(a, &b)? };
    let alpha: Vec<DVector<f64>> = inv.iter().map(|(sy, sw)| sy - sw * &gamma).collect();
    // RSS = y'y - 2 b'X'y + b'X'X b over the stacked coefficient vector.
    let mut rss = yty - 2.0 * gamma.dot(&wty) + gamma.dot(&(&wtw * &gamma));
    for k in 0..k0 {
        let ak = &alpha[k];
        rss += -2.0 * ak.dot(&xty[k]) + ak.dot(&(&xtx[k] * ak)) + 2.0 * ak.dot(&(&xtw[k] * &gamma));
    }
    if !rss.is_finite() || alpha.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
        return None;
    }
    Some((alpha, gamma, (rss.max(0.0) / dof as f64).max(1e-8)))
}

/// Pooled least squares, with every starting group jittered around the
/// pooled coefficients.
fn pooled_start<R: Rng + ?Sized>(
    xall: &[f64],
    yall: &[f64],
    nt: usize,
    pg: usize,
    qc: usize,
    k0: usize,
    rng: &mut R,
) -> Start {
    let d = pg + qc;
    let (beta, resid_var) = match ols(xall, yall, d) {
        Some((b, rss)) => (b, (rss / nt.saturating_sub(d).max(1) as f64).max(1e-8)),
        None => {
            let mean = yall.iter().sum::<f64>() / yall.len() as f64;
            let var = yall.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / yall.len() as f64;
            (vec![0.0; d], var.max(1e-8))
        }
    };
    let alpha = (0..k0)
        .map(|_| {
            DVector::from_fn(pg, |c, _| {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                beta[c] + 0.1 * beta[c].abs() * e
            })
        })
        .collect();
    (alpha, DVector::from_column_slice(&beta[pg..]), resid_var)
}

/// Runs a chain: `n_burn` discarded sweeps, then `n_keep` stored draws.
pub fn run_chain<R: Rng + ?Sized>(
    data: &PanelDataset,
    model: &ModelConfig,
    cs: &ConstraintSet,
    hyper: &DpHyper,
    mode: PartitionMode,
    settings: &ChainSettings,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let mut sampler = GibbsSampler::new(data, model, cs, hyper, mode, rng)?;
    for _ in 0..settings.n_burn {
        sampler.step(rng)?;
    }
    let thin = settings.thin.max(1);
    let mut draws = Vec::with_capacity(settings.n_keep);
    for _ in 0..settings.n_keep {
        for _ in 0..thin {
            sampler.step(rng)?;
        }
        draws.push(sampler.snapshot());
    }
    Ok(sampler.into_chain(draws))
}
