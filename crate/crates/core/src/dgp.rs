//! Simulated panels with a known group structure, and constraints drawn
//! from the true partition.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constraints::{perturb_constraints, ConstraintSet, LinkType, PairwiseConstraint, HARD_ACCURACY};
use crate::error::{Error, Result};
use crate::panel::{Block, LagColumn, PanelDataset};
use crate::partition::GroupPartition;

/// Coefficients `(intercept, lag, x2, sigma2)` for each group of the general
/// design.
pub const GENERAL_TABLE: [[f64; 4]; 4] = [
    [-0.15, 0.4, 0.16, 0.5],
    [-0.05, 0.8, 0.14, 0.375],
    [0.05, 0.5, 0.12, 0.25],
    [0.15, 0.7, 0.10, 0.125],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    /// 1 and 2 are the intercept-only designs, 3 the general one.
    pub dgp_id: u8,
    pub n: usize,
    /// Observed periods, including any hold-out.
    pub t: usize,
    pub k0: usize,
    pub rho: f64,
    /// Separation scale: the cross-sectional variance of the intercepts is
    /// `v0 * k0^2`.
    pub v0: f64,
    pub noise_sd: f64,
    /// Common coefficient in the general design.
    pub gamma: f64,
    /// Upper cap on the common regressor in the general design.
    pub z_cap: f64,
    /// Periods simulated and discarded before the first observed period in
    /// the general design.
    pub burn_in: usize,
    pub table: Vec<[f64; 4]>,
}

impl DgpConfig {
    pub fn simple(dgp_id: u8) -> Self {
        Self {
            dgp_id,
            n: 200,
            t: 11,
            k0: 4,
            rho: 0.7,
            v0: if dgp_id == 2 { 1.0 / 50.0 } else { 0.25 },
            noise_sd: 0.5,
            gamma: 1.5,
            z_cap: 10.0,
            burn_in: 100,
            table: GENERAL_TABLE.to_vec(),
        }
    }

    pub fn general() -> Self {
        Self {
            dgp_id: 3,
            ..Self::simple(3)
        }
    }

    pub fn for_id(dgp_id: u8) -> Result<Self> {
        match dgp_id {
            1 | 2 => Ok(Self::simple(dgp_id)),
            3 => Ok(Self::general()),
            other => Err(Error::Config(format!("unknown design {other}"))),
        }
    }
}

/// Scale `m` such that `alpha_k = m (k - (K0 + 1) / 2)` has cross-sectional
/// variance `v0 * K0^2`.
pub fn separation_scale(k0: usize, v0: f64) -> f64 {
    let c = (k0 as f64 + 1.0) / 2.0;
    let ss: f64 = (1..=k0).map(|k| (k as f64 - c).powi(2)).sum();
    if ss == 0.0 {
        return 0.0;
    }
    (v0 * (k0 as f64).powi(3) / ss).sqrt()
}

/// Group intercepts `m (k - (K0 + 1) / 2)`, `k = 1..K0`.
pub fn group_intercepts(k0: usize, v0: f64) -> Vec<f64> {
    let m = separation_scale(k0, v0);
    let c = (k0 as f64 + 1.0) / 2.0;
    (1..=k0).map(|k| m * (k as f64 - c)).collect()
}

/// Consecutive blocks of `n / k0` units; the remainder joins the last block.
pub fn true_partition(n: usize, k0: usize) -> GroupPartition {
    let size = (n / k0).max(1);
    let labels: Vec<usize> = (0..n).map(|i| (i / size).min(k0 - 1)).collect();
    GroupPartition::from_labels(&labels)
}

/// Ground truth for a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub partition: GroupPartition,
    /// Row-major `K0 x p` group coefficients in the estimation design.
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Common coefficient the harness reports on.
    pub common: f64,
}

/// `y_it = alpha_g + rho y_{i,t-1} + e`, started from the stationary law.
/// The panel has `x = [1]` and `z = [y_{t-1}]`.
pub fn generate_simple_dgp<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<(PanelDataset, Truth)> {
    if config.rho.abs() >= 1.0 {
        return Err(Error::Config("|rho| must be below 1".into()));
    }
    if config.k0 == 0 || config.n < config.k0 || config.t == 0 {
        return Err(Error::Config("need 1 <= k0 <= n and t >= 1".into()));
    }
    let (n, t, rho, sd) = (config.n, config.t, config.rho, config.noise_sd);
    let alphas = group_intercepts(config.k0, config.v0);
    let truth = true_partition(n, config.k0);
    let mut y = Vec::with_capacity(n * t);
    let mut z = Vec::with_capacity(n * t);
    for i in 0..n {
        let a = alphas[truth.label(i)];
        let e0: f64 = rng.sample(StandardNormal);
        let mut prev = a / (1.0 - rho) + sd / (1.0 - rho * rho).sqrt() * e0;
        for _ in 0..t {
            let e: f64 = rng.sample(StandardNormal);
            let cur = a + rho * prev + sd * e;
            z.push(prev);
            y.push(cur);
            prev = cur;
        }
    }
    let panel = labelled(n, t, y, vec![1.0; n * t], 1, z, 1, &["x_const"], &["z_ylag"])?.with_lag_column(LagColumn {
        block: Block::Z,
        column: 0,
    })?;
    Ok((
        panel,
        Truth {
            partition: truth,
            alpha: alphas,
            sigma2: vec![sd * sd; config.k0],
            common: rho,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn labelled(
    n: usize,
    t: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    p: usize,
    z: Vec<f64>,
    q: usize,
    x_names: &[&str],
    z_names: &[&str],
) -> Result<PanelDataset> {
    PanelDataset::new(
        n,
        t,
        y,
        x,
        p,
        z,
        q,
        (1..=n).map(|i| i.to_string()).collect(),
        (1..=t).map(|s| s.to_string()).collect(),
        x_names.iter().map(|s| s.to_string()).collect(),
        z_names.iter().map(|s| s.to_string()).collect(),
    )
}

/// `y_it = a0 + a1 y_{i,t-1} + a2 x2_it + gamma z_it + sigma_g e` with
/// `x2 ~ N(0, 1)` and `z ~ Gamma(1, 1)` capped. The panel has
/// `x = [1, y_{t-1}, x2]` and `z = [z]`.
pub fn generate_general_dgp<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<(PanelDataset, Truth)> {
    let k0 = config.table.len();
    if k0 == 0 || config.n < k0 || config.t == 0 {
        return Err(Error::Config("need a coefficient table and n >= groups".into()));
    }
    let (n, t) = (config.n, config.t);
    let truth = true_partition(n, k0);
    let zdist = Gamma::new(1.0, 1.0).expect("valid");
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * 3);
    let mut z = Vec::with_capacity(n * t);
    let step = |prev: f64, row: &[f64; 4], rng: &mut R| -> (f64, f64, f64) {
        let x2: f64 = rng.sample(StandardNormal);
        let zv: f64 = zdist.sample(rng);
        let zv = zv.min(config.z_cap);
        let e: f64 = rng.sample(StandardNormal);
        let cur = row[0] + row[1] * prev + row[2] * x2 + config.gamma * zv + row[3].sqrt() * e;
        (cur, x2, zv)
    };
    for i in 0..n {
        let row = config.table[truth.label(i)];
        let mut prev = 0.0;
        for _ in 0..config.burn_in {
            prev = step(prev, &row, rng).0;
        }
        for _ in 0..t {
            let (cur, x2, zv) = step(prev, &row, rng);
            y.push(cur);
            x.extend_from_slice(&[1.0, prev, x2]);
            z.push(zv);
            prev = cur;
        }
    }
    let panel = labelled(n, t, y, x, 3, z, 1, &["x_const", "x_ylag", "x2"], &["z1"])?.with_lag_column(LagColumn {
        block: Block::X,
        column: 1,
    })?;
    Ok((
        panel,
        Truth {
            partition: truth,
            alpha: config.table.iter().flat_map(|r| r[..3].iter().copied()).collect(),
            sigma2: config.table.iter().map(|r| r[3]).collect(),
            common: config.gamma,
        },
    ))
}

pub fn generate<R: Rng + ?Sized>(config: &DgpConfig, rng: &mut R) -> Result<(PanelDataset, Truth)> {
    match config.dgp_id {
        1 | 2 => generate_simple_dgp(config, rng),
        3 => generate_general_dgp(config, rng),
        other => Err(Error::Config(format!("unknown design {other}"))),
    }
}

/// Numbers of same-group and cross-group pairs under a partition. For
/// `K | N` blocks of equal size these are `N (N - K) / (2K)` and
/// `N^2 (K - 1) / (2K)`.
pub fn pair_counts(truth: &GroupPartition) -> (usize, usize) {
    let n = truth.n();
    let within: usize = truth.sizes().iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    (within, n * n.saturating_sub(1) / 2 - within)
}

/// Samples `fraction` of all positive and negative links implied by `truth`,
/// with accuracies from the correct-constraint distribution, then mislabels
/// a share `error_rate` of each type.
pub fn generate_constraints<R: Rng + ?Sized>(
    truth: &GroupPartition,
    fraction: f64,
    error_rate: f64,
    strength: f64,
    rng: &mut R,
) -> Result<ConstraintSet> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1]")));
    }
    let (n_pl_all, n_nl_all) = pair_counts(truth);
    let n_pl = (fraction * n_pl_all as f64).round() as usize;
    let n_nl = (fraction * n_nl_all as f64).round() as usize;
    let blocks = truth.blocks();
    let nu = Beta::new(3.0, 2.0).expect("valid");
    let draw_psi = |rng: &mut R| {
        let v: f64 = nu.sample(rng);
        (v / 2.0 + 0.5).min(HARD_ACCURACY)
    };
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n_pl + n_nl);

    let multi: Vec<usize> = (0..blocks.len()).filter(|&b| blocks[b].len() > 1).collect();
    while out.len() < n_pl {
        let b = &blocks[multi[rng.random_range(0..multi.len())]];
        let picks = rand::seq::index::sample(rng, b.len(), 2);
        let (i, j) = (b[picks.index(0)], b[picks.index(1)]);
        if seen.insert((i.min(j), i.max(j))) {
            let accuracy = draw_psi(rng);
            out.push(PairwiseConstraint {
                i,
                j,
                ctype: LinkType::PositiveLink,
                accuracy,
            });
        }
    }
    while out.len() < n_pl + n_nl {
        let gs = rand::seq::index::sample(rng, blocks.len(), 2);
        let (ba, bb) = (&blocks[gs.index(0)], &blocks[gs.index(1)]);
        let i = ba[rng.random_range(0..ba.len())];
        let j = bb[rng.random_range(0..bb.len())];
        if seen.insert((i.min(j), i.max(j))) {
            let accuracy = draw_psi(rng);
            out.push(PairwiseConstraint {
                i,
                j,
                ctype: LinkType::NegativeLink,
                accuracy,
            });
        }
    }
    let cs = ConstraintSet::new(truth.n(), out, strength)?;
    if error_rate > 0.0 {
        perturb_constraints(&cs, error_rate, rng)
    } else {
        Ok(cs)
    }
}
