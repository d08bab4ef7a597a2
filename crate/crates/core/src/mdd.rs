//! Marginal data density by the harmonic mean, and grid search over the
//! constraint strength.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::dp_prior::DpHyper;
use crate::error::{Error, Result};
use crate::forecast::log_sum_exp;
use crate::gibbs::{run_chain, ChainSettings, PartitionMode, PosteriorChain};
use crate::panel::{ModelConfig, PanelDataset};
use crate::rng;

/// `-(logsumexp(-l) - ln S)`.
pub fn log_mdd_harmonic_mean(loglik: &[f64]) -> f64 {
    let neg: Vec<f64> = loglik.iter().map(|l| -l).collect();
    -(log_sum_exp(&neg) - (loglik.len() as f64).ln())
}

/// Harmonic-mean estimate with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MddEstimate {
    pub log_mdd: f64,
    /// Effective sample size of the importance weights `exp(-l_j)`.
    pub ess: f64,
    /// Delete-one-batch jackknife standard error of `log_mdd`.
    pub mc_se: f64,
}

/// Jackknife over `floor(sqrt(S))` contiguous batches of the importance
/// weights. When one draw dominates, dropping its batch moves the estimate by
/// a lot and the standard error says so; a delta-method error does not.
fn jackknife_se(h: &[f64]) -> f64 {
    let s = h.len();
    let n_batches = ((s as f64).sqrt().floor() as usize).max(2);
    let b = s / n_batches;
    if b == 0 {
        return f64::NAN;
    }
    let sums: Vec<f64> = h[..n_batches * b].chunks(b).map(|c| c.iter().sum()).collect();
    let total: f64 = sums.iter().sum();
    let kept = ((n_batches - 1) * b) as f64;
    let leave_out: Vec<f64> = sums.iter().map(|&x| -((total - x) / kept).ln()).collect();
    let mean = leave_out.iter().sum::<f64>() / n_batches as f64;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    (ss * (n_batches - 1) as f64 / n_batches as f64).sqrt()
}

pub fn mdd_estimate(loglik: &[f64]) -> Result<MddEstimate> {
    if loglik.is_empty() {
        return Err(Error::EmptyChain);
    }
    let log_mdd = log_mdd_harmonic_mean(loglik);
    let shift = loglik.iter().map(|l| -l).fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Ok(MddEstimate {
            log_mdd,
            ess: 1.0,
            mc_se: f64::NAN,
        });
    }
    let h: Vec<f64> = loglik.iter().map(|l| (-l - shift).exp()).collect();
    let sum: f64 = h.iter().sum();
    let ess = sum * sum / h.iter().map(|x| x * x).sum::<f64>();
    let mc_se = jackknife_se(&h);
    Ok(MddEstimate { log_mdd, ess, mc_se })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MddResult {
    pub grid: Vec<f64>,
    pub log_mdd: Vec<f64>,
    pub mc_se: Vec<f64>,
    pub ess: Vec<f64>,
    pub c_star: f64,
}

/// Index of the largest value; ties go to the smallest grid value.
pub fn argmax_c(grid: &[f64], log_mdd: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..grid.len() {
        let better = log_mdd[k] > log_mdd[best] || (log_mdd[k] == log_mdd[best] && grid[k] < grid[best]);
        if better {
            best = k;
        }
    }
    best
}

/// Runs one chain per grid value in parallel, each on its own stream of
/// `seed`, and picks the strength with the largest MDD.
#[allow(clippy::too_many_arguments)]
pub fn select_c(
    data: &PanelDataset,
    model: &ModelConfig,
    cs_template: &ConstraintSet,
    hyper: &DpHyper,
    grid: &[f64],
    settings: &ChainSettings,
    seed: u64,
) -> Result<(MddResult, Vec<PosteriorChain>)> {
    if grid.is_empty() {
        return Err(Error::Config("c grid is empty".into()));
    }
    if grid.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::Config("c grid values must be >= 0".into()));
    }
    let chains: Vec<PosteriorChain> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &c)| {
            let cs = cs_template.with_strength(c)?;
            let mut r = rng::stream(seed, k as u64);
            run_chain(data, model, &cs, hyper, PartitionMode::Free, settings, &mut r)
        })
        .collect::<Result<_>>()?;
    let est: Vec<MddEstimate> = chains
        .iter()
        .map(|ch| mdd_estimate(&ch.logliks()))
        .collect::<Result<_>>()?;
    let log_mdd: Vec<f64> = est.iter().map(|e| e.log_mdd).collect();
    let best = argmax_c(grid, &log_mdd);
    Ok((
        MddResult {
            grid: grid.to_vec(),
            c_star: grid[best],
            mc_se: est.iter().map(|e| e.mc_se).collect(),
            ess: est.iter().map(|e| e.ess).collect(),
            log_mdd,
        },
        chains,
    ))
}
