//! Posterior predictive simulation and forecast scoring.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorChain;
use crate::panel::CovariateRows;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Predictive draws laid out as `S x N`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    pub n_draws: usize,
    pub n_units: usize,
    pub values: Vec<f64>,
}

impl DrawMatrix {
    /// All draws for unit `i`.
    pub fn unit(&self, i: usize) -> Vec<f64> {
        (0..self.n_draws).map(|s| self.values[s * self.n_units + i]).collect()
    }
}

fn check_covariates(chain: &PosteriorChain, cov: &CovariateRows) -> Result<()> {
    let p = chain.group_columns.len() + chain.common_x_columns.len();
    if cov.n_units != chain.n_units || cov.p != p || cov.q != chain.q {
        return Err(Error::DimensionMismatch(format!(
            "chain expects {} units with p={p}, q={}; covariates have {} units with p={}, q={}",
            chain.n_units, chain.q, cov.n_units, cov.p, cov.q
        )));
    }
    Ok(())
}

/// One simulated outcome per stored draw and unit:
/// `y ~ N(alpha_g' x + gamma' z, sigma2_g)`.
pub fn predictive_draws<R: Rng + ?Sized>(
    chain: &PosteriorChain,
    cov: &CovariateRows,
    rng: &mut R,
) -> Result<DrawMatrix> {
    check_covariates(chain, cov)?;
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let (s_n, n) = (chain.len(), chain.n_units);
    let mut values = Vec::with_capacity(s_n * n);
    for s in 0..s_n {
        for i in 0..n {
            let mu = chain.mean(s, i, cov.x_row(i), cov.z_row(i));
            let e: f64 = rng.sample(StandardNormal);
            values.push(mu + chain.variance(s, i).sqrt() * e);
        }
    }
    Ok(DrawMatrix {
        n_draws: s_n,
        n_units: n,
        values,
    })
}

/// Column means of the draw matrix.
pub fn point_forecast(draws: &DrawMatrix) -> Vec<f64> {
    let mut m = vec![0.0; draws.n_units];
    for row in draws.values.chunks(draws.n_units) {
        for (acc, v) in m.iter_mut().zip(row) {
            *acc += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= draws.n_draws as f64);
    m
}

/// Shortest window holding `ceil((1 - alpha) S)` of the sorted draws. Ties go
/// to the window with the lowest lower endpoint.
pub fn hpdi(draws: &[f64], alpha: f64) -> (f64, f64) {
    let mut x = draws.to_vec();
    x.sort_by(f64::total_cmp);
    hpdi_sorted(&x, alpha)
}

pub fn hpdi_sorted(x: &[f64], alpha: f64) -> (f64, f64) {
    let s = x.len();
    let m = (((1.0 - alpha) * s as f64) - 1e-9).ceil().clamp(1.0, s as f64) as usize;
    let mut best = 0;
    let mut best_len = x[m - 1] - x[0];
    for start in 1..=s - m {
        let len = x[start + m - 1] - x[start];
        if len < best_len - 1e-12 * best_len.abs().max(1e-300) {
            best = start;
            best_len = len;
        }
    }
    (x[best], x[best + m - 1])
}

/// CRPS from sorted draws:
/// `(2 / S^2) sum_j (x_j - y) (S 1{y < x_j} - j + 1/2)`, `j` 1-based.
pub fn crps(sorted: &[f64], y: f64) -> f64 {
    let s = sorted.len() as f64;
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let ind = if y < x { s } else { 0.0 };
            (x - y) * (ind - (k as f64 + 1.0) + 0.5)
        })
        .sum();
    2.0 * total / (s * s)
}

/// Per-unit negative log of the Rao-Blackwellized predictive density.
pub fn unit_log_scores(chain: &PosteriorChain, y: &[f64], cov: &CovariateRows) -> Result<Vec<f64>> {
    check_covariates(chain, cov)?;
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if y.len() != chain.n_units {
        return Err(Error::DimensionMismatch(format!("{} outcomes for {} units", y.len(), chain.n_units)));
    }
    let s_n = chain.len();
    Ok((0..chain.n_units)
        .into_par_iter()
        .map(|i| {
            let logs: Vec<f64> = (0..s_n)
                .map(|s| {
                    let mu = chain.mean(s, i, cov.x_row(i), cov.z_row(i));
                    let v = chain.variance(s, i);
                    -HALF_LN_2PI - 0.5 * v.ln() - (y[i] - mu).powi(2) / (2.0 * v)
                })
                .collect();
            -(log_sum_exp(&logs) - (s_n as f64).ln())
        })
        .collect())
}

/// Average log predictive score over units.
pub fn log_predictive_score(chain: &PosteriorChain, y: &[f64], cov: &CovariateRows) -> Result<f64> {
    let per = unit_log_scores(chain, y, cov)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub rmsfe: f64,
    pub coverage: f64,
    pub avg_length: f64,
    pub lps: f64,
    pub crps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMetrics {
    pub error: Vec<f64>,
    pub covered: Vec<bool>,
    pub lps: Vec<f64>,
    pub crps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub draws: DrawMatrix,
    pub metrics: Option<ForecastMetrics>,
    pub unit_metrics: Option<UnitMetrics>,
}

/// One-step forecast with interval at level `1 - alpha`. Metrics are filled
/// when realized outcomes are given.
pub fn forecast<R: Rng + ?Sized>(
    chain: &PosteriorChain,
    cov: &CovariateRows,
    realized: Option<&[f64]>,
    alpha: f64,
    rng: &mut R,
) -> Result<ForecastResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let draws = predictive_draws(chain, cov, rng)?;
    let point = point_forecast(&draws);
    let sorted: Vec<Vec<f64>> = (0..draws.n_units)
        .into_par_iter()
        .map(|i| {
            let mut d = draws.unit(i);
            d.sort_by(f64::total_cmp);
            d
        })
        .collect();
    let (lower, upper): (Vec<f64>, Vec<f64>) = sorted.iter().map(|d| hpdi_sorted(d, alpha)).unzip();

    let (metrics, unit_metrics) = match realized {
        None => (None, None),
        Some(y) => {
            let lps = unit_log_scores(chain, y, cov)?;
            let n = y.len() as f64;
            let error: Vec<f64> = y.iter().zip(&point).map(|(y, p)| y - p).collect();
            let covered: Vec<bool> = (0..y.len()).map(|i| lower[i] <= y[i] && y[i] <= upper[i]).collect();
            let crps_u: Vec<f64> = sorted.iter().zip(y).map(|(d, &yv)| crps(d, yv)).collect();
            let m = ForecastMetrics {
                rmsfe: (error.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
                coverage: covered.iter().filter(|&&c| c).count() as f64 / n,
                avg_length: lower.iter().zip(&upper).map(|(l, u)| u - l).sum::<f64>() / n,
                lps: lps.iter().sum::<f64>() / n,
                crps: crps_u.iter().sum::<f64>() / n,
            };
            let u = UnitMetrics {
                error,
                covered,
                lps,
                crps: crps_u,
            };
            (Some(m), Some(u))
        }
    };
    Ok(ForecastResult {
        point,
        lower,
        upper,
        draws,
        metrics,
        unit_metrics,
    })
}
