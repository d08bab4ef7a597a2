//! Replication harness: simulate, estimate with several estimators, score
//! coefficient recovery, one-step forecasts and the number of groups.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::dgp::{self, DgpConfig, Truth};
use crate::dp_prior::DpHyper;
use crate::error::{Error, Result};
use crate::forecast::{forecast, hpdi};
use crate::gibbs::{run_chain, ChainSettings, PartitionMode, PosteriorChain};
use crate::panel::{split_holdout, ModelConfig, PanelDataset};
use crate::partition::GroupPartition;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Partition sampled under the DP prior.
    Bgfe,
    /// Partition fixed at the truth.
    Oracle,
    /// One group.
    Pooled,
    /// One group per unit, flat coefficient prior.
    Flat,
}

/// An estimator name such as `bgfe`, `bgfe-he-cstr` or `flat-ho`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub constrained: bool,
    /// `None` follows the design: homoskedastic for DGPs 1-2, grouped
    /// variances for DGP 3.
    pub heteroskedastic: Option<bool>,
}

impl EstimatorSpec {
    pub fn hetero_for(&self, dgp_id: u8) -> bool {
        self.heteroskedastic.unwrap_or(dgp_id == 3)
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('-');
        let kind = match parts.next().unwrap_or("") {
            "bgfe" => EstimatorKind::Bgfe,
            "oracle" => EstimatorKind::Oracle,
            "pooled" => EstimatorKind::Pooled,
            "flat" => EstimatorKind::Flat,
            other => return Err(Error::Config(format!("unknown estimator '{other}'"))),
        };
        let mut spec = EstimatorSpec {
            kind,
            constrained: false,
            heteroskedastic: None,
        };
        for tag in parts {
            match tag {
                "he" => spec.heteroskedastic = Some(true),
                "ho" => spec.heteroskedastic = Some(false),
                "oracle" if kind == EstimatorKind::Bgfe => spec.kind = EstimatorKind::Oracle,
                "cstr" if kind == EstimatorKind::Bgfe => spec.constrained = true,
                other => return Err(Error::Config(format!("unknown estimator suffix '{other}' in '{s}'"))),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            EstimatorKind::Bgfe => "bgfe",
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::Pooled => "pooled",
            EstimatorKind::Flat => "flat",
        };
        f.write_str(base)?;
        match self.heteroskedastic {
            Some(true) => f.write_str("-he")?,
            Some(false) => f.write_str("-ho")?,
            None => {}
        }
        if self.constrained {
            f.write_str("-cstr")?;
        }
        Ok(())
    }
}

pub fn parse_estimators(list: &str) -> Result<Vec<EstimatorSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: DgpConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub n_reps: usize,
    pub settings: ChainSettings,
    pub seed: u64,
    /// Constraint strength for the constrained estimators.
    pub strength: f64,
    /// Share of all true pairwise relations turned into constraints.
    pub fraction: f64,
    /// Share of constraints of each type that are mislabeled.
    pub error_rate: f64,
    /// Forecast and credible interval level is `1 - alpha`.
    pub alpha: f64,
}

impl McConfig {
    pub fn new(dgp: DgpConfig, estimators: Vec<EstimatorSpec>, n_reps: usize, seed: u64) -> Self {
        Self {
            dgp,
            estimators,
            n_reps,
            settings: ChainSettings::default(),
            seed,
            strength: 0.5,
            fraction: 0.05,
            error_rate: 0.2,
            alpha: 0.05,
        }
    }
}

/// Outcome of one estimator on one simulated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub estimator: String,
    /// Posterior mean of the common coefficient.
    pub common_hat: f64,
    pub common_lower: f64,
    pub common_upper: f64,
    /// Per group-specific coefficient: RMSE and mean absolute error over units.
    pub alpha_rmse: Vec<f64>,
    pub alpha_abs_bias: Vec<f64>,
    pub rmsfe: f64,
    pub lps: f64,
    pub crps: f64,
    pub fc_coverage: f64,
    pub fc_avg_length: f64,
    /// Mean number of groups across draws; absent for fixed partitions.
    pub avg_k: Option<f64>,
    /// Share of draws with exactly the true number of groups.
    pub pct_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub completed: usize,
    pub failed: usize,
    pub rmse: f64,
    pub bias: f64,
    pub std: f64,
    pub avg_length: f64,
    pub coverage: f64,
    pub alpha_rmse: Vec<f64>,
    pub alpha_abs_bias: Vec<f64>,
    pub rmsfe: f64,
    pub lps: f64,
    pub crps: f64,
    pub fc_coverage: f64,
    pub fc_avg_length: f64,
    pub avg_k: Option<f64>,
    pub pct_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub dgp_id: u8,
    pub n_reps: usize,
    pub true_common: f64,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<ReplicationRecord>,
}

impl McReport {
    pub fn summary(&self, estimator: &str) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }

    /// Records of one estimator, ordered by replication.
    pub fn records_for(&self, estimator: &str) -> Vec<&ReplicationRecord> {
        self.records.iter().filter(|r| r.estimator == estimator).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn estimate_one(
    spec: &EstimatorSpec,
    data: &PanelDataset,
    truth: &Truth,
    constraints: &ConstraintSet,
    config: &McConfig,
    rep: usize,
    rep_seed: u64,
    stream: u64,
) -> Result<ReplicationRecord> {
    let (train, hold) = split_holdout(data, 1)?;
    let (n, _, p, _) = train.dims();
    let model = ModelConfig::all_grouped(p, spec.hetero_for(config.dgp.dgp_id));
    let mut hyper = DpHyper::default_for(p);
    let none = ConstraintSet::empty(n);
    let mode = match spec.kind {
        EstimatorKind::Bgfe => PartitionMode::Free,
        EstimatorKind::Oracle => PartitionMode::Fixed(truth.partition.clone()),
        EstimatorKind::Pooled => PartitionMode::Fixed(GroupPartition::one_block(n)),
        EstimatorKind::Flat => {
            hyper.flat_alpha = true;
            PartitionMode::Fixed(GroupPartition::singletons(n))
        }
    };
    let cs = if spec.constrained { constraints } else { &none };
    let mut r = rng::stream(rep_seed, stream);
    let chain = run_chain(&train, &model, cs, &hyper, mode, &config.settings, &mut r)?;
    let fc = forecast(&chain, &hold.covariates(0), Some(&hold.outcomes(0)), config.alpha, &mut r)?;
    let fm = fc.metrics.expect("realized outcomes were supplied");

    let common: Vec<f64> = chain.draws.iter().map(|d| d.gamma[0]).collect();
    let common_hat = common.iter().sum::<f64>() / common.len() as f64;
    let (common_lower, common_upper) = hpdi(&common, config.alpha);
    let (alpha_rmse, alpha_abs_bias) = alpha_errors(&chain, truth, p);
    let (avg_k, pct_k) = match spec.kind {
        EstimatorKind::Bgfe => {
            let s = chain.len() as f64;
            let k0 = truth.partition.k();
            (
                Some(chain.draws.iter().map(|d| d.k() as f64).sum::<f64>() / s),
                Some(chain.draws.iter().filter(|d| d.k() == k0).count() as f64 / s),
            )
        }
        _ => (None, None),
    };
    Ok(ReplicationRecord {
        rep,
        estimator: spec.to_string(),
        common_hat,
        common_lower,
        common_upper,
        alpha_rmse,
        alpha_abs_bias,
        rmsfe: fm.rmsfe,
        lps: fm.lps,
        crps: fm.crps,
        fc_coverage: fm.coverage,
        fc_avg_length: fm.avg_length,
        avg_k,
        pct_k,
    })
}

/// Per coefficient, RMSE and mean absolute error of the unit-level posterior
/// means against the truth.
fn alpha_errors(chain: &PosteriorChain, truth: &Truth, p: usize) -> (Vec<f64>, Vec<f64>) {
    let n = chain.n_units;
    let s_n = chain.len() as f64;
    let mut sq = vec![0.0; p];
    let mut ab = vec![0.0; p];
    for i in 0..n {
        let g = truth.partition.label(i);
        for c in 0..p {
            let mean: f64 = chain.draws.iter().map(|d| d.alpha_row(d.labels[i], p)[c]).sum::<f64>() / s_n;
            let err = mean - truth.alpha[g * p + c];
            sq[c] += err * err;
            ab[c] += err.abs();
        }
    }
    (
        sq.iter().map(|v| (v / n as f64).sqrt()).collect(),
        ab.iter().map(|v| v / n as f64).collect(),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn summarize(name: &str, recs: &[&ReplicationRecord], failed: usize, truth_common: f64) -> EstimatorSummary {
    let done = recs.len();
    let nan = f64::NAN;
    if done == 0 {
        return EstimatorSummary {
            estimator: name.to_string(),
            completed: 0,
            failed,
            rmse: nan,
            bias: nan,
            std: nan,
            avg_length: nan,
            coverage: nan,
            alpha_rmse: vec![],
            alpha_abs_bias: vec![],
            rmsfe: nan,
            lps: nan,
            crps: nan,
            fc_coverage: nan,
            fc_avg_length: nan,
            avg_k: None,
            pct_k: None,
        };
    }
    let hats: Vec<f64> = recs.iter().map(|r| r.common_hat).collect();
    let m = mean(&hats);
    let var = if done > 1 {
        hats.iter().map(|h| (h - m).powi(2)).sum::<f64>() / (done - 1) as f64
    } else {
        0.0
    };
    let col = |f: &dyn Fn(&ReplicationRecord) -> f64| mean(&recs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let p = recs[0].alpha_rmse.len();
    let opt = |f: &dyn Fn(&ReplicationRecord) -> Option<f64>| {
        let v: Option<Vec<f64>> = recs.iter().map(|r| f(r)).collect();
        v.map(|v| mean(&v))
    };
    EstimatorSummary {
        estimator: name.to_string(),
        completed: done,
        failed,
        rmse: mean(&hats.iter().map(|h| (h - truth_common).powi(2)).collect::<Vec<_>>()).sqrt(),
        bias: m - truth_common,
        std: var.sqrt(),
        avg_length: col(&|r| r.common_upper - r.common_lower),
        coverage: col(&|r| f64::from(u8::from(r.common_lower <= truth_common && truth_common <= r.common_upper))),
        alpha_rmse: (0..p).map(|c| col(&|r| r.alpha_rmse[c])).collect(),
        alpha_abs_bias: (0..p).map(|c| col(&|r| r.alpha_abs_bias[c])).collect(),
        rmsfe: col(&|r| r.rmsfe),
        lps: col(&|r| r.lps),
        crps: col(&|r| r.crps),
        fc_coverage: col(&|r| r.fc_coverage),
        fc_avg_length: col(&|r| r.fc_avg_length),
        avg_k: opt(&|r| r.avg_k),
        pct_k: opt(&|r| r.pct_k),
    }
}

/// The constraint set shared by every replication of a study.
pub fn study_constraints(config: &McConfig) -> Result<ConstraintSet> {
    let k0 = if config.dgp.dgp_id == 3 {
        config.dgp.table.len()
    } else {
        config.dgp.k0
    };
    let truth = dgp::true_partition(config.dgp.n, k0);
    let mut r = rng::stream(config.seed, 0);
    dgp::generate_constraints(&truth, config.fraction, config.error_rate, config.strength, &mut r)
}

/// The simulated panel of replication `rep`.
pub fn replication_data(config: &McConfig, rep: usize) -> Result<(PanelDataset, Truth)> {
    let rep_seed = rng::child_seed(config.seed, rep as u64 + 1);
    let mut r = rng::stream(rep_seed, 0);
    dgp::generate(&config.dgp, &mut r)
}

/// Runs `n_reps` replications in parallel. The constraint set is drawn once
/// from the true partition and shared by every replication; each replication
/// simulates its own panel from a seed derived from the master seed.
/// Failed estimator runs are logged and left out of the averages.
pub fn run_monte_carlo(config: &McConfig) -> Result<McReport> {
    if config.n_reps == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::Config("no estimators requested".into()));
    }
    let constraints = study_constraints(config)?;

    let outcomes: Vec<(usize, usize, Result<ReplicationRecord>)> = (0..config.n_reps)
        .into_par_iter()
        .flat_map_iter(|rep| {
            let rep_seed = rng::child_seed(config.seed, rep as u64 + 1);
            let sim = replication_data(config, rep);
            let constraints = &constraints;
            config.estimators.iter().enumerate().map(move |(e, spec)| {
                let res = match &sim {
                    Ok((data, truth)) => {
                        estimate_one(spec, data, truth, constraints, config, rep, rep_seed, e as u64 + 1)
                    }
                    Err(err) => Err(Error::Config(format!("simulation failed: {err}"))),
                };
                (rep, e, res)
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failed = vec![0usize; config.estimators.len()];
    for (rep, e, res) in outcomes {
        match res {
            Ok(r) => records.push(r),
            Err(err) => {
                log::warn!("replication {rep}, estimator {}: {err}", config.estimators[e]);
                failed[e] += 1;
            }
        }
    }
    let true_common = if config.dgp.dgp_id == 3 {
        config.dgp.gamma
    } else {
        config.dgp.rho
    };
    let summaries = config
        .estimators
        .iter()
        .zip(&failed)
        .map(|(spec, &f)| {
            let name = spec.to_string();
            let recs: Vec<&ReplicationRecord> = records.iter().filter(|r| r.estimator == name).collect();
            summarize(&name, &recs, f, true_common)
        })
        .collect();
    Ok(McReport {
        dgp_id: config.dgp.dgp_id,
        n_reps: config.n_reps,
        true_common,
        summaries,
        records,
    })
}
