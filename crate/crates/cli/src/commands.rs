use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bgfe::constraints::{constraints_from_pregrouping, load_constraints, read_pregrouping, write_constraints};
use bgfe::dgp::DgpConfig;
use bgfe::forecast::{forecast, hpdi, ForecastResult};
use bgfe::gibbs::run_chain;
use bgfe::io::{self, ChainLabels, PartitionDocument};
use bgfe::mdd::select_c;
use bgfe::montecarlo::{parse_estimators, replication_data, run_monte_carlo, study_constraints, McConfig};
use bgfe::panel::{load_panel, split_holdout, write_panel, Block, CovariateRows};
use bgfe::partition_point::{compute_psm, point_estimate_partition};
use bgfe::spc_kmeans::{spc_gfe, KmeansConfig, PairCosts};
use bgfe::{ConstraintSet, ModelConfig, PanelDataset, PartitionMode, PosteriorChain};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::UsageError;

/// Stream id for predictive draws, away from the chain streams.
const FORECAST_STREAM: u64 = 1 << 40;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Long-format panel CSV with unit, period, y, x* and z* columns.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Constraint CSV with columns i, j, type (PL/NL), accuracy.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Constraint strength.
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Comma-separated strengths; the one with the largest marginal data
    /// density is kept.
    #[arg(long, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub burn: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Append the lag of y as a covariate in block x or z.
    #[arg(long, value_parser = ["x", "z"])]
    pub make_lag: Option<String>,
    /// x-columns with common coefficients.
    #[arg(long, value_delimiter = ',')]
    pub common_x: Option<Vec<String>>,
    /// One error variance shared by all groups.
    #[arg(long)]
    pub homoskedastic: bool,
    /// Trailing periods held out of estimation.
    #[arg(long)]
    pub holdout: Option<usize>,
    /// Interval level is 1 - alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = &self.panel {
            cfg.panel = Some(v.clone());
        }
        if let Some(v) = &self.constraints {
            cfg.constraints = Some(v.clone());
        }
        if let Some(v) = self.c {
            cfg.c = v;
        }
        if let Some(v) = &self.c_grid {
            cfg.c_grid = Some(v.clone());
        }
        if let Some(v) = self.burn {
            cfg.chain.burn = v;
        }
        if let Some(v) = self.keep {
            cfg.chain.keep = v;
        }
        if let Some(v) = self.thin {
            cfg.chain.thin = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.make_lag {
            cfg.make_lag = Some(v.clone());
        }
        if let Some(v) = &self.common_x {
            cfg.model.common_x = v.clone();
        }
        if self.homoskedastic {
            cfg.model.heteroskedastic = false;
        }
        if let Some(v) = self.holdout {
            cfg.forecast.holdout = v;
        }
        if let Some(v) = self.alpha {
            cfg.forecast.alpha = v;
        }
        if cfg.chain.keep == 0 {
            return Err(UsageError("keep must be at least 1".into()).into());
        }
        if !(cfg.forecast.alpha > 0.0 && cfg.forecast.alpha < 1.0) {
            return Err(UsageError(format!("alpha must lie in (0, 1), got {}", cfg.forecast.alpha)).into());
        }
        Ok(cfg)
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_data(cfg: &RunConfig) -> Result<PanelDataset> {
    let path = cfg
        .panel
        .as_ref()
        .ok_or_else(|| UsageError("no panel given (use --panel or the config file)".into()))?;
    let data = load_panel(path, None)?;
    Ok(match cfg.make_lag.as_deref() {
        None => data,
        Some("x") => data.make_lag(Block::X, "x_ylag")?,
        Some("z") => data.make_lag(Block::Z, "z_ylag")?,
        Some(other) => return Err(UsageError(format!("make_lag must be x or z, got {other:?}")).into()),
    })
}

fn model_for(cfg: &RunConfig, data: &PanelDataset) -> Result<ModelConfig> {
    for name in &cfg.model.common_x {
        if !data.x_names().contains(name) {
            return Err(UsageError(format!("common_x names unknown column {name:?}")).into());
        }
    }
    let model = ModelConfig {
        group_slopes: data.x_names().iter().map(|n| !cfg.model.common_x.contains(n)).collect(),
        heteroskedastic: cfg.model.heteroskedastic,
    };
    model.validate(data)?;
    Ok(model)
}

fn constraints_for(cfg: &RunConfig, data: &PanelDataset, strength: f64) -> Result<ConstraintSet> {
    match &cfg.constraints {
        Some(path) => {
            if !path.exists() {
                return Err(UsageError(format!("constraint file not found: {}", path.display())).into());
            }
            Ok(load_constraints(path, data.unit_ids(), strength)?)
        }
        None => Ok(ConstraintSet::empty(data.n_units())),
    }
}

/// A chain together with the labels needed to read it back.
#[derive(Debug, Serialize, Deserialize)]
pub struct ChainFile {
    pub seed: u64,
    pub config_hash: String,
    pub unit_ids: Vec<String>,
    pub group_names: Vec<String>,
    pub common_names: Vec<String>,
    pub chain: PosteriorChain,
}

impl ChainFile {
    fn labels(&self) -> ChainLabels {
        ChainLabels {
            unit_ids: self.unit_ids.clone(),
            group_names: self.group_names.clone(),
            common_names: self.common_names.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CoefficientSummary {
    name: String,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize)]
struct PosteriorSummary {
    config_hash: String,
    seed: u64,
    strength: f64,
    n_draws: usize,
    k_mean: f64,
    /// Share of draws by number of occupied groups.
    k_distribution: BTreeMap<usize, f64>,
    a_mean: f64,
    common: Vec<CoefficientSummary>,
    point_estimate_k: usize,
    slice_checks: usize,
    slice_violations: usize,
    slice_capped: usize,
}

fn summarize(file: &ChainFile, strength: f64, point_k: usize, alpha: f64) -> PosteriorSummary {
    let chain = &file.chain;
    let s = chain.len() as f64;
    let mut k_distribution = BTreeMap::new();
    for d in &chain.draws {
        *k_distribution.entry(d.k()).or_insert(0.0) += 1.0 / s;
    }
    let common = file
        .common_names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let v: Vec<f64> = chain.draws.iter().map(|d| d.gamma[c]).collect();
            let mean = v.iter().sum::<f64>() / s;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / s).sqrt();
            let (lower, upper) = hpdi(&v, alpha);
            CoefficientSummary {
                name: name.clone(),
                mean,
                sd,
                lower,
                upper,
            }
        })
        .collect();
    PosteriorSummary {
        config_hash: file.config_hash.clone(),
        seed: file.seed,
        strength,
        n_draws: chain.len(),
        k_mean: chain.draws.iter().map(|d| d.k() as f64).sum::<f64>() / s,
        k_distribution,
        a_mean: chain.draws.iter().map(|d| d.a).sum::<f64>() / s,
        common,
        point_estimate_k: point_k,
        slice_checks: chain.diagnostics.sweeps_checked,
        slice_violations: chain.diagnostics.violations,
        slice_capped: chain.diagnostics.capped,
    }
}

/// Runs the sampler (or the strength search) on `train` and writes the chain
/// artifacts. Returns the chain file and the strength used.
fn estimate_into(cfg: &RunConfig, hash: &str, train: &PanelDataset, out: &Path) -> Result<(ChainFile, f64)> {
    let model = model_for(cfg, train)?;
    let hyper = cfg.prior.hyper(model.group_columns().len());
    let settings = cfg.chain.settings();
    let (chain, strength) = match &cfg.c_grid {
        Some(grid) => {
            let template = constraints_for(cfg, train, 0.0)?;
            let (mdd, chains) = select_c(train, &model, &template, &hyper, grid, &settings, cfg.seed)?;
            log::info!("selected c = {} from {:?}", mdd.c_star, mdd.grid);
            io::write_json(&mdd, &out.join("mdd.json"))?;
            let best = grid.iter().position(|&c| c == mdd.c_star).expect("c_star is on the grid");
            (chains.into_iter().nth(best).expect("one chain per grid value"), mdd.c_star)
        }
        None => {
            let cs = constraints_for(cfg, train, cfg.c)?;
            let mut rng = bgfe::rng::from_seed(cfg.seed);
            let chain = run_chain(train, &model, &cs, &hyper, PartitionMode::Free, &settings, &mut rng)?;
            (chain, cfg.c)
        }
    };
    let labels = ChainLabels::from_panel(train, &model);
    let file = ChainFile {
        seed: cfg.seed,
        config_hash: hash.to_string(),
        unit_ids: labels.unit_ids,
        group_names: labels.group_names,
        common_names: labels.common_names,
        chain,
    };
    io::with_file(&out.join("chain.csv"), |w| io::write_chain_csv(&file.chain, &file.labels(), w))?;
    io::write_json(&file, &out.join("chain.json"))?;
    Ok((file, strength))
}

fn write_partition_outputs(file: &ChainFile, out: &Path) -> Result<usize> {
    let psm = compute_psm(&file.chain)?;
    io::with_file(&out.join("psm.csv"), |w| io::write_psm_csv(&psm, &file.unit_ids, w))?;
    let est = point_estimate_partition(&file.chain, &psm)?;
    io::write_json(&PartitionDocument::new(&est, &file.unit_ids), &out.join("partition.json"))?;
    Ok(est.g_star.k())
}

pub fn cmd_estimate(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let data = load_data(&cfg)?;
    prepare_out(&args.out)?;
    let hash = cfg.snapshot(&args.out)?;
    let train = if cfg.forecast.holdout > 0 {
        split_holdout(&data, cfg.forecast.holdout)?.0
    } else {
        data
    };
    let (file, strength) = estimate_into(&cfg, &hash, &train, &args.out)?;
    let k = write_partition_outputs(&file, &args.out)?;
    io::write_json(
        &summarize(&file, strength, k, cfg.forecast.alpha),
        &args.out.join("posterior-summary.json"),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Reuse a chain.json from an earlier estimate on the same training panel.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Covariates for the period after the panel (unit column plus the
    /// panel's x and z columns; a lag of y is filled in automatically).
    #[arg(long)]
    pub next: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct StepMetrics {
    period: String,
    rmsfe: f64,
    coverage: f64,
    avg_length: f64,
    lps: f64,
    crps: f64,
}

#[derive(Debug, Serialize)]
struct MetricsDocument {
    config_hash: String,
    alpha: f64,
    steps: Vec<StepMetrics>,
}

fn read_next_covariates(path: &Path, data: &PanelDataset) -> Result<CovariateRows> {
    if !path.exists() {
        return Err(UsageError(format!("covariate file not found: {}", path.display())).into());
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let unit_col = col("unit").ok_or_else(|| UsageError("covariate file needs a unit column".into()))?;
    let (n, t, p, q) = data.dims();
    let lag = data.lag_column();
    let mut rows: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let unit = &rec[unit_col];
        let i = data
            .unit_index(unit)
            .ok_or_else(|| UsageError(format!("unknown unit {unit:?} in covariate file")))?;
        let fill = |names: &[String], block: Block| -> Result<Vec<f64>> {
            names
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    if lag.is_some_and(|l| l.block == block && l.column == c) {
                        return Ok(data.y(i, t - 1));
                    }
                    let k = col(name).ok_or_else(|| UsageError(format!("covariate file lacks column {name:?}")))?;
                    rec[k]
                        .parse::<f64>()
                        .map_err(|_| UsageError(format!("non-numeric {name} for unit {unit}")).into())
                })
                .collect()
        };
        let x = fill(data.x_names(), Block::X)?;
        let z = fill(data.z_names(), Block::Z)?;
        rows.insert(i, (x, z));
    }
    if rows.len() != n {
        bail!(UsageError(format!("covariate file covers {} of {n} units", rows.len())));
    }
    let mut x = Vec::with_capacity(n * p);
    let mut z = Vec::with_capacity(n * q);
    for (xr, zr) in rows.into_values() {
        x.extend(xr);
        z.extend(zr);
    }
    Ok(CovariateRows::new(n, x, p, z, q)?)
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let mut cfg = args.run.resolve()?;
    if cfg.forecast.holdout == 0 && args.next.is_none() {
        if args.run.holdout.is_none() {
            cfg.forecast.holdout = 1;
        } else {
            bail!(UsageError("nothing to forecast: --holdout 0 and no --next file".into()));
        }
    }
    let data = load_data(&cfg)?;
    prepare_out(&args.run.out)?;
    let hash = cfg.snapshot(&args.run.out)?;
    let (train, hold) = if cfg.forecast.holdout > 0 {
        let (tr, h) = split_holdout(&data, cfg.forecast.holdout)?;
        (tr, Some(h))
    } else {
        (data.clone(), None)
    };
    let file = match &args.chain {
        Some(path) => {
            let f: ChainFile = io::read_json(path).with_context(|| format!("reading chain {}", path.display()))?;
            if f.unit_ids != train.unit_ids() {
                bail!(UsageError("chain units do not match the panel".into()));
            }
            f
        }
        None => estimate_into(&cfg, &hash, &train, &args.run.out)?.0,
    };

    let mut rng = bgfe::rng::stream(cfg.seed, FORECAST_STREAM);
    let alpha = cfg.forecast.alpha;
    let mut results: Vec<(String, ForecastResult, Option<Vec<f64>>)> = Vec::new();
    if let Some(h) = &hold {
        for step in 0..h.horizon() {
            let y = h.outcomes(step);
            let fc = forecast(&file.chain, &h.covariates(step), Some(&y), alpha, &mut rng)?;
            results.push((h.period_ids()[step].clone(), fc, Some(y)));
        }
    }
    if let Some(path) = &args.next {
        let cov = read_next_covariates(path, &data)?;
        let fc = forecast(&file.chain, &cov, None, alpha, &mut rng)?;
        results.push(("next".to_string(), fc, None));
    }
    let rows: Vec<(String, &ForecastResult, Option<&[f64]>)> =
        results.iter().map(|(p, f, y)| (p.clone(), f, y.as_deref())).collect();
    io::with_file(&args.run.out.join("forecast.csv"), |w| {
        io::write_forecast_rows(&rows, &file.unit_ids, w)
    })?;
    let steps = results
        .iter()
        .filter_map(|(period, fc, _)| {
            fc.metrics.as_ref().map(|m| StepMetrics {
                period: period.clone(),
                rmsfe: m.rmsfe,
                coverage: m.coverage,
                avg_length: m.avg_length,
                lps: m.lps,
                crps: m.crps,
            })
        })
        .collect::<Vec<_>>();
    if !steps.is_empty() {
        io::write_json(
            &MetricsDocument {
                config_hash: hash,
                alpha,
                steps,
            },
            &args.run.out.join("metrics.json"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dgp: u8,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "bgfe,bgfe-cstr,oracle,pooled,flat")]
    pub estimators: String,
    #[arg(long, default_value_t = 5000)]
    pub burn: usize,
    #[arg(long, default_value_t = 5000)]
    pub keep: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Constraint strength for the constrained estimators.
    #[arg(long = "c", default_value_t = 0.5)]
    pub c: f64,
    /// Share of the true pairwise relations given as constraints.
    #[arg(long, default_value_t = 0.05)]
    pub fraction: f64,
    /// Share of constraints of each type that are mislabeled.
    #[arg(long, default_value_t = 0.2)]
    pub error_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Override the number of units.
    #[arg(long)]
    pub n: Option<usize>,
    /// Write the first replication's panel, truth and constraints and stop.
    #[arg(long)]
    pub export: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct McRun<'a> {
    config_hash: String,
    config: &'a McConfig,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut dgp = DgpConfig::for_id(args.dgp)?;
    if let Some(n) = args.n {
        dgp.n = n;
    }
    let estimators = parse_estimators(&args.estimators).map_err(|e| UsageError(e.to_string()))?;
    let mut cfg = McConfig::new(dgp, estimators, args.reps, args.seed);
    cfg.settings = bgfe::ChainSettings {
        n_burn: args.burn,
        n_keep: args.keep,
        thin: args.thin,
    };
    cfg.strength = args.c;
    cfg.fraction = args.fraction;
    cfg.error_rate = args.error_rate;
    cfg.alpha = args.alpha;
    prepare_out(&args.out)?;
    let json = serde_json::to_string(&cfg)?;
    let hash = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(json.as_bytes()));
    io::write_json(
        &McRun {
            config_hash: hash,
            config: &cfg,
        },
        &args.out.join("config.json"),
    )?;

    if args.export {
        let (data, truth) = replication_data(&cfg, 0)?;
        write_panel(&data, &args.out.join("panel.csv"))?;
        let cs = study_constraints(&cfg)?;
        io::with_file(&args.out.join("constraints.csv"), |w| write_constraints(&cs, data.unit_ids(), w))?;
        let mut w = csv::Writer::from_path(args.out.join("truth.csv"))?;
        w.write_record(["unit", "group"])?;
        for (u, g) in data.unit_ids().iter().zip(truth.partition.one_based()) {
            w.write_record([u.clone(), g.to_string()])?;
        }
        w.flush()?;
        return Ok(());
    }
    if args.reps == 0 {
        bail!(UsageError("reps must be at least 1".into()));
    }

    let report = run_monte_carlo(&cfg)?;
    io::write_json(&report, &args.out.join("mc_report.json"))?;
    let mut w = csv::Writer::from_path(args.out.join("mc_summary.csv"))?;
    w.write_record([
        "estimator", "completed", "failed", "rmse", "bias", "std", "avg_length", "coverage", "rmsfe", "lps", "crps",
        "fc_coverage", "fc_avg_length", "avg_k", "pct_k",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &report.summaries {
        w.write_record([
            s.estimator.clone(),
            s.completed.to_string(),
            s.failed.to_string(),
            s.rmse.to_string(),
            s.bias.to_string(),
            s.std.to_string(),
            s.avg_length.to_string(),
            s.coverage.to_string(),
            s.rmsfe.to_string(),
            s.lps.to_string(),
            s.crps.to_string(),
            s.fc_coverage.to_string(),
            s.fc_avg_length.to_string(),
            opt(s.avg_k),
            opt(s.pct_k),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(args.out.join("mc_records.csv"))?;
    w.write_record([
        "rep", "estimator", "common_hat", "common_lower", "common_upper", "rmsfe", "lps", "crps", "fc_coverage",
        "avg_k", "pct_k",
    ])?;
    for r in &report.records {
        w.write_record([
            r.rep.to_string(),
            r.estimator.clone(),
            r.common_hat.to_string(),
            r.common_lower.to_string(),
            r.common_upper.to_string(),
            r.rmsfe.to_string(),
            r.lps.to_string(),
            r.crps.to_string(),
            r.fc_coverage.to_string(),
            opt(r.avg_k),
            opt(r.pct_k),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpcGfeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of groups.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Serialize)]
struct SpcGfeDocument {
    config_hash: String,
    k: usize,
    objective: f64,
    iterations: usize,
    theta: BTreeMap<String, f64>,
    /// `alpha[group][period]`.
    alpha: Vec<Vec<f64>>,
    periods: Vec<String>,
    assignment: Vec<(String, usize)>,
}

pub fn cmd_spc_gfe(args: &SpcGfeArgs) -> Result<()> {
    let cfg = args.run.resolve()?;
    let data = load_data(&cfg)?;
    prepare_out(&args.run.out)?;
    let hash = cfg.snapshot(&args.run.out)?;
    let cs = constraints_for(&cfg, &data, cfg.c)?;
    let costs = PairCosts::from_constraints(&cs, cfg.c)?;
    let kc = KmeansConfig {
        k: args.k,
        max_iter: args.max_iter,
        restarts: args.restarts,
        ..KmeansConfig::default()
    };
    let res = spc_gfe(&data, &costs, &kc, cfg.seed)?;
    let t = data.n_periods();
    let (labels, _) = bgfe::partition::canonicalize(&res.labels);
    let doc = SpcGfeDocument {
        config_hash: hash,
        k: args.k,
        objective: res.objective,
        iterations: res.iterations,
        theta: res.regressor_names.iter().cloned().zip(res.theta.iter().copied()).collect(),
        alpha: res.alpha.chunks(t).map(<[f64]>::to_vec).collect(),
        periods: data.period_ids().to_vec(),
        assignment: data.unit_ids().iter().cloned().zip(labels.iter().map(|g| g + 1)).collect(),
    };
    io::write_json(&doc, &args.run.out.join("spc_gfe.json"))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PregroupArgs {
    /// CSV with columns unit, prior_group.
    #[arg(long)]
    pub groups: PathBuf,
    /// Panel whose units define the universe; defaults to the units listed
    /// in the groups file.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long, default_value_t = 0.65)]
    pub psi_pl: f64,
    #[arg(long, default_value_t = 0.55)]
    pub psi_nl: f64,
    /// Output constraint CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_pregroup(args: &PregroupArgs) -> Result<()> {
    if !args.groups.exists() {
        bail!(UsageError(format!("groups file not found: {}", args.groups.display())));
    }
    let unit_ids: Vec<String> = match &args.panel {
        Some(p) => load_panel(p, None)?.unit_ids().to_vec(),
        None => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&args.groups)?;
            let mut ids: Vec<String> = Vec::new();
            for rec in rdr.records() {
                let u = rec?.get(0).unwrap_or_default().to_string();
                if !ids.contains(&u) {
                    ids.push(u);
                }
            }
            ids
        }
    };
    let groups = read_pregrouping(File::open(&args.groups)?, &unit_ids)?;
    let cs = constraints_from_pregrouping(&groups, args.psi_pl, args.psi_nl, 1.0)?;
    if cs.is_empty() {
        log::warn!("pre-grouping yields no constraints");
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    io::with_file(&args.out, |w| write_constraints(&cs, &unit_ids, w))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// chain.json written by `estimate`.
    #[arg(long)]
    pub chain: PathBuf,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

fn read_chain(path: &Path) -> Result<ChainFile> {
    if !path.exists() {
        bail!(UsageError(format!("chain not found: {}", path.display())));
    }
    io::read_json(path).with_context(|| format!("reading chain {}", path.display()))
}

pub fn cmd_psm(args: &ChainArgs) -> Result<()> {
    let file = read_chain(&args.chain)?;
    let psm = compute_psm(&file.chain)?;
    io::with_file(&args.out, |w| io::write_psm_csv(&psm, &file.unit_ids, w))?;
    Ok(())
}

pub fn cmd_partition(args: &ChainArgs) -> Result<()> {
    let file = read_chain(&args.chain)?;
    let psm = compute_psm(&file.chain)?;
    let est = point_estimate_partition(&file.chain, &psm)?;
    io::write_json(&PartitionDocument::new(&est, &file.unit_ids), &args.out)?;
    Ok(())
}
