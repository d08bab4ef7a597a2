//! Output files: chains, similarity matrices, partition estimates, forecasts
//! and JSON documents.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forecast::ForecastResult;
use crate::gibbs::PosteriorChain;
use crate::panel::{ModelConfig, PanelDataset};
use crate::partition_point::{PartitionEstimate, PosteriorSimilarity};

/// Column labels used when writing a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLabels {
    pub unit_ids: Vec<String>,
    pub group_names: Vec<String>,
    /// Common x-columns first, then z-columns, matching `Draw::gamma`.
    pub common_names: Vec<String>,
}

impl ChainLabels {
    pub fn from_panel(data: &PanelDataset, model: &ModelConfig) -> Self {
        let xn = data.x_names();
        Self {
            unit_ids: data.unit_ids().to_vec(),
            group_names: model.group_columns().iter().map(|&c| xn[c].clone()).collect(),
            common_names: model
                .common_x_columns()
                .iter()
                .map(|&c| xn[c].clone())
                .chain(data.z_names().iter().cloned())
                .collect(),
        }
    }

    fn check(&self, chain: &PosteriorChain) -> Result<()> {
        if self.unit_ids.len() != chain.n_units
            || self.group_names.len() != chain.p_group()
            || self.common_names.len() != chain.n_common()
        {
            return Err(Error::DimensionMismatch("chain labels do not match the chain".into()));
        }
        Ok(())
    }
}

/// Wide CSV, one row per stored draw. Group blocks are padded with empty
/// cells up to the largest group count in the chain; labels are 1-based.
pub fn write_chain_csv<W: Write>(chain: &PosteriorChain, labels: &ChainLabels, writer: W) -> Result<()> {
    labels.check(chain)?;
    let k_max = chain.draws.iter().map(|d| d.k()).max().unwrap_or(0);
    let p = chain.p_group();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["draw", "k", "k_active", "a", "loglik"].iter().map(|s| s.to_string()).collect();
    header.extend(labels.unit_ids.iter().map(|u| format!("g_{u}")));
    header.extend(labels.common_names.iter().map(|c| format!("gamma_{c}")));
    for k in 1..=k_max {
        header.extend(labels.group_names.iter().map(|c| format!("alpha_{k}_{c}")));
        header.push(format!("sigma2_{k}"));
    }
    w.write_record(&header)?;
    for (s, d) in chain.draws.iter().enumerate() {
        let mut row = vec![
            (s + 1).to_string(),
            d.k().to_string(),
            d.k_active.to_string(),
            d.a.to_string(),
            d.loglik.to_string(),
        ];
        row.extend(d.labels.iter().map(|g| (g + 1).to_string()));
        row.extend(d.gamma.iter().map(f64::to_string));
        for k in 0..k_max {
            if k < d.k() {
                row.extend(d.alpha_row(k, p).iter().map(f64::to_string));
                row.push(d.sigma2[k].to_string());
            } else {
                row.extend(std::iter::repeat_n(String::new(), p + 1));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_psm_csv<W: Write>(psm: &PosteriorSimilarity, unit_ids: &[String], writer: W) -> Result<()> {
    if unit_ids.len() != psm.n() {
        return Err(Error::LengthMismatch(unit_ids.len(), psm.n()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string()];
    header.extend(unit_ids.iter().cloned());
    w.write_record(&header)?;
    for (i, u) in unit_ids.iter().enumerate() {
        let mut row = vec![u.clone()];
        row.extend(psm.row(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionDocument {
    pub k: usize,
    pub vi_score: f64,
    pub source: String,
    /// `(unit, group)` with 1-based groups.
    pub assignment: Vec<(String, usize)>,
}

impl PartitionDocument {
    pub fn new(est: &PartitionEstimate, unit_ids: &[String]) -> Self {
        Self {
            k: est.g_star.k(),
            vi_score: est.vi_score,
            source: format!("{:?}", est.candidate_source),
            assignment: unit_ids.iter().cloned().zip(est.g_star.one_based()).collect(),
        }
    }
}

/// One row per unit and forecast period.
pub fn write_forecast_rows<W: Write>(
    rows: &[(String, &ForecastResult, Option<&[f64]>)],
    unit_ids: &[String],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "period", "unit", "point", "lower", "upper", "realized", "error", "covered", "lps", "crps",
    ])?;
    for (period, fc, realized) in rows {
        for (i, u) in unit_ids.iter().enumerate() {
            let mut row = vec![
                period.clone(),
                u.clone(),
                fc.point[i].to_string(),
                fc.lower[i].to_string(),
                fc.upper[i].to_string(),
            ];
            match (realized, &fc.unit_metrics) {
                (Some(y), Some(m)) => row.extend([
                    y[i].to_string(),
                    m.error[i].to_string(),
                    u8::from(m.covered[i]).to_string(),
                    m.lps[i].to_string(),
                    m.crps[i].to_string(),
                ]),
                _ => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn with_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
