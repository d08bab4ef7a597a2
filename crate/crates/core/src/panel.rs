//! Balanced panel data: storage, CSV ingestion and hold-out splitting.
//!
//! Panels are stored unit-major: the observation for unit `i` and period `t`
//! lives at `i * T + t`, and covariate `c` of that observation at
//! `(i * T + t) * p + c`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which covariate block a column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    /// Group-effect covariates `x`.
    X,
    /// Common-effect covariates `z`.
    Z,
}

/// A covariate column declared to hold the first lag of `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagColumn {
    pub block: Block,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n_units: usize,
    n_periods: usize,
    p: usize,
    q: usize,
    y: Vec<f64>,
    x: Vec<f64>,
    z: Vec<f64>,
    unit_ids: Vec<String>,
    period_ids: Vec<String>,
    x_names: Vec<String>,
    z_names: Vec<String>,
    lag: Option<LagColumn>,
}

impl PanelDataset {
    /// Builds a panel from unit-major arrays with default labels `1..N`, `1..T`.
    pub fn from_arrays(
        n_units: usize,
        n_periods: usize,
        y: Vec<f64>,
        x: Vec<f64>,
        p: usize,
        z: Vec<f64>,
        q: usize,
    ) -> Result<Self> {
        let unit_ids = (1..=n_units).map(|i| i.to_string()).collect();
        let period_ids = (1..=n_periods).map(|t| t.to_string()).collect();
        let x_names = (1..=p).map(|c| format!("x{c}")).collect();
        let z_names = (1..=q).map(|c| format!("z{c}")).collect();
        Self::new(
            n_units, n_periods, y, x, p, z, q, unit_ids, period_ids, x_names, z_names,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_units: usize,
        n_periods: usize,
        y: Vec<f64>,
        x: Vec<f64>,
        p: usize,
        z: Vec<f64>,
        q: usize,
        unit_ids: Vec<String>,
        period_ids: Vec<String>,
        x_names: Vec<String>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        if n_units == 0 || n_periods == 0 {
            return Err(Error::Schema("panel must have at least one unit and one period".into()));
        }
        if p == 0 {
            return Err(Error::Schema("at least one group-effect covariate is required".into()));
        }
        let nt = n_units * n_periods;
        if y.len() != nt || x.len() != nt * p || z.len() != nt * q {
            return Err(Error::DimensionMismatch(format!(
                "expected y={nt}, x={}, z={}; got {}, {}, {}",
                nt * p,
                nt * q,
                y.len(),
                x.len(),
                z.len()
            )));
        }
        if unit_ids.len() != n_units
            || period_ids.len() != n_periods
            || x_names.len() != p
            || z_names.len() != q
        {
            return Err(Error::DimensionMismatch("label vectors do not match dimensions".into()));
        }
        Ok(Self {
            n_units,
            n_periods,
            p,
            q,
            y,
            x,
            z,
            unit_ids,
            period_ids,
            x_names,
            z_names,
            lag: None,
        })
    }

    /// Declares a covariate column as the first lag of `y` and checks it.
    pub fn with_lag_column(mut self, lag: LagColumn) -> Result<Self> {
        let width = match lag.block {
            Block::X => self.p,
            Block::Z => self.q,
        };
        if lag.column >= width {
            return Err(Error::Schema(format!("lag column {} out of range", lag.column)));
        }
        for i in 0..self.n_units {
            for t in 1..self.n_periods {
                let v = self.covariate(lag.block, i, t)[lag.column];
                if v != self.y(i, t - 1) {
                    return Err(Error::Schema(format!(
                        "lag column disagrees with y for unit {} at period {}",
                        self.unit_ids[i], self.period_ids[t]
                    )));
                }
            }
        }
        self.lag = Some(lag);
        Ok(self)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    /// Number of group-effect covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of common-effect covariates.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.n_units, self.n_periods, self.p, self.q)
    }

    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.y[i * self.n_periods + t]
    }

    /// Outcomes of unit `i` over all periods.
    pub fn y_unit(&self, i: usize) -> &[f64] {
        &self.y[i * self.n_periods..(i + 1) * self.n_periods]
    }

    pub fn x_row(&self, i: usize, t: usize) -> &[f64] {
        let o = (i * self.n_periods + t) * self.p;
        &self.x[o..o + self.p]
    }

    pub fn z_row(&self, i: usize, t: usize) -> &[f64] {
        let o = (i * self.n_periods + t) * self.q;
        &self.z[o..o + self.q]
    }

    fn covariate(&self, block: Block, i: usize, t: usize) -> &[f64] {
        match block {
            Block::X => self.x_row(i, t),
            Block::Z => self.z_row(i, t),
        }
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn period_ids(&self) -> &[String] {
        &self.period_ids
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn lag_column(&self) -> Option<LagColumn> {
        self.lag
    }

    /// Index of a unit label.
    pub fn unit_index(&self, label: &str) -> Option<usize> {
        self.unit_ids.iter().position(|u| u == label)
    }

    /// Restricts the panel to a contiguous range of periods.
    fn period_slice(&self, start: usize, end: usize) -> PanelDataset {
        let t_new = end - start;
        let mut y = Vec::with_capacity(self.n_units * t_new);
        let mut x = Vec::with_capacity(self.n_units * t_new * self.p);
        let mut z = Vec::with_capacity(self.n_units * t_new * self.q);
        for i in 0..self.n_units {
            for t in start..end {
                y.push(self.y(i, t));
                x.extend_from_slice(self.x_row(i, t));
                z.extend_from_slice(self.z_row(i, t));
            }
        }
        PanelDataset {
            n_units: self.n_units,
            n_periods: t_new,
            p: self.p,
            q: self.q,
            y,
            x,
            z,
            unit_ids: self.unit_ids.clone(),
            period_ids: self.period_ids[start..end].to_vec(),
            x_names: self.x_names.clone(),
            z_names: self.z_names.clone(),
            lag: self.lag,
        }
    }

    /// Appends a lag-of-`y` column to the chosen block. The first period is
    /// dropped because its lag is not observed.
    pub fn make_lag(&self, block: Block, name: &str) -> Result<PanelDataset> {
        if self.n_periods < 2 {
            return Err(Error::Schema("need at least two periods to build a lag".into()));
        }
        let t_new = self.n_periods - 1;
        let (p, q) = match block {
            Block::X => (self.p + 1, self.q),
            Block::Z => (self.p, self.q + 1),
        };
        let mut y = Vec::with_capacity(self.n_units * t_new);
        let mut x = Vec::with_capacity(self.n_units * t_new * p);
        let mut z = Vec::with_capacity(self.n_units * t_new * q);
        for i in 0..self.n_units {
            for t in 1..self.n_periods {
                y.push(self.y(i, t));
                x.extend_from_slice(self.x_row(i, t));
                z.extend_from_slice(self.z_row(i, t));
                match block {
                    Block::X => x.push(self.y(i, t - 1)),
                    Block::Z => z.push(self.y(i, t - 1)),
                }
            }
        }
        let mut x_names = self.x_names.clone();
        let mut z_names = self.z_names.clone();
        let column = match block {
            Block::X => {
                x_names.push(name.to_string());
                p - 1
            }
            Block::Z => {
                z_names.push(name.to_string());
                q - 1
            }
        };
        PanelDataset::new(
            self.n_units,
            t_new,
            y,
            x,
            p,
            z,
            q,
            self.unit_ids.clone(),
            self.period_ids[1..].to_vec(),
            x_names,
            z_names,
        )?
        .with_lag_column(LagColumn { block, column })
    }
}

/// Covariate rows for a single future period, one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRows {
    pub n_units: usize,
    pub p: usize,
    pub q: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl CovariateRows {
    pub fn new(n_units: usize, x: Vec<f64>, p: usize, z: Vec<f64>, q: usize) -> Result<Self> {
        if x.len() != n_units * p || z.len() != n_units * q {
            return Err(Error::DimensionMismatch(format!(
                "covariate rows: expected {}x{} and {}x{}",
                n_units, p, n_units, q
            )));
        }
        Ok(Self { n_units, p, q, x, z })
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        &self.z[i * self.q..(i + 1) * self.q]
    }
}

/// Held-out trailing periods of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSlice {
    panel: PanelDataset,
}

impl HoldoutSlice {
    pub fn horizon(&self) -> usize {
        self.panel.n_periods
    }

    /// Realized outcomes for step `h` (0-based), one per unit.
    pub fn outcomes(&self, step: usize) -> Vec<f64> {
        (0..self.panel.n_units).map(|i| self.panel.y(i, step)).collect()
    }

    /// Covariates needed to forecast step `h` (0-based).
    pub fn covariates(&self, step: usize) -> CovariateRows {
        let n = self.panel.n_units;
        let mut x = Vec::with_capacity(n * self.panel.p);
        let mut z = Vec::with_capacity(n * self.panel.q);
        for i in 0..n {
            x.extend_from_slice(self.panel.x_row(i, step));
            z.extend_from_slice(self.panel.z_row(i, step));
        }
        CovariateRows {
            n_units: n,
            p: self.panel.p,
            q: self.panel.q,
            x,
            z,
        }
    }

    pub fn period_ids(&self) -> &[String] {
        &self.panel.period_ids
    }

    pub fn as_panel(&self) -> &PanelDataset {
        &self.panel
    }
}

/// Splits off the last `h` periods as a hold-out sample.
pub fn split_holdout(data: &PanelDataset, h: usize) -> Result<(PanelDataset, HoldoutSlice)> {
    let t = data.n_periods;
    if h == 0 || h > t || t - h < 2 {
        return Err(Error::HorizonTooLarge {
            horizon: h,
            remaining: t.saturating_sub(h),
        });
    }
    let train = data.period_slice(0, t - h);
    let panel = data.period_slice(t - h, t);
    Ok((train, HoldoutSlice { panel }))
}

/// Re-attaches a hold-out slice to its training panel.
pub fn append_holdout(train: &PanelDataset, holdout: &HoldoutSlice) -> Result<PanelDataset> {
    let h = &holdout.panel;
    if h.n_units != train.n_units || h.p != train.p || h.q != train.q {
        return Err(Error::DimensionMismatch("hold-out does not match training panel".into()));
    }
    let t_new = train.n_periods + h.n_periods;
    let mut y = Vec::with_capacity(train.n_units * t_new);
    let mut x = Vec::with_capacity(train.n_units * t_new * train.p);
    let mut z = Vec::with_capacity(train.n_units * t_new * train.q);
    for i in 0..train.n_units {
        y.extend_from_slice(train.y_unit(i));
        y.extend_from_slice(h.y_unit(i));
        for t in 0..train.n_periods {
            x.extend_from_slice(train.x_row(i, t));
            z.extend_from_slice(train.z_row(i, t));
        }
        for t in 0..h.n_periods {
            x.extend_from_slice(h.x_row(i, t));
            z.extend_from_slice(h.z_row(i, t));
        }
    }
    let mut period_ids = train.period_ids.clone();
    period_ids.extend(h.period_ids.iter().cloned());
    let mut out = PanelDataset::new(
        train.n_units,
        t_new,
        y,
        x,
        train.p,
        z,
        train.q,
        train.unit_ids.clone(),
        period_ids,
        train.x_names.clone(),
        train.z_names.clone(),
    )?;
    out.lag = train.lag;
    Ok(out)
}

/// Column mapping for long-format panel CSV files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub unit: String,
    pub period: String,
    pub y: String,
    pub x: Vec<String>,
    pub z: Vec<String>,
}

impl PanelSchema {
    /// Default mapping: `unit`, `period`, `y`, then every column starting with
    /// `x` is a group-effect covariate and every column starting with `z` a
    /// common-effect covariate, in header order.
    pub fn infer(headers: &[String]) -> Result<Self> {
        for required in ["unit", "period", "y"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Schema(format!("missing required column {required:?}")));
            }
        }
        let x: Vec<String> = headers.iter().filter(|h| h.starts_with('x')).cloned().collect();
        let z: Vec<String> = headers.iter().filter(|h| h.starts_with('z')).cloned().collect();
        if x.is_empty() {
            return Err(Error::Schema("no x covariate columns".into()));
        }
        Ok(Self {
            unit: "unit".into(),
            period: "period".into(),
            y: "y".into(),
            x,
            z,
        })
    }
}

/// Orders labels numerically when every label parses as a number, otherwise
/// lexicographically.
fn label_order(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if numeric.is_some() {
        labels.sort_by(|a, b| {
            let (x, y) = (a.trim().parse::<f64>().unwrap(), b.trim().parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

fn parse_number(raw: &str, column: &str, line: usize) -> Result<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            column: column.to_string(),
            value: raw.to_string(),
            line,
        }),
    }
}

/// Reads a long-format panel from any reader.
pub fn read_panel<R: Read>(reader: R, schema: Option<&PanelSchema>) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(_) => Vec::new(),
    };
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::MissingCell {
            unit: "<none>".into(),
            period: "<none>".into(),
        });
    }
    let schema = match schema {
        Some(s) => s.clone(),
        None => PanelSchema::infer(&headers)?,
    };
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column {name:?} not found")))
    };
    let unit_c = col(&schema.unit)?;
    let period_c = col(&schema.period)?;
    let y_c = col(&schema.y)?;
    let x_c: Vec<usize> = schema.x.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let z_c: Vec<usize> = schema.z.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let (p, q) = (x_c.len(), z_c.len());

    type Row = (f64, Vec<f64>, Vec<f64>);
    let mut cells: HashMap<(String, String), Row> = HashMap::new();
    let mut units: BTreeMap<String, ()> = BTreeMap::new();
    let mut periods: BTreeMap<String, ()> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let unit = get(unit_c).to_string();
        let period = get(period_c).to_string();
        let y = parse_number(get(y_c), &schema.y, line)?;
        let x = x_c
            .iter()
            .zip(&schema.x)
            .map(|(&c, n)| parse_number(get(c), n, line))
            .collect::<Result<Vec<_>>>()?;
        let z = z_c
            .iter()
            .zip(&schema.z)
            .map(|(&c, n)| parse_number(get(c), n, line))
            .collect::<Result<Vec<_>>>()?;
        units.insert(unit.clone(), ());
        periods.insert(period.clone(), ());
        if cells.insert((unit.clone(), period.clone()), (y, x, z)).is_some() {
            return Err(Error::DuplicateCell { unit, period });
        }
    }
    if cells.is_empty() {
        return Err(Error::MissingCell {
            unit: "<none>".into(),
            period: "<none>".into(),
        });
    }
    let mut unit_ids: Vec<String> = units.into_keys().collect();
    let mut period_ids: Vec<String> = periods.into_keys().collect();
    label_order(&mut unit_ids);
    label_order(&mut period_ids);

    let (n, t) = (unit_ids.len(), period_ids.len());
    let mut y = Vec::with_capacity(n * t);
    let mut x = Vec::with_capacity(n * t * p);
    let mut z = Vec::with_capacity(n * t * q);
    for u in &unit_ids {
        for s in &period_ids {
            let Some((yv, xv, zv)) = cells.get(&(u.clone(), s.clone())) else {
                return Err(Error::MissingCell {
                    unit: u.clone(),
                    period: s.clone(),
                });
            };
            y.push(*yv);
            x.extend_from_slice(xv);
            z.extend_from_slice(zv);
        }
    }
    PanelDataset::new(n, t, y, x, p, z, q, unit_ids, period_ids, schema.x, schema.z)
}

/// Loads a long-format panel CSV.
pub fn load_panel(path: &Path, schema: Option<&PanelSchema>) -> Result<PanelDataset> {
    if !path.exists() {
        return Err(Error::PanelNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    read_panel(file, schema)
}

/// Writes a panel in long format. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_panel_to<W: Write>(data: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string(), "period".to_string(), "y".to_string()];
    header.extend(data.x_names.iter().cloned());
    header.extend(data.z_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n_units {
        for t in 0..data.n_periods {
            let mut rec = vec![
                data.unit_ids[i].clone(),
                data.period_ids[t].clone(),
                data.y(i, t).to_string(),
            ];
            rec.extend(data.x_row(i, t).iter().map(f64::to_string));
            rec.extend(data.z_row(i, t).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_panel(data: &PanelDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_panel_to(data, file)
}

/// Which covariates carry group-specific coefficients, and whether the error
/// variance is grouped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// One flag per x-column; `false` moves the column to the common block.
    pub group_slopes: Vec<bool>,
    pub heteroskedastic: bool,
}

impl ModelConfig {
    /// Every x-column group-specific.
    pub fn all_grouped(p: usize, heteroskedastic: bool) -> Self {
        Self {
            group_slopes: vec![true; p],
            heteroskedastic,
        }
    }

    pub fn validate(&self, data: &PanelDataset) -> Result<()> {
        if self.group_slopes.len() != data.p() {
            return Err(Error::Config(format!(
                "group_slopes has {} entries but the panel has {} x-columns",
                self.group_slopes.len(),
                data.p()
            )));
        }
        if !self.group_slopes.iter().any(|&g| g) {
            return Err(Error::Config("at least one x-column must be group-specific".into()));
        }
        Ok(())
    }

    /// Indices of the x-columns with group-specific coefficients.
    pub fn group_columns(&self) -> Vec<usize> {
        (0..self.group_slopes.len()).filter(|&c| self.group_slopes[c]).collect()
    }

    /// Indices of x-columns treated as common regressors.
    pub fn common_x_columns(&self) -> Vec<usize> {
        (0..self.group_slopes.len()).filter(|&c| !self.group_slopes[c]).collect()
    }

    /// Total number of common coefficients for a panel with `q` z-columns.
    pub fn common_coef_count(&self, q: usize) -> usize {
        self.common_x_columns().len() + q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_panel(body: &str) -> Result<PanelDataset> {
        read_panel(body.as_bytes(), None)
    }

    #[test]
    fn loads_and_sorts_numerically() {
        let body = "unit,period,y,x1\n10,2,4,1\n2,1,1,1\n2,2,2,1\n10,1,3,1\n";
        let d = csv_panel(body).unwrap();
        assert_eq!(d.dims(), (2, 2, 1, 0));
        assert_eq!(d.unit_ids(), &["2".to_string(), "10".to_string()]);
        assert_eq!(d.y_unit(0), &[1.0, 2.0]);
        assert_eq!(d.y_unit(1), &[3.0, 4.0]);
    }

    #[test]
    fn empty_file_is_missing_cell() {
        assert!(matches!(csv_panel(""), Err(Error::MissingCell { .. })));
        assert!(matches!(
            csv_panel("unit,period,y,x1\n"),
            Err(Error::MissingCell { .. })
        ));
    }

    #[test]
    fn reports_offending_unit_and_period() {
        let mut body = String::from("unit,period,y,x1\n");
        for u in 1..=6 {
            for t in 1..=4 {
                if u == 5 && t == 3 {
                    continue;
                }
                body.push_str(&format!("{u},{t},0.5,1\n"));
            }
        }
        match csv_panel(&body) {
            Err(Error::MissingCell { unit, period }) => {
                assert_eq!(unit, "5");
                assert_eq!(period, "3");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_non_numeric() {
        let dup = "unit,period,y,x1\n1,1,0,1\n1,1,0,1\n";
        assert!(matches!(csv_panel(dup), Err(Error::DuplicateCell { .. })));
        let bad = "unit,period,y,x1\n1,1,abc,1\n";
        assert!(matches!(csv_panel(bad), Err(Error::NonNumeric { .. })));
    }

    #[test]
    fn z_columns_are_detected() {
        let body = "unit,period,y,x1,z1\n1,1,0,1,5\n1,2,0,1,6\n";
        let d = csv_panel(body).unwrap();
        assert_eq!(d.dims(), (1, 2, 1, 1));
        assert_eq!(d.z_row(0, 1), &[6.0]);
    }

    fn toy(n: usize, t: usize) -> PanelDataset {
        let y: Vec<f64> = (0..n * t).map(|k| k as f64 * 0.5).collect();
        let x = vec![1.0; n * t];
        PanelDataset::from_arrays(n, t, y, x, 1, vec![], 0).unwrap()
    }

    #[test]
    fn holdout_split_and_errors() {
        let d = toy(3, 11);
        let (train, hold) = split_holdout(&d, 1).unwrap();
        assert_eq!(train.n_periods(), 10);
        assert_eq!(hold.horizon(), 1);
        assert_eq!(hold.outcomes(0)[1], d.y(1, 10));
        assert_eq!(append_holdout(&train, &hold).unwrap(), d);

        assert!(matches!(split_holdout(&toy(2, 3), 2), Err(Error::HorizonTooLarge { .. })));
        assert!(split_holdout(&toy(2, 5), 0).is_err());
    }

    #[test]
    fn make_lag_drops_first_period() {
        let d = toy(2, 4);
        let l = d.make_lag(Block::Z, "ylag").unwrap();
        assert_eq!(l.n_periods(), 3);
        assert_eq!(l.z_row(1, 0), &[d.y(1, 0)]);
        assert_eq!(l.y(1, 0), d.y(1, 1));
        assert!(l.lag_column().is_some());
    }

    #[test]
    fn model_config_requires_a_group_column() {
        let d = toy(2, 3);
        let cfg = ModelConfig {
            group_slopes: vec![false],
            heteroskedastic: true,
        };
        assert!(cfg.validate(&d).is_err());
        assert!(ModelConfig::all_grouped(1, true).validate(&d).is_ok());
    }
}
