//! CSV price/return panels and their annualized moments.
//!
//! The time step is `delta = N / (365 n_obs)` where `N` counts calendar days
//! between the first and last observation and `n_obs` is the number of
//! return rows. Mean and covariance are divided by `delta`.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::universe::AssetUniverse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelFormat {
    Prices,
    Returns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Date of each return row.
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// `n_obs x n` simple (or log, if requested) returns.
    pub returns: DMatrix<f64>,
    /// Calendar days between first and last observation.
    pub calendar_days: i64,
    pub periods: usize,
    /// Rows removed because some cell was missing.
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "null" | "NULL")
}

struct RawRow {
    line: usize,
    date: NaiveDate,
    values: Option<Vec<f64>>,
}

/// Parses a panel from any reader. Header must be `date,<asset>,...`.
pub fn read_panel<R: Read>(reader: R, format: PanelFormat, log_returns: bool) -> Result<ReturnPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 1,
        column: 0,
        message: e.to_string(),
    })?;
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = assets.len();

    let mut rows: Vec<RawRow> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 2, |p| p.line() as usize);
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: format!("bad date {:?}: {e}", &rec[0]),
        })?;
        let mut values = Vec::with_capacity(n);
        let mut missing = false;
        for (j, cell) in rec.iter().enumerate().skip(1) {
            if is_missing(cell) {
                missing = true;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: j,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() || (format == PanelFormat::Prices && v <= 0.0) {
                return Err(Error::Parse {
                    row: line,
                    column: j,
                    message: format!("invalid value {cell:?}"),
                });
            }
            values.push(v);
        }
        rows.push(RawRow {
            line,
            date,
            values: (!missing).then_some(values),
        });
    }

    for pair in rows.windows(2) {
        if pair[1].date <= pair[0].date {
            return Err(Error::NonMonotoneDates { row: pair[1].line });
        }
    }

    let total = rows.len();
    let clean: Vec<(NaiveDate, Vec<f64>)> = rows
        .into_iter()
        .filter_map(|r| r.values.map(|v| (r.date, v)))
        .collect();
    let dropped_rows = total - clean.len();
    if dropped_rows > 0 {
        log::warn!("dropped {dropped_rows} rows with missing cells");
    }

    let required = match format {
        PanelFormat::Prices => 3,
        PanelFormat::Returns => 2,
    };
    if clean.len() < required {
        return Err(Error::TooFewRows {
            found: clean.len(),
            required,
        });
    }

    let calendar_days = (clean[clean.len() - 1].0 - clean[0].0).num_days();
    let (dates, data): (Vec<NaiveDate>, Vec<Vec<f64>>) = match format {
        PanelFormat::Returns => clean.into_iter().unzip(),
        PanelFormat::Prices => clean
            .windows(2)
            .map(|w| {
                let r = w[0]
                    .1
                    .iter()
                    .zip(&w[1].1)
                    .map(|(p0, p1)| p1 / p0 - 1.0)
                    .collect();
                (w[1].0, r)
            })
            .unzip(),
    };
    let periods = data.len();
    let mut returns = DMatrix::from_fn(periods, n, |t, j| data[t][j]);
    if log_returns {
        returns = match format {
            PanelFormat::Prices => returns.map(f64::ln_1p),
            // return files are taken as given
            PanelFormat::Returns => returns,
        };
    }
    Ok(ReturnPanel {
        dates,
        assets,
        returns,
        calendar_days,
        periods,
        dropped_rows,
    })
}

pub fn load_panel(path: &Path, format: PanelFormat, log_returns: bool) -> Result<ReturnPanel> {
    let file = std::fs::File::open(path)?;
    read_panel(std::io::BufReader::new(file), format, log_returns)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Sample mean and covariance (denominator `n_obs - 1`) per period.
pub fn sample_moments(panel: &ReturnPanel) -> (DVector<f64>, DMatrix<f64>) {
    let t = panel.returns.nrows();
    let mean = panel.returns.row_mean().transpose();
    let mut centered = panel.returns.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (t as f64 - 1.0);
    (mean, cov)
}

#[derive(Debug, Clone)]
pub struct Annualized {
    pub universe: AssetUniverse,
    pub delta: f64,
    /// Sample covariance was rank deficient; the universe is singular.
    pub degenerate_sample: bool,
}

pub fn annualization_step(calendar_days: i64, periods: usize) -> f64 {
    calendar_days as f64 / (365.0 * periods as f64)
}

pub fn annualize(panel: &ReturnPanel) -> Result<Annualized> {
    if panel.periods < 2 {
        return Err(Error::TooFewRows {
            found: panel.periods,
            required: 2,
        });
    }
    let delta = annualization_step(panel.calendar_days, panel.periods);
    let (mean, cov) = sample_moments(panel);
    let universe = AssetUniverse::with_names(
        panel.assets.clone(),
        cov / delta,
        Some(mean / delta),
        None,
    )?;
    let degenerate_sample = !universe.is_nonsingular();
    if degenerate_sample {
        log::warn!("sample covariance is rank deficient");
    }
    Ok(Annualized {
        universe,
        delta,
        degenerate_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub file_sha256: String,
    pub format: PanelFormat,
    pub log_returns: bool,
    pub calendar_days: i64,
    pub n_obs: usize,
    pub delta: f64,
    pub dropped_rows: usize,
    pub degenerate_sample: bool,
}

impl Provenance {
    pub fn new(
        file_sha256: String,
        format: PanelFormat,
        log_returns: bool,
        panel: &ReturnPanel,
        annualized: &Annualized,
    ) -> Self {
        Self {
            file_sha256,
            format,
            log_returns,
            calendar_days: panel.calendar_days,
            n_obs: panel.periods,
            delta: annualized.delta,
            dropped_rows: panel.dropped_rows,
            degenerate_sample: annualized.degenerate_sample,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prices(text: &str) -> Result<ReturnPanel> {
        read_panel(text.as_bytes(), PanelFormat::Prices, false)
    }

    #[test]
    fn constant_prices_zero_returns() {
        let p = prices("date,A,B\n2020-01-01,10,5\n2020-01-02,10,5\n2020-01-03,10,5\n").unwrap();
        assert_eq!(p.periods, 2);
        assert_eq!(p.calendar_days, 2);
        assert!(p.returns.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn shuffled_dates() {
        let err = prices("date,A,B\n2020-01-02,10,5\n2020-01-01,10,5\n2020-01-03,10,5\n").unwrap_err();
        assert_eq!(err, Error::NonMonotoneDates { row: 3 });
    }

    #[test]
    fn parse_error_location() {
        let err = prices("date,A,B\n2020-01-01,10,5\n2020-01-02,x,5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, column: 1, .. }));
        let err = prices("date,A,B\n01/02/2020,10,5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, column: 0, .. }));
    }

    #[test]
    fn missing_rows_dropped_before_differencing() {
        let p = prices(
            "date,A,B\n2020-01-01,10,5\n2020-01-02,NA,6\n2020-01-03,11,5.5\n2020-01-04,12.1,5.5\n",
        )
        .unwrap();
        assert_eq!(p.dropped_rows, 1);
        assert_eq!(p.periods, 2);
        assert!((p.returns[(0, 0)] - 0.1).abs() < 1e-15);
        assert!((p.returns[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((p.returns[(1, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn too_few_rows() {
        let err = prices("date,A,B\n2020-01-01,10,5\n2020-01-02,11,5\n").unwrap_err();
        assert_eq!(err, Error::TooFewRows { found: 2, required: 3 });
    }

    #[test]
    fn single_asset_rejected() {
        let p = prices("date,A\n2020-01-01,10\n2020-01-02,11\n2020-01-03,12\n").unwrap();
        assert_eq!(annualize(&p).unwrap_err().kind(), "DimensionMismatch");
    }

    #[test]
    fn daily_year_step() {
        assert_eq!(annualization_step(365, 365), 1.0 / 365.0);
    }
}
