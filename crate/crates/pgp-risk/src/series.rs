//! Price-series ingestion and realized returns.
//!
//! A [`PriceSeries`] is an ordered list of strictly positive prices. The
//! forecasting machinery only ever uses observation *order*, so timestamps
//! are kept purely for reporting: they may be ISO dates (`2021-03-05`) or
//! plain integers, but one file must stick to one kind, all distinct,
//! and sorted ingestion order is canonical.

use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: malformed {field}: `{value}`")]
    MalformedRow {
        row: usize,
        field: &'static str,
        value: String,
    },
    #[error("row {row}: non-positive price {value}")]
    NonPositivePrice { row: usize, value: f64 },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),
    #[error("timestamps mix calendar dates and integer indexes")]
    MixedTimestampKinds,
    #[error("series too short: {len} observations, need at least {min}")]
    TooShort { len: usize, min: usize },
}

/// Observation label. Only ordering matters to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Timestamp {
    Index(i64),
    Date(NaiveDate),
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::Date(d) => write!(f, "{d}"),
        }
    }
}

/// Strictly positive prices in strictly increasing timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<Timestamp>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series from labeled observations, sorting by timestamp.
    pub fn new(mut observations: Vec<(Timestamp, f64)>) -> Result<Self, SeriesError> {
        if observations.len() < 2 {
            return Err(SeriesError::TooShort {
                len: observations.len(),
                min: 2,
            });
        }
        let same_kind = observations
            .windows(2)
            .all(|w| matches!(
                (&w[0].0, &w[1].0),
                (Timestamp::Index(_), Timestamp::Index(_)) | (Timestamp::Date(_), Timestamp::Date(_))
            ));
        if !same_kind {
            return Err(SeriesError::MixedTimestampKinds);
        }
        observations.sort_by_key(|(ts, _)| *ts);
        for w in observations.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SeriesError::DuplicateTimestamp(w[0].0.to_string()));
            }
        }
        for (row, (_, price)) in observations.iter().enumerate() {
            if !(price.is_finite() && *price > 0.0) {
                return Err(SeriesError::NonPositivePrice {
                    row: row + 1,
                    value: *price,
                });
            }
        }
        let (timestamps, prices) = observations.into_iter().unzip();
        Ok(Self { timestamps, prices })
    }

    /// Builds a series from bare prices, labeling them 1, 2, 3, ...
    pub fn from_prices(prices: Vec<f64>) -> Result<Self, SeriesError> {
        let obs = prices
            .into_iter()
            .enumerate()
            .map(|(i, p)| (Timestamp::Index(i as i64 + 1), p))
            .collect();
        Self::new(obs)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }
}

/// Realized arithmetic returns, aligned so the return labeled with
/// timestamp `t+1` compares prices at `t` and `t+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    timestamps: Vec<Timestamp>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }
}

/// Which CSV columns carry the data. Header row is mandatory.
#[derive(Debug, Clone)]
pub struct CsvColumns {
    pub timestamp: String,
    pub price: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            timestamp: "date".to_string(),
            price: "price".to_string(),
        }
    }
}

fn parse_timestamp(raw: &str, row: usize) -> Result<Timestamp, SeriesError> {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(Timestamp::Index(i));
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Ok(Timestamp::Date(d));
    }
    Err(SeriesError::MalformedRow {
        row,
        field: "timestamp",
        value: raw.to_string(),
    })
}

/// Loads a price series from a headered CSV file.
///
/// Rows may arrive out of order; the result is sorted by timestamp.
/// Blank fields, unparsable fields, non-positive prices, and duplicate
/// timestamps are hard errors reported with their 1-based data row.
pub fn load_csv<P: AsRef<Path>>(path: P, columns: &CsvColumns) -> Result<PriceSeries, SeriesError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => SeriesError::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            },
            _ => SeriesError::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let ts_idx = headers
        .iter()
        .position(|h| h == columns.timestamp)
        .ok_or_else(|| SeriesError::MissingColumn(columns.timestamp.clone()))?;
    let price_idx = headers
        .iter()
        .position(|h| h == columns.price)
        .ok_or_else(|| SeriesError::MissingColumn(columns.price.clone()))?;

    let mut observations = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let ts_raw = record.get(ts_idx).unwrap_or("");
        let price_raw = record.get(price_idx).unwrap_or("");
        if ts_raw.is_empty() {
            return Err(SeriesError::MalformedRow {
                row,
                field: "timestamp",
                value: String::new(),
            });
        }
        let timestamp = parse_timestamp(ts_raw, row)?;
        let price: f64 = price_raw.parse().map_err(|_| SeriesError::MalformedRow {
            row,
            field: "price",
            value: price_raw.to_string(),
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(SeriesError::NonPositivePrice { row, value: price });
        }
        observations.push((timestamp, price));
    }
    PriceSeries::new(observations)
}

/// Arithmetic returns: `r[i] = price[i+1] / price[i] - 1`.
pub fn to_returns(series: &PriceSeries) -> Result<ReturnSeries, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::TooShort {
            len: series.len(),
            min: 2,
        });
    }
    let prices = series.prices();
    let returns = prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let timestamps = series.timestamps()[1..].to_vec();
    Ok(ReturnSeries {
        timestamps,
        returns,
    })
}
