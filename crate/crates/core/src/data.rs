//! Time series containers and the on-disk collection formats.
//!
//! Two interchangeable formats are supported:
//!
//! * CSV with header `id,category,m,h,values`, where `values` is a
//!   semicolon-separated list of decimals.
//! * JSON: an array of objects with the same fields and `values` as a numeric
//!   array. [`to_canonical_json`] produces the canonical rendering, which
//!   round-trips byte-for-byte through [`parse_json`].

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An observed, strictly positive series together with its seasonal period
/// and forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    #[serde(default)]
    pub category: Option<String>,
    /// Seasonal period; 1 means non-seasonal.
    #[serde(rename = "m")]
    pub period: usize,
    #[serde(rename = "h")]
    pub horizon: usize,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        id: impl Into<String>,
        values: Vec<f64>,
        period: usize,
        horizon: usize,
        category: Option<String>,
    ) -> Result<Self> {
        let series = TimeSeries {
            id: id.into(),
            category,
            period,
            horizon,
            values,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: &str| Error::InvalidSeries {
            id: self.id.clone(),
            message: message.to_string(),
        };
        if self.period == 0 {
            return Err(invalid("periodicity must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be >= 1"));
        }
        if self.values.len() < 2 {
            return Err(invalid("at least two observations are required"));
        }
        for (index, &value) in self.values.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositive {
                    id: self.id.clone(),
                    index,
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seasonal fitting needs at least two full periods.
    pub fn supports_seasonal_fit(&self) -> bool {
        self.period > 1 && self.values.len() >= 2 * self.period
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit {
    pub train: TimeSeries,
    pub test: Vec<f64>,
}

impl TrainTestSplit {
    pub fn rejoin(&self) -> Vec<f64> {
        let mut values = self.train.values.clone();
        values.extend_from_slice(&self.test);
        values
    }
}

/// Holds out the last `h` observations. The training part must keep at
/// least two points.
pub fn split(series: &TimeSeries) -> Result<TrainTestSplit> {
    let t = series.len();
    let h = series.horizon;
    if t < h + 2 {
        return Err(Error::InvalidSeries {
            id: series.id.clone(),
            message: format!(
                "cannot hold out h={h} points from a series of length {t} and keep two for training"
            ),
        });
    }
    let cut = t - h;
    let train = TimeSeries {
        values: series.values[..cut].to_vec(),
        ..series.clone()
    };
    train.validate()?;
    Ok(TrainTestSplit {
        train,
        test: series.values[cut..].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectionFormat {
    Csv,
    Json,
}

impl CollectionFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CollectionFormat::Csv),
            "json" => Some(CollectionFormat::Json),
            _ => None,
        }
    }
}

impl FromStr for CollectionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CollectionFormat::Csv),
            "json" => Ok(CollectionFormat::Json),
            other => Err(Error::Config(format!("unknown collection format '{other}'"))),
        }
    }
}

pub fn load_collection(path: impl AsRef<Path>, format: CollectionFormat) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CollectionFormat::Csv => parse_csv(&text),
        CollectionFormat::Json => parse_json(&text),
    }
}

pub fn save_collection(
    path: impl AsRef<Path>,
    series: &[TimeSeries],
    format: CollectionFormat,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        CollectionFormat::Csv => to_csv(series)?,
        CollectionFormat::Json => to_canonical_json(series)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_json(text: &str) -> Result<Vec<TimeSeries>> {
    let series: Vec<TimeSeries> = serde_json::from_str(text).map_err(|e| Error::Parse {
        record: 0,
        line: e.line(),
        message: e.to_string(),
    })?;
    for s in &series {
        s.validate()?;
    }
    Ok(series)
}

/// Pretty-printed JSON with two-space indentation and a trailing newline.
pub fn to_canonical_json(series: &[TimeSeries]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(series)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    category: String,
    m: usize,
    h: usize,
    values: String,
}

pub fn parse_csv(text: &str) -> Result<Vec<TimeSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (record, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            record,
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record + 2;
        let values = row
            .values
            .split(';')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>().map_err(|e| Error::Parse {
                    record,
                    line,
                    message: format!("bad value '{v}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let category = (!row.category.is_empty()).then_some(row.category);
        out.push(TimeSeries::new(row.id, values, row.m, row.h, category)?);
    }
    Ok(out)
}

pub fn to_csv(series: &[TimeSeries]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["id", "category", "m", "h", "values"])
        .map_err(|e| Error::Serde(e.to_string()))?;
    for s in series {
        let values = s
            .values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writer
            .write_record([
                s.id.as_str(),
                s.category.as_deref().unwrap_or(""),
                &s.period.to_string(),
                &s.horizon.to_string(),
                &values,
            ])
            .map_err(|e| Error::Serde(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
}
