//! CSV emission of metric tables.
//!
//! Floats are written with 9 significant digits in scientific notation;
//! integers and text verbatim.

use std::fmt;
use std::path::Path;

use crate::error::{BearError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum MetricValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Int(v) => write!(f, "{v}"),
            MetricValue::Float(v) if v.is_finite() => write!(f, "{v:.8e}"),
            MetricValue::Float(v) => write!(f, "{v}"),
            MetricValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for MetricValue {
    fn from(v: i64) -> Self {
        MetricValue::Int(v)
    }
}

impl From<usize> for MetricValue {
    fn from(v: usize) -> Self {
        MetricValue::Int(v as i64)
    }
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Float(v)
    }
}

impl From<&str> for MetricValue {
    fn from(v: &str) -> Self {
        MetricValue::Text(v.to_string())
    }
}

impl From<String> for MetricValue {
    fn from(v: String) -> Self {
        MetricValue::Text(v)
    }
}

/// Rows of named values sharing one schema.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricTable {
    columns: Vec<String>,
    rows: Vec<Vec<MetricValue>>,
}

impl MetricTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<MetricValue>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<MetricValue>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(BearError::Parameter(format!(
                "metric row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Value of `column` in row `row`.
    pub fn value(&self, row: usize, column: &str) -> Option<&MetricValue> {
        let c = self.columns.iter().position(|c| c == column)?;
        self.rows.get(row).map(|r| &r[c])
    }
}

pub fn write_metrics_csv(table: &MetricTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_storage = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => BearError::storage(path, io),
        other => BearError::storage(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_storage)?;
    w.write_record(&table.columns).map_err(to_storage)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(to_storage)?;
    }
    w.flush().map_err(|e| BearError::storage(path, e))
}

/// Reads a CSV written by [`write_metrics_csv`]. Cells parse as integers,
/// then floats, then fall back to text.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<MetricTable> {
    let path = path.as_ref();
    let fmt_err = |e: csv::Error| BearError::format(path, e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(fmt_err)?;
    let mut table = MetricTable::new(r.headers().map_err(fmt_err)?.iter());
    for rec in r.records() {
        let rec = rec.map_err(fmt_err)?;
        let row = rec
            .iter()
            .map(|cell| {
                if let Ok(i) = cell.parse::<i64>() {
                    MetricValue::Int(i)
                } else if let Ok(f) = cell.parse::<f64>() {
                    MetricValue::Float(f)
                } else {
                    MetricValue::Text(cell.to_string())
                }
            })
            .collect();
        table.push(row)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_metrics_csv(&MetricTable::new(["r", "rho", "rel_err"]), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "r,rho,rel_err\n");
    }

    #[test]
    fn one_record_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.csv");
        let mut t = MetricTable::new(["r", "rho", "rel_err"]);
        t.push(vec![2i64.into(), 0.05.into(), 0.01.into()]).unwrap();
        write_metrics_csv(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "r,rho,rel_err\n2,5.00000000e-2,1.00000000e-2\n");
    }

    #[test]
    fn round_trip_within_nine_digits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        let mut t = MetricTable::new(["a", "b", "name"]);
        let vals = [std::f64::consts::PI, 1.0 / 3.0, 123456.789e-12];
        for v in vals {
            t.push(vec![v.into(), (-v).into(), "x,y".into()]).unwrap();
        }
        write_metrics_csv(&t, &path).unwrap();
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(back.columns(), t.columns());
        for (i, v) in vals.iter().enumerate() {
            let MetricValue::Float(got) = back.value(i, "a").unwrap() else {
                panic!("expected float")
            };
            assert!((got - v).abs() <= 1e-8 * v.abs());
            assert_eq!(back.value(i, "name"), Some(&MetricValue::Text("x,y".into())));
        }
    }

    #[test]
    fn schema_mismatch_rejected() {
        let mut t = MetricTable::new(["a"]);
        assert!(t.push(vec![1i64.into(), 2i64.into()]).is_err());
    }
}
