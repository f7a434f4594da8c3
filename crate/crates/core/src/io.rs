//! Tabular export of trajectories: CSV and a JSON mirror with the same
//! field names.

use std::io::{Read, Write};

use serde_json::{Map, Value};

use crate::blockdiag::BlockState;
use crate::error::{GeoError, Result};
use crate::integrate::{FlowState, Trajectory};
use crate::linalg::SquareMatrix;

/// Names of the report columns, in output order.
pub const REPORT_COLUMNS: [&str; 7] = [
    "energy",
    "det_drift",
    "zeta_drift",
    "angmom_drift",
    "sff",
    "virial_residual",
    "trace_omega",
];

/// Named columns of numbers, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(GeoError::DimensionMismatch {
                left: row.len(),
                right: self.columns.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// `t`, the flattened state, then the invariant report.
    pub fn from_trajectory<S: FlowState>(tr: &Trajectory<S>) -> Self {
        let Some(first) = tr.first() else {
            return Table::new(vec!["t".into()]);
        };
        let mut columns = vec!["t".to_string()];
        columns.extend(first.state.state_columns());
        columns.extend(REPORT_COLUMNS.iter().map(|c| c.to_string()));
        let rows = tr
            .samples
            .iter()
            .map(|s| {
                let mut row = vec![s.t];
                row.extend(s.state.state_values());
                row.extend(s.report.values());
                row
            })
            .collect();
        Table { columns, rows }
    }

    /// Block layout: `t`, the `b` and `w` coefficients, the odd tail, the
    /// energy and the semi-axes `1 / sqrt(b0_i)`.
    pub fn from_block_trajectory(tr: &Trajectory<BlockState>) -> Self {
        let Some(first) = tr.first() else {
            return Table::new(vec!["t".into()]);
        };
        let m = first.state.blocks();
        let odd = first.state.tail.is_some();
        let mut columns = vec!["t".to_string()];
        for name in ["b0", "b1", "b2", "w0", "w1", "w2"] {
            columns.extend((1..=m).map(|i| format!("{name}_{i}")));
        }
        if odd {
            columns.extend(["b_inf".to_string(), "w_inf".to_string()]);
        }
        columns.push("energy".into());
        columns.extend((1..=m).map(|i| format!("axis_{i}")));
        let rows = tr
            .samples
            .iter()
            .map(|s| {
                let b = &s.state;
                let mut row = vec![s.t];
                for v in [&b.b0, &b.b1, &b.b2, &b.w0, &b.w1, &b.w2] {
                    row.extend(v);
                }
                if let Some(tail) = b.tail {
                    row.extend([tail.b_inf, tail.w_inf]);
                }
                row.push(s.report.energy);
                row.extend(b.axes());
                row
            })
            .collect();
        Table { columns, rows }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Values are written in shortest round-trip form, with an exponent for
    /// very small or large magnitudes.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|x| format!("{x:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let columns: Vec<String> = input.headers()?.iter().map(String::from).collect();
        let mut table = Table::new(columns);
        for record in input.records() {
            let row = record?
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| GeoError::Parse(format!("`{f}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }

    /// An array of objects keyed by column name, in column order.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, x)| (c.clone(), float_value(*x)))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let rows = value
            .as_array()
            .ok_or_else(|| GeoError::Parse("expected an array of samples".into()))?;
        let Some(first) = rows.first() else {
            return Ok(Table::new(Vec::new()));
        };
        let columns: Vec<String> = first
            .as_object()
            .ok_or_else(|| GeoError::Parse("samples must be objects".into()))?
            .keys()
            .cloned()
            .collect();
        let mut table = Table::new(columns);
        for (k, row) in rows.iter().enumerate() {
            let obj = row
                .as_object()
                .ok_or_else(|| GeoError::Parse(format!("sample {k} is not an object")))?;
            let values = table
                .columns
                .iter()
                .map(|c| match obj.get(c) {
                    Some(Value::Number(x)) => x
                        .as_f64()
                        .ok_or_else(|| GeoError::Parse(format!("sample {k}: `{c}` out of range"))),
                    Some(Value::String(s)) => s
                        .parse::<f64>()
                        .map_err(|_| GeoError::Parse(format!("sample {k}: `{c}` = {s:?}"))),
                    _ => Err(GeoError::Parse(format!("sample {k}: missing `{c}`"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            if obj.len() != table.columns.len() {
                return Err(GeoError::Parse(format!("sample {k} has extra fields")));
            }
            table.push(values)?;
        }
        Ok(table)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json())?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        Self::from_json(&serde_json::from_reader(r)?)
    }
}

// JSON has no infinities or NaN; those are kept as strings.
fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

/// A square matrix from nested JSON arrays.
pub fn parse_matrix(text: &str) -> Result<SquareMatrix> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_matrix(path: &std::path::Path) -> Result<SquareMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_round_trip() {
        let mut t = Table::new(vec!["t".into(), "x".into()]);
        t.push(vec![0.0, 0.1 + 0.2]).unwrap();
        t.push(vec![1.0, f64::INFINITY]).unwrap();
        t.push(vec![2.0, -1e-300]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(Table::read_csv(buf.as_slice()).unwrap(), t);
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        assert_eq!(Table::read_json(buf.as_slice()).unwrap(), t);
        assert!(t.push(vec![1.0]).is_err());
    }

    #[test]
    fn matrices_parse_from_nested_arrays() {
        let m = parse_matrix("[[0, -1], [1, 0]]").unwrap();
        assert_eq!(m, crate::linalg::z2());
        assert!(parse_matrix("[[1, 2, 3], [4, 5, 6]]").is_err());
        assert!(parse_matrix("{\"a\": 1}").is_err());
    }
}
