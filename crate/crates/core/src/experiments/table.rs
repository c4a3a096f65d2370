//! Numeric CSV tables with fixed 17-digit formatting.

use std::path::Path;

use crate::error::{Error, Result};

/// Fixed 17-significant-digit scientific formatting used in every CSV.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// A named table of numbers; `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| Some(*v)).collect());
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of one column (rows with an empty cell skipped).
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name).ok_or_else(|| self.missing(name))?;
        Ok(self.rows.iter().filter_map(|r| r[i]).collect())
    }

    /// Rows whose `column` equals `value` exactly.
    pub fn filtered(&self, column: &str, value: f64) -> Result<Table> {
        let i = self.column_index(column).ok_or_else(|| self.missing(column))?;
        Ok(Table {
            name: self.name.clone(),
            header: self.header.clone(),
            rows: self.rows.iter().filter(|r| r[i] == Some(value)).cloned().collect(),
        })
    }

    fn missing(&self, column: &str) -> Error {
        Error::Config(format!("table `{}` has no column `{column}`", self.name))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(fmt17).unwrap_or_default()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Array of row objects keyed by column name; empty cells become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| (h.clone(), v.map_or(serde_json::Value::Null, serde_json::Value::from)))
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("finite table serializes") + "\n"
    }

    /// Parses CSV text; `path` only labels errors.
    pub fn from_csv(name: &str, text: &str, path: &Path) -> Result<Table> {
        let integrity = |message: String| Error::Integrity {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| integrity(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| integrity(e.to_string()))?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| integrity(format!("bad number `{cell}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Table {
            name: name.to_string(),
            header,
            rows,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fmt17_is_exact_and_fixed_width() {
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt17(-0.1).parse::<f64>().unwrap(), -0.1);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(vals in proptest::collection::vec(proptest::option::of(-1e300f64..1e300), 1..40)) {
            let mut t = Table::new("t", &["a"]);
            for v in &vals {
                t.push(vec![*v]);
            }
            let back = Table::from_csv("t", &t.to_csv(), Path::new("t.csv")).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn truncated_row_is_an_integrity_error() {
        let r = Table::from_csv("t", "a,b\n1,2\n3\n", Path::new("t.csv"));
        assert!(matches!(r, Err(Error::Integrity { .. })));
    }
}
