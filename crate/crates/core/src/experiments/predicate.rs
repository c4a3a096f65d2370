//! Acceptance predicates, evaluated from stored tables only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::Table;
use crate::error::{Error, Result};
use crate::fit::loglog_slope;

/// Rows of `file` restricted to `column == value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// `max / min` of a positive column stays below `max`.
    SpreadBelow { file: String, column: String, max: f64 },
    /// Least-squares log-log slope of `y` against `x` within `tol` of `target`.
    Slope {
        file: String,
        x: String,
        y: String,
        filter: Option<RowFilter>,
        target: f64,
        tol: f64,
    },
    /// Every `|value|` of a column at most `max`.
    AllBelow { file: String, column: String, max: f64 },
    /// The last `last` successive ratios of the row sums of `columns` lie
    /// within `tol` (relative) of their geometric mean.
    Geometric {
        file: String,
        columns: Vec<String>,
        last: usize,
        tol: f64,
    },
    /// Column strictly increasing down the rows.
    StrictlyIncreasing { file: String, column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateOutcome {
    pub name: String,
    pub predicate: Predicate,
    /// Measured quantity (spread, slope, largest value, largest deviation).
    pub value: Option<f64>,
    pub passed: bool,
}

impl Predicate {
    pub fn file(&self) -> &str {
        match self {
            Predicate::SpreadBelow { file, .. }
            | Predicate::Slope { file, .. }
            | Predicate::AllBelow { file, .. }
            | Predicate::Geometric { file, .. }
            | Predicate::StrictlyIncreasing { file, .. } => file,
        }
    }

    /// Measured value and verdict. A missing or degenerate column fails.
    pub fn evaluate(&self, tables: &BTreeMap<String, Table>) -> Result<(Option<f64>, bool)> {
        let t = tables
            .get(self.file())
            .ok_or_else(|| Error::Config(format!("predicate refers to unknown file `{}`", self.file())))?;
        Ok(match self {
            Predicate::SpreadBelow { column, max, .. } => {
                let v = t.column(column)?;
                let spread = spread(&v);
                (spread, spread.is_some_and(|s| s < *max))
            }
            Predicate::Slope {
                x,
                y,
                filter,
                target,
                tol,
                ..
            } => {
                let t = match filter {
                    Some(f) => t.filtered(&f.column, f.value)?,
                    None => t.clone(),
                };
                let s = loglog_slope(&t.column(x)?, &t.column(y)?);
                (s, s.is_some_and(|s| (s - target).abs() <= *tol))
            }
            Predicate::AllBelow { column, max, .. } => {
                let v = t.column(column)?;
                let worst = v
                    .iter()
                    .map(|x| x.abs())
                    .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
                let ok = !v.is_empty() && v.iter().all(|x| x.abs() <= *max);
                (worst, ok)
            }
            Predicate::Geometric { columns, last, tol, .. } => {
                let cols = columns.iter().map(|c| t.column(c)).collect::<Result<Vec<_>>>()?;
                let n = cols.iter().map(Vec::len).min().unwrap_or(0);
                let sums: Vec<f64> = (0..n).map(|i| cols.iter().map(|c| c[i]).sum()).collect();
                let ratios: Vec<f64> = sums.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
                if ratios.len() < *last || *last == 0 || ratios.iter().any(|r| *r <= 0.0) {
                    (None, false)
                } else {
                    let tail = &ratios[ratios.len() - last..];
                    let mean = (tail.iter().map(|r| r.ln()).sum::<f64>() / *last as f64).exp();
                    let dev = tail.iter().map(|r| (r / mean - 1.0).abs()).fold(0.0, f64::max);
                    (Some(dev), dev <= *tol)
                }
            }
            Predicate::StrictlyIncreasing { column, .. } => {
                let v = t.column(column)?;
                let ok = v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]);
                (spread(&v), ok)
            }
        })
    }
}

/// `max / min` of positive finite values.
pub fn spread(v: &[f64]) -> Option<f64> {
    if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return None;
    }
    let max = v.iter().copied().fold(f64::MIN, f64::max);
    let min = v.iter().copied().fold(f64::MAX, f64::min);
    Some(max / min)
}

pub fn evaluate_all(named: &[(String, Predicate)], tables: &BTreeMap<String, Table>) -> Result<Vec<PredicateOutcome>> {
    named
        .iter()
        .map(|(name, p)| {
            let (value, passed) = p.evaluate(tables)?;
            Ok(PredicateOutcome {
                name: name.clone(),
                predicate: p.clone(),
                value,
                passed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables(t: Table) -> BTreeMap<String, Table> {
        BTreeMap::from([(t.file_name(), t)])
    }

    #[test]
    fn slope_predicate_filters_rows() {
        let mut t = Table::new("r", &["K", "rho", "y"]);
        for rho in [1e2, 1e3, 1e4] {
            t.push_values(&[0.0, rho, 1.0 / rho]);
            t.push_values(&[1.0, rho, 1.0 / (rho * rho)]);
        }
        let p = |k: f64, target: f64| Predicate::Slope {
            file: "r.csv".into(),
            x: "rho".into(),
            y: "y".into(),
            filter: Some(RowFilter {
                column: "K".into(),
                value: k,
            }),
            target,
            tol: 1e-9,
        };
        let ts = tables(t);
        assert!(p(0.0, -1.0).evaluate(&ts).unwrap().1);
        assert!(p(1.0, -2.0).evaluate(&ts).unwrap().1);
        assert!(!p(1.0, -1.0).evaluate(&ts).unwrap().1);
    }

    #[test]
    fn geometric_predicate_measures_deviation() {
        let mut t = Table::new("s", &["a", "b"]);
        for k in 0..8 {
            let v = 0.6f64.powi(k);
            t.push_values(&[v, v]);
        }
        let p = Predicate::Geometric {
            file: "s.csv".into(),
            columns: vec!["a".into(), "b".into()],
            last: 5,
            tol: 0.1,
        };
        let (dev, ok) = p.evaluate(&tables(t)).unwrap();
        assert!(ok && dev.unwrap() < 1e-12);
    }

    #[test]
    fn spread_and_monotonicity() {
        let mut t = Table::new("c", &["v"]);
        for v in [1.0, 1.2, 1.3] {
            t.push_values(&[v]);
        }
        let ts = tables(t);
        let inc = Predicate::StrictlyIncreasing {
            file: "c.csv".into(),
            column: "v".into(),
        };
        assert!(inc.evaluate(&ts).unwrap().1);
        let sp = Predicate::SpreadBelow {
            file: "c.csv".into(),
            column: "v".into(),
            max: 1.25,
        };
        assert!(!sp.evaluate(&ts).unwrap().1);
    }
}
