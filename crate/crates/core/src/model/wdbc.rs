//! Wisconsin Diagnostic Breast Cancer CSV ingestion.
//!
//! Rows are `id,diagnosis,<30 floats>` with diagnosis `M` (malignant, label 1)
//! or `B` (benign, label 0).

use crate::error::{IsirError, Result};
use std::io::BufRead;
use std::path::{Path, PathBuf};

pub const WDBC_ROWS: usize = 569;
pub const WDBC_FEATURES: usize = 30;
pub const DATA_DIR_ENV: &str = "ISIR_DATA_DIR";
pub const WDBC_FILE: &str = "wdbc.data";

#[derive(Clone, Debug)]
pub struct WdbcData {
    pub ids: Vec<u64>,
    pub labels: Vec<u8>,
    pub features: Vec<Vec<f64>>,
}

/// Parses WDBC rows. `expected_rows` enforces the row count when given.
pub fn parse_wdbc<R: BufRead>(reader: R, expected_rows: Option<usize>) -> Result<WdbcData> {
    let mut data = WdbcData {
        ids: Vec::new(),
        labels: Vec::new(),
        features: Vec::new(),
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 + WDBC_FEATURES {
            return Err(IsirError::Parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 1,
                2 + WDBC_FEATURES,
                fields.len()
            )));
        }
        let id = fields[0]
            .parse::<u64>()
            .map_err(|e| IsirError::Parse(format!("line {}: bad id: {e}", lineno + 1)))?;
        let label = match fields[1] {
            "M" => 1,
            "B" => 0,
            other => {
                return Err(IsirError::Parse(format!(
                    "line {}: diagnosis must be M or B, found {other:?}",
                    lineno + 1
                )))
            }
        };
        let row = fields[2..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        IsirError::Parse(format!("line {}: bad value {s:?}", lineno + 1))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        data.ids.push(id);
        data.labels.push(label);
        data.features.push(row);
    }
    if let Some(n) = expected_rows {
        if data.labels.len() != n {
            return Err(IsirError::Parse(format!(
                "expected {n} rows, found {}",
                data.labels.len()
            )));
        }
    }
    Ok(data)
}

pub fn load_wdbc(path: &Path) -> Result<WdbcData> {
    let file = std::fs::File::open(path)?;
    parse_wdbc(std::io::BufReader::new(file), Some(WDBC_ROWS))
}

/// `$ISIR_DATA_DIR/wdbc.data`, if the variable is set.
pub fn default_path() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(|dir| PathBuf::from(dir).join(WDBC_FILE))
}

/// Column-wise standardisation to zero mean and unit (n-1) variance.
/// Returns the standardised rows with the column means and standard deviations.
pub fn standardise(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    if rows.is_empty() {
        return (Vec::new(), Vec::new(), Vec::new());
    }
    let n = rows.len() as f64;
    let p = rows[0].len();
    let means: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| {
            let ss: f64 = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum();
            let sd = (ss / (n - 1.0).max(1.0)).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let out = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| (v - means[j]) / sds[j])
                .collect()
        })
        .collect();
    (out, means, sds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: u64, d: &str) -> String {
        let vals: Vec<String> = (0..WDBC_FEATURES).map(|i| format!("{}.5", i)).collect();
        format!("{id},{d},{}", vals.join(","))
    }

    #[test]
    fn parses_labels() {
        let text = format!("{}\n{}\n", row(1, "M"), row(2, "B"));
        let d = parse_wdbc(text.as_bytes(), Some(2)).unwrap();
        assert_eq!(d.labels, vec![1, 0]);
        assert_eq!(d.features[1][3], 3.5);
    }

    #[test]
    fn row_count_is_validated() {
        let text = format!("{}\n", row(1, "M"));
        assert!(parse_wdbc(text.as_bytes(), Some(569)).is_err());
    }

    #[test]
    fn rejects_unknown_diagnosis() {
        let text = format!("{}\n", row(1, "X"));
        assert!(parse_wdbc(text.as_bytes(), None).is_err());
    }

    #[test]
    fn standardised_columns() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let (z, m, s) = standardise(&rows);
        assert_eq!(m, vec![2.0, 5.0]);
        assert_eq!(s[0], 1.0);
        assert_eq!(z[0][0], -1.0);
        assert_eq!(z[2][1], 0.0);
    }
}
