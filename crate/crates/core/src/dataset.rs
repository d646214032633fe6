//! The observed sample: an `N x n` feature matrix with binary labels.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CubvError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_features: usize,
    /// Row-major `N x n` features.
    features: Vec<f64>,
    labels: Vec<u8>,
    seed_record: u64,
}

impl Dataset {
    /// Build from a row-major buffer. Labels must be 0/1 and features finite.
    pub fn new(n_features: usize, features: Vec<f64>, labels: Vec<u8>, seed_record: u64) -> Result<Self> {
        if n_features == 0 {
            return Err(CubvError::invalid("dataset needs at least one feature"));
        }
        if features.len() != n_features * labels.len() {
            return Err(CubvError::invalid(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(CubvError::invalid(format!("label at row {pos} is not 0 or 1")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(CubvError::invalid(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Dataset {
            n_features,
            features,
            labels,
            seed_record,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if rows.len() != labels.len() {
            return Err(CubvError::invalid("rows and labels differ in length"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(CubvError::invalid("ragged feature rows"));
        }
        Dataset::new(n, rows.concat(), labels, 0)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed_record(&self) -> u64 {
        self.seed_record
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    /// Number of rows per class, `[count0, count1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn has_both_classes(&self) -> bool {
        let [a, b] = self.class_counts();
        a > 0 && b > 0
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(CubvError::invalid("both classes must be present"))
        }
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            n_features: self.n_features,
            features,
            labels,
            seed_record: self.seed_record,
        }
    }

    /// Same features with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Dataset> {
        if labels.len() != self.labels.len() {
            return Err(CubvError::invalid("label vector length mismatch"));
        }
        Dataset::new(self.n_features, self.features.clone(), labels, self.seed_record)
    }

    /// Same labels with a replacement feature buffer of width `n_features`.
    pub fn with_features(&self, n_features: usize, features: Vec<f64>) -> Result<Dataset> {
        Dataset::new(n_features, features, self.labels.clone(), self.seed_record)
    }

    /// Write as `label,f1,...,fn` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("label".to_string())
            .chain((1..=self.n_features).map(|j| format!("f{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (row, label) in self.rows().zip(&self.labels) {
            write!(out, "{label}")?;
            for v in row {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parse the `label,f1,...,fn` CSV layout written by [`Dataset::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Dataset> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| CubvError::Ingestion("empty dataset file".into()))?
            .map_err(|e| CubvError::Ingestion(e.to_string()))?;
        let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
        if cols.first() != Some(&"label") || cols.len() < 2 {
            return Err(CubvError::Ingestion("header must be `label,f1,...,fn`".into()));
        }
        let n = cols.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| CubvError::Ingestion(e.to_string()))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let row = lineno + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(CubvError::Ingestion(format!(
                    "row {row}: expected {} fields, found {}",
                    n + 1,
                    fields.len()
                )));
            }
            labels.push(match fields[0].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(CubvError::Ingestion(format!("row {row}: label `{other}` is not 0 or 1")))
                }
            });
            for (j, f) in fields[1..].iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| {
                    CubvError::Ingestion(format!("row {row}, column f{}: `{f}` is not numeric", j + 1))
                })?;
                features.push(v);
            }
        }
        Dataset::new(n, features, labels, 0).map_err(|e| CubvError::Ingestion(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::new(1, vec![0.0, f64::NAN], vec![0, 1], 0).is_err());
        assert!(Dataset::new(1, vec![0.0, 1.0], vec![0, 2], 0).is_err());
        assert!(Dataset::new(2, vec![0.0, 1.0, 2.0], vec![0, 1], 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let d = Dataset::new(2, vec![0.1, -1.0 / 3.0, 1e-300, 12345.678901234567], vec![0, 1], 9).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,f1,f2\n"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.features(), d.features());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn subset_keeps_order() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0]).unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.features(), &[3.0, 1.0]);
        assert_eq!(s.labels(), &[0, 0]);
    }
}
