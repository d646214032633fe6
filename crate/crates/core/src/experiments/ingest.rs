//! Feature-table ingestion and the four-diagnosis binary problems.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CubvError, Result};
use crate::seed;
use crate::synthgen::{largest_remainder, sample_with_clusters, ProblemParams};

/// Diagnosis names in cluster order of the synthetic fixture.
pub const DIAGNOSES: [&str; 4] = ["HC", "MCI", "MCIc", "AD"];

/// Bundled synthetic table with 100 rows per diagnosis.
pub const MRI_FIXTURE: &str = include_str!("../../fixtures/mri_synthetic_400.csv");
pub const FIXTURE_FEATURES: usize = 30;
pub const FIXTURE_EFFECT: f64 = 1.5;
pub const FIXTURE_SEED: u64 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MriProblem {
    /// HC+MCI vs AD+MCIc
    P1,
    /// HC+MCIc vs MCI+AD
    P2,
    /// HC+AD vs MCI+MCIc
    P3,
}

impl MriProblem {
    pub fn group_map(&self) -> BTreeMap<String, u8> {
        let positive: [&str; 2] = match self {
            MriProblem::P1 => ["AD", "MCIc"],
            MriProblem::P2 => ["MCI", "AD"],
            MriProblem::P3 => ["MCI", "MCIc"],
        };
        DIAGNOSES
            .iter()
            .map(|d| (d.to_string(), u8::from(positive.contains(d))))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            MriProblem::P1 => "P1",
            MriProblem::P2 => "P2",
            MriProblem::P3 => "P3",
        }
    }
}

/// Read a delimited table with a header. Every column except
/// `label_column` must be numeric. Returns the dataset and the feature
/// column names in order.
pub fn ingest_feature_table(path: &Path, label_column: &str, group_map: &BTreeMap<String, u8>) -> Result<(Dataset, Vec<String>)> {
    let file = std::fs::File::open(path).map_err(|e| CubvError::Ingestion(format!("{}: {e}", path.display())))?;
    ingest_feature_reader(file, label_column, group_map)
        .map_err(|e| match e {
            CubvError::Ingestion(msg) => CubvError::Ingestion(format!("{}: {msg}", path.display())),
            other => other,
        })
}

pub fn ingest_feature_reader<R: Read>(input: R, label_column: &str, group_map: &BTreeMap<String, u8>) -> Result<(Dataset, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CubvError::Ingestion(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| CubvError::Ingestion(format!("label column '{label_column}' not in header")))?;
    let columns: Vec<String> = header.iter().enumerate().filter(|&(i, _)| i != label_idx).map(|(_, h)| h.clone()).collect();
    if columns.is_empty() {
        return Err(CubvError::Ingestion("table has no feature columns".to_string()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut missing: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CubvError::Ingestion(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(CubvError::Ingestion(format!("row {row}: expected {} fields, found {}", header.len(), record.len())));
        }
        let diagnosis = &record[label_idx];
        let label = *group_map
            .get(diagnosis)
            .ok_or_else(|| CubvError::Ingestion(format!("row {row}: unknown label '{diagnosis}'")))?;
        labels.push(label);
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                missing.entry(header[i].clone()).or_default().push(row);
                features.push(0.0);
                continue;
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CubvError::Ingestion(format!("row {row}, column '{}': non-numeric value '{cell}'", header[i])))?;
            features.push(v);
        }
    }
    if !missing.is_empty() {
        let report: Vec<String> = missing
            .iter()
            .map(|(col, rows)| format!("{col}: {} missing (rows {:?})", rows.len(), rows))
            .collect();
        return Err(CubvError::Ingestion(format!("missing values: {}", report.join("; "))));
    }
    let data = Dataset::new(columns.len(), features, labels, 0).map_err(|e| CubvError::Ingestion(e.to_string()))?;
    if !data.has_both_classes() {
        return Err(CubvError::Ingestion("group map yields a single-class dataset".to_string()));
    }
    Ok((data, columns))
}

/// Stratified subsample of `size` rows without replacement; row order is
/// preserved.
pub fn stratified_subsample(data: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    let n = data.n_samples();
    if size > n || size < 2 {
        return Err(CubvError::invalid(format!("cannot draw {size} of {n} rows")));
    }
    if size == n {
        return Ok(data.clone());
    }
    let counts = data.class_counts();
    let take = largest_remainder(size, &[counts[0] as f64, counts[1] as f64]);
    let mut rng = seed::rng(seed);
    let mut chosen = Vec::with_capacity(size);
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..n).filter(|&i| data.label(i) == class).collect();
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..take[class as usize]]);
    }
    chosen.sort_unstable();
    Ok(data.subset(&chosen))
}

/// Generate the synthetic four-diagnosis table: four clusters whose
/// balanced split {HC, MCI} vs {MCIc, AD} carries the effect.
pub fn write_mri_fixture<W: Write>(mut out: W, n_features: usize, effect: f64, seed: u64) -> Result<()> {
    // Mask 0b1100 places clusters 2 and 3 (MCIc, AD) in group 1.
    let params = ProblemParams::multi_cluster(n_features, effect, 4, 1.0, 2).with_layout_seed(seed);
    let spec = params.build()?;
    let (data, sources) = sample_with_clusters(&spec, 400, seed::derive(seed, 1))?;
    let io = |e| CubvError::io("<fixture>", e);
    let header: Vec<String> = std::iter::once("diagnosis".to_string())
        .chain((1..=n_features).map(|j| format!("roi_{j}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (row, &cluster) in data.rows().zip(&sources) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{},{}", DIAGNOSES[cluster], cells.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_table_parses_exactly() {
        let text = "diagnosis,a,b\nHC,1.5,-2\nAD,0,3e-1\nMCI,7,8\n";
        let (data, cols) = ingest_feature_reader(text.as_bytes(), "diagnosis", &MriProblem::P1.group_map()).unwrap();
        assert_eq!(cols, vec!["a", "b"]);
        assert_eq!(data.labels(), &[0, 1, 0]);
        assert_eq!(data.features(), &[1.5, -2.0, 0.0, 0.3, 7.0, 8.0]);
    }

    #[test]
    fn ingestion_errors() {
        let map = MriProblem::P1.group_map();
        let unknown = ingest_feature_reader("diagnosis,a\nHC,1\nXX,2\n".as_bytes(), "diagnosis", &map);
        assert!(matches!(unknown, Err(CubvError::Ingestion(m)) if m.contains("row 2")));
        let missing = ingest_feature_reader("diagnosis,a,b\nHC,1,\nAD,,2\n".as_bytes(), "diagnosis", &map);
        assert!(matches!(missing, Err(CubvError::Ingestion(m)) if m.contains("a: 1 missing") && m.contains("b: 1 missing")));
        let text = ingest_feature_reader("diagnosis,a\nHC,x\nAD,1\n".as_bytes(), "diagnosis", &map);
        assert!(matches!(text, Err(CubvError::Ingestion(m)) if m.contains("non-numeric")));
        let one: BTreeMap<String, u8> = DIAGNOSES.iter().map(|d| (d.to_string(), 0)).collect();
        let single = ingest_feature_reader("diagnosis,a\nHC,1\nAD,2\n".as_bytes(), "diagnosis", &one);
        assert!(matches!(single, Err(CubvError::Ingestion(_))));
    }

    #[test]
    fn problems_split_fixture_evenly() {
        for p in [MriProblem::P1, MriProblem::P2, MriProblem::P3] {
            let (data, cols) = ingest_feature_reader(MRI_FIXTURE.as_bytes(), "diagnosis", &p.group_map()).unwrap();
            assert_eq!(cols.len(), FIXTURE_FEATURES);
            assert_eq!(data.class_counts(), [200, 200]);
        }
    }

    #[test]
    fn fixture_is_reproducible() {
        let mut buf = Vec::new();
        write_mri_fixture(&mut buf, FIXTURE_FEATURES, FIXTURE_EFFECT, FIXTURE_SEED).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), MRI_FIXTURE);
    }

    #[test]
    fn subsample_is_stratified() {
        let (data, _) = ingest_feature_reader(MRI_FIXTURE.as_bytes(), "diagnosis", &MriProblem::P2.group_map()).unwrap();
        let sub = stratified_subsample(&data, 41, 9).unwrap();
        assert_eq!(sub.n_samples(), 41);
        assert_eq!(sub.class_counts(), [21, 20]);
        assert_eq!(sub, stratified_subsample(&data, 41, 9).unwrap());
    }
}
