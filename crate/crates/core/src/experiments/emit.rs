use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CubvError, Result};
use crate::inference::{write_mc_csv, write_power_csv, PowerCurve, PowerMethod, PowerSetting};
use crate::validate::write_cv_distribution;

use super::run::{ResultBundle, SettingRecord};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn get(&self, file: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|e| e.file == file)
    }
}

fn methods_in(settings: &[SettingRecord]) -> Vec<PowerMethod> {
    let mut out: Vec<PowerMethod> = Vec::new();
    for s in settings {
        for p in &s.power {
            if !out.contains(&p.method) {
                out.push(p.method);
            }
        }
    }
    out
}

pub fn power_curves(bundle: &ResultBundle) -> Vec<PowerCurve> {
    methods_in(&bundle.settings)
        .into_iter()
        .map(|method| {
            let mut curve = PowerCurve { grid: Vec::new(), power: Vec::new(), trials: Vec::new(), method_tag: method };
            for s in &bundle.settings {
                if let Some(p) = s.power.iter().find(|p| p.method == method) {
                    curve.grid.push(PowerSetting {
                        n_samples: s.n_samples,
                        cohens_d: s.cohens_d,
                        dimension: s.dimension,
                        n_clusters: s.n_clusters,
                    });
                    curve.power.push(p.power);
                    curve.trials.push(p.trials);
                }
            }
            curve
        })
        .collect()
}

/// Normalized cumulative power along the dimension axis and along the
/// sample-size axis, one curve per group and method.
pub fn write_cumulative_power<W: Write>(settings: &[SettingRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "group,method,axis,value,cumulative_power")?;
    let mut groups: Vec<&str> = Vec::new();
    for s in settings {
        if !groups.contains(&s.group.as_str()) {
            groups.push(&s.group);
        }
    }
    for group in groups {
        let members: Vec<&SettingRecord> = settings.iter().filter(|s| s.group == group).collect();
        for method in methods_in(settings) {
            let rows: Vec<(usize, usize, f64)> = members
                .iter()
                .filter_map(|s| s.power_of(method).map(|p| (s.n_samples, s.dimension, p)))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let total = rows.len() as f64;
            for (axis, key) in [("n", 1usize), ("N", 0usize)] {
                let pick = |r: &(usize, usize, f64)| if key == 0 { r.0 } else { r.1 };
                let mut values: Vec<usize> = rows.iter().map(pick).collect();
                values.sort_unstable();
                values.dedup();
                let mut cum = 0.0;
                for v in values {
                    cum += rows.iter().filter(|r| pick(r) == v).map(|r| r.2).sum::<f64>();
                    writeln!(out, "{group},{},{axis},{v},{}", method.tag(), cum / total)?;
                }
            }
        }
    }
    Ok(())
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CubvError::Serialization(e.to_string()))?;
    Ok(buf)
}

fn put(dir: &Path, name: &str, content: &[u8], entries: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CubvError::io(&path, e))?;
    entries.push(ManifestEntry {
        file: name.to_string(),
        bytes: content.len() as u64,
        sha256: hex::encode(Sha256::digest(content)),
    });
    Ok(())
}

/// Write every table of the bundle plus `bundle.json` and a manifest with
/// sizes and SHA-256 hashes. Output is a pure function of the bundle.
pub fn emit_results(bundle: &ResultBundle, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| CubvError::io(dir, e))?;
    let mut entries = Vec::new();
    if !bundle.settings.is_empty() {
        let curves = power_curves(bundle);
        put(dir, "power.csv", &render(|b| write_power_csv(&curves, b))?, &mut entries)?;
        let mc: Vec<_> = bundle.settings.iter().filter_map(|s| s.mc.clone()).collect();
        put(dir, "mc.csv", &render(|b| write_mc_csv(&mc, b))?, &mut entries)?;
        let mut lines = String::new();
        for s in &bundle.settings {
            for b in &s.bounds {
                lines.push_str(&serde_json::to_string(b).map_err(|e| CubvError::Serialization(e.to_string()))?);
                lines.push('\n');
            }
        }
        put(dir, "bounds.jsonl", lines.as_bytes(), &mut entries)?;
        put(dir, "cumulative_power.csv", &render(|b| write_cumulative_power(&bundle.settings, b))?, &mut entries)?;
        let cv_dir = dir.join("cv");
        std::fs::create_dir_all(&cv_dir).map_err(|e| CubvError::io(&cv_dir, e))?;
        for s in &bundle.settings {
            if s.cv_records.is_empty() {
                continue;
            }
            let values: Vec<f64> = s.cv_records.iter().map(|r| r.cv_error).collect();
            let name = format!("cv/cv_distribution_{:04}.csv", s.index);
            put(dir, &name, &render(|b| write_cv_distribution(&values, b))?, &mut entries)?;
        }
    }
    let json = serde_json::to_vec_pretty(bundle).map_err(|e| CubvError::Serialization(e.to_string()))?;
    put(dir, "bundle.json", &json, &mut entries)?;
    entries.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest { files: entries };
    let text = serde_json::to_vec_pretty(&manifest).map_err(|e| CubvError::Serialization(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CubvError::io(&path, e))?;
    Ok(manifest)
}

/// Re-hash every file listed in `dir`'s manifest; returns the manifest and
/// the names of files whose size or hash no longer match.
pub fn verify_manifest(dir: &Path) -> Result<(Manifest, Vec<String>)> {
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read(&path).map_err(|e| CubvError::io(&path, e))
    };
    let manifest: Manifest = serde_json::from_slice(&read(MANIFEST_FILE)?).map_err(|e| CubvError::Serialization(e.to_string()))?;
    let mut mismatched = Vec::new();
    for entry in &manifest.files {
        let bytes = read(&entry.file)?;
        if bytes.len() as u64 != entry.bytes || hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
            mismatched.push(entry.file.clone());
        }
    }
    Ok((manifest, mismatched))
}

pub fn load_bundle(dir: &Path) -> Result<ResultBundle> {
    let path = dir.join("bundle.json");
    let bytes = std::fs::read(&path).map_err(|e| CubvError::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CubvError::Serialization(e.to_string()))
}
