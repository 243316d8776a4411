//! JSON Lines dataset files: one header line followed by one record per line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{MetricRecord, Oracle};
use crate::rng::stream;
use crate::space::{sample_uniform, validate, SearchSpaceSpec};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub space: String,
    pub seed: u64,
    pub n: usize,
    pub k_lat: usize,
    pub k_energy: usize,
    pub devices: Vec<String>,
    /// The full space definition, so datasets on custom spaces stay loadable.
    pub space_spec: SearchSpaceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<MetricRecord>,
}

/// `n` unique uniformly drawn architectures with full records. Architectures
/// come from stream 0 of `seed`; record i draws its noise from stream i + 1,
/// so the output does not depend on the thread count.
pub fn generate_dataset(
    oracle: &Oracle,
    n: usize,
    k_lat: usize,
    k_energy: usize,
    devices: &[String],
    seed: u64,
) -> Result<Dataset> {
    let mut devices: Vec<String> = if devices.is_empty() {
        oracle.profiles.keys().cloned().collect()
    } else {
        devices.to_vec()
    };
    devices.sort();
    devices.dedup();
    for d in &devices {
        oracle.profile(d)?;
    }
    let archs = sample_uniform(&oracle.space, n, true, &mut stream(seed, 0))?;
    let records = archs
        .par_iter()
        .enumerate()
        .map(|(i, arch)| oracle.record(arch, &devices, k_lat, k_energy, &mut stream(seed, i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            schema_version: DATASET_SCHEMA_VERSION,
            space: oracle.space.name.clone(),
            seed,
            n,
            k_lat,
            k_energy,
            devices,
            space_spec: oracle.space.clone(),
        },
        records,
    })
}

impl Dataset {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for r in &self.records {
            let line = serde_json::to_string(r)?;
            writeln!(out, "{line}").expect("writing to a String");
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::EmptyInput("dataset file has no header"))?;
        let value: serde_json::Value = serde_json::from_str(first)?;
        let version = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != DATASET_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: DATASET_SCHEMA_VERSION,
            });
        }
        let header: DatasetHeader = serde_json::from_value(value)?;
        let mut records = Vec::with_capacity(header.n);
        let mut seen = HashSet::new();
        for (lineno, line) in lines {
            let r: MetricRecord =
                serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            validate(&header.space_spec, &r.arch)
                .into_result()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if !seen.insert(r.arch.clone()) {
                return Err(Error::Parse(format!("line {}: duplicate architecture", lineno + 1)));
            }
            records.push(r);
        }
        if records.len() != header.n {
            return Err(Error::Parse(format!(
                "header announces {} records, file has {}",
                header.n,
                records.len()
            )));
        }
        Ok(Self { header, records })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_jsonl()?)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_oracle() -> Oracle {
        crate::bench::oracle_for("toy").unwrap()
    }

    #[test]
    fn toy_dataset_round_trips() {
        let oracle = toy_oracle();
        let devs = vec!["a100".to_string(), "rtx2080".to_string()];
        let d = generate_dataset(&oracle, 40, 3, 4, &devs, 5).unwrap();
        assert_eq!(d.records.len(), 40);
        let text = d.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 41);
        let back = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_jsonl().unwrap(), text);
        let r = &d.records[0].hw["a100"];
        assert_eq!((r.latency_ms.len(), r.energy_mwh.len()), (3, 4));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let oracle = toy_oracle();
        let a = generate_dataset(&oracle, 30, 2, 2, &[], 9).unwrap().to_jsonl().unwrap();
        let b = generate_dataset(&oracle, 30, 2, 2, &[], 9).unwrap().to_jsonl().unwrap();
        let c = generate_dataset(&oracle, 30, 2, 2, &[], 10).unwrap().to_jsonl().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn loader_rejects_bad_files() {
        let oracle = toy_oracle();
        assert!(matches!(
            generate_dataset(&oracle, 81, 1, 1, &[], 0),
            Err(Error::CountExceedsCardinality { .. })
        ));
        let d = generate_dataset(&oracle, 3, 1, 1, &["a100".to_string()], 0).unwrap();
        let text = d.to_jsonl().unwrap();
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":7", 1);
        assert!(matches!(
            Dataset::from_jsonl(&bumped),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
        let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(Dataset::from_jsonl(&truncated), Err(Error::Parse(_))));
        let mut bad = d.clone();
        bad.records[1].arch.num_layers = 99;
        assert!(matches!(Dataset::from_jsonl(&bad.to_jsonl().unwrap()), Err(Error::Parse(_))));
    }
}
