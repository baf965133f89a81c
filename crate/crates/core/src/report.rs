//! Structured numeric result records and deterministic artifact output.
//!
//! Values print through the shortest round-trip float formatting, so a record
//! file reproduces bit-exactly for bit-identical inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportRecord {
    pub experiment: String,
    pub config_hash: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRecord {
    pub fn new(
        experiment: &str,
        config_hash: &str,
        metric: &str,
        value: f64,
        tolerance: f64,
        pass: bool,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            config_hash: config_hash.to_string(),
            metric: metric.to_string(),
            value,
            tolerance,
            pass,
        }
    }

    /// Record an upper-bound check: pass iff `value <= tolerance`.
    pub fn bounded(experiment: &str, config_hash: &str, metric: &str, value: f64, tol: f64) -> Self {
        Self::new(experiment, config_hash, metric, value, tol, value <= tol)
    }
}

/// Content hash of a canonical config string (short hex form).
pub fn config_hash(canonical: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn records_to_csv(records: &[ReportRecord]) -> String {
    let mut out = String::from("experiment,config_hash,metric,value,tolerance,pass\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment, r.config_hash, r.metric, r.value, r.tolerance, r.pass
        ));
    }
    out
}

pub fn write_records_csv(path: &Path, records: &[ReportRecord]) -> Result<()> {
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    pub pass: bool,
    pub records: Vec<ReportRecord>,
}

impl Summary {
    pub fn new(experiment: &str, config_hash: &str, records: Vec<ReportRecord>) -> Self {
        Self {
            experiment: experiment.to_string(),
            config_hash: config_hash.to_string(),
            pass: records.iter().all(|r| r.pass),
            records,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_values_exactly() {
        let r = ReportRecord::new("exp", "abc", "metric", 0.1 + 0.2, 1e-12, false);
        let csv = records_to_csv(&[r.clone()]);
        let line = csv.lines().nth(1).unwrap();
        let value_field: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(value_field.to_bits(), r.value.to_bits());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = config_hash("alpha = 4.0");
        let b = config_hash("alpha = 4.0");
        let c = config_hash("alpha = 4.1");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 12);
    }
}
