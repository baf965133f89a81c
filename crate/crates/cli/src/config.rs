//! Experiment configuration: TOML (or JSON, by extension) with embedded
//! defaults so a bare config reproduces fully.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use nls_core::nonlinearity::{CoefficientSeq, DegreeParams, TailKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub alpha: f64,
    /// Explicit entries `[n, re, im]` (finite tail only).
    #[serde(default)]
    pub coeffs: Vec<(i64, f64, f64)>,
    #[serde(default = "default_tail")]
    pub tail: TailKind,
}

fn default_tail() -> TailKind {
    TailKind::Finite
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub n_per_dim: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n_per_dim: 1024,
            half_width: 20.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// "uniform" or "geometric"
    pub kind: String,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub ratio: f64,
    pub t_min: f64,
    pub substeps: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            kind: "uniform".into(),
            t_start: 0.0,
            t_end: 1.0,
            steps: 100,
            ratio: 0.92,
            t_min: 1e-3,
            substeps: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Initial-data amplitude and width.
    pub epsilon: f64,
    pub sigma: f64,
    /// Pullback parameter of the scattering runs.
    pub t0: f64,
    /// Ball radius for contraction experiments.
    pub m_ball: f64,
    pub pairs: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// "u" or "v".
    pub problem: String,
    pub dealias: bool,
    /// Lemma table selector for `lemma-check`.
    pub lemma: String,
    pub n_list: Vec<i64>,
    pub t_list: Vec<f64>,
    pub gamma: f64,
    pub theta: f64,
    /// Indices checked by `identity-check`.
    pub identity_ns: Vec<i64>,
    pub identity_times: Vec<f64>,
    pub identity_tol: f64,
    /// Coefficient table half-width for `coeffs`.
    pub n_show: i64,
    /// Write the full trajectory (manifest + per-node fields) in `simulate`.
    pub save_trajectory: bool,
    /// Search downward from `epsilon` for the largest amplitude with
    /// contraction ratio below one half (the smallness threshold is not
    /// known a priori; the found value is reported, never asserted).
    pub epsilon_search: bool,
    pub epsilon_floor: f64,
    /// Monte-Carlo sample count for `L^r` lower bounds in `lemma-check`
    /// (0 disables them; exact norms are only computed for r = 2).
    pub lr_samples: usize,
    pub lr: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            sigma: 1.0,
            t0: 1.0,
            m_ball: 0.1,
            pairs: 4,
            max_iter: 12,
            tol: 1e-8,
            problem: "u".into(),
            dealias: true,
            lemma: "K2_16_1".into(),
            n_list: vec![2, 4, 16, 64, 256],
            t_list: vec![0.25, 1.0],
            gamma: 1.0,
            theta: 0.5,
            identity_ns: vec![2],
            identity_times: vec![0.5],
            identity_tol: 2e-3,
            n_show: 8,
            save_trajectory: false,
            epsilon_search: false,
            epsilon_floor: 1e-3,
            lr_samples: 0,
            lr: 3.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).context("parsing JSON config")?,
            _ => toml::from_str(&text).context("parsing TOML config")?,
        };
        Ok(cfg)
    }

    /// Canonical form hashed into every artifact.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sequence(&self) -> anyhow::Result<CoefficientSeq> {
        let nl = &self.nonlinearity;
        let seq = match nl.tail {
            TailKind::Finite => {
                let entries: Vec<_> = nl
                    .coeffs
                    .iter()
                    .map(|&(n, re, im)| (n, num_complex::Complex64::new(re, im)))
                    .collect();
                CoefficientSeq::finite(nl.alpha, &entries)?
            }
            TailKind::Geometric { a } => {
                if !nl.coeffs.is_empty() {
                    bail!("explicit coefficients are only valid with a finite tail");
                }
                CoefficientSeq::geometric(nl.alpha, a)?
            }
            TailKind::Hk { k } => {
                if !nl.coeffs.is_empty() {
                    bail!("explicit coefficients are only valid with a finite tail");
                }
                CoefficientSeq::hk_series(nl.alpha, k)?
            }
        };
        Ok(seq)
    }

    /// Hard validation (exit code 2 territory): admissibility window,
    /// dimension rules, grid budget. Returns soft warnings (assumption
    /// failures) that `--strict` escalates.
    pub fn validate(&self) -> anyhow::Result<Vec<String>> {
        DegreeParams::from_alpha(self.grid.dim, self.nonlinearity.alpha)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        if !self.grid.n_per_dim.is_power_of_two() {
            bail!("grid.n_per_dim must be a power of two");
        }
        let points = self.grid.n_per_dim.pow(self.grid.dim as u32);
        if points > nls_core::grid::DEFAULT_POINT_BUDGET {
            bail!(
                "grid has {points} points, over the budget {}",
                nls_core::grid::DEFAULT_POINT_BUDGET
            );
        }
        match self.time.kind.as_str() {
            "uniform" | "geometric" => {}
            other => bail!("time.kind must be \"uniform\" or \"geometric\", got {other}"),
        }
        let seq = self.sequence()?;
        let report = seq.check_assumptions();
        let mut warnings = Vec::new();
        if !report.a1_pass {
            warnings.push("weighted coefficient sum diverges (summability assumption fails)".into());
        }
        if !report.a2_pass {
            warnings.push("nonpositive-index coefficients present (support assumption fails)".into());
        }
        Ok(warnings)
    }

    pub fn alpha0(&self) -> f64 {
        self.grid.dim as f64 * (self.nonlinearity.alpha - 1.0) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            id = "demo"
            [nonlinearity]
            alpha = 4.0
            coeffs = [[2, 1.0, 0.0]]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.grid.n_per_dim, 1024);
        assert!(cfg.validate().unwrap().is_empty());
        let seq = cfg.sequence().unwrap();
        assert_eq!(seq.coeff(2), num_complex::Complex64::new(1.0, 0.0));
    }

    #[test]
    fn validation_rejects_bad_window() {
        let text = r#"
            id = "demo"
            [nonlinearity]
            alpha = 3.0
            coeffs = [[1, 1.0, 0.0]]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn assumption_failures_are_warnings() {
        let text = r#"
            id = "demo"
            [nonlinearity]
            alpha = 4.0
            coeffs = [[0, 1.0, 0.0]]
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1);
    }
}
