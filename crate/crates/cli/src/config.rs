//! Run configuration: TOML in, canonical JSON echoed into every run directory.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use slipctl_core::control::OptimizerOptions;
use slipctl_core::state::SolverOptions;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub a: f64,
    pub b: f64,
    pub h_target: f64,
    /// Gmsh 2.2 ASCII mesh; replaces the generated ellipse when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            a: 2.0,
            b: 1.0,
            h_target: 0.09,
            mesh: None,
        }
    }
}

/// Tracking target in modal coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Zero,
    /// State of the given control, solved at the α of the run (α = 0 for sweeps).
    FromControl { coefficients: Vec<f64> },
    Explicit { coefficients: Vec<f64> },
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::Explicit {
            coefficients: (0..16).map(|k| 1.0 / (1.0 + k as f64)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdlabConfig {
    pub samples: usize,
    /// Modes entering the triple sums of the identity checks.
    pub modes: usize,
    pub sigma_alphas: Vec<f64>,
    /// Mesh sizes of the refinement study; empty skips it.
    pub refinement_h: Vec<f64>,
    pub circle_h: f64,
}

impl Default for IdlabConfig {
    fn default() -> Self {
        IdlabConfig {
            samples: 50,
            modes: 5,
            sigma_alphas: vec![0.05, 0.1, 0.2],
            refinement_h: vec![0.2, 0.1, 0.05],
            circle_h: 0.09,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Parent of the run directories.
    pub out: PathBuf,
    /// Directory holding eigenbasis caches; unset disables caching.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub domain: DomainConfig,
    pub m: usize,
    pub m_c: usize,
    pub nu: f64,
    /// Strictly decreasing; single-α commands use the first entry, sweeps
    /// require a final 0.
    pub alpha: Vec<f64>,
    pub lambda_reg: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Fixed control for `state`, `gateaux` and the state part of `sweep`.
    pub control: Vec<f64>,
    /// Perturbation direction for `gateaux`; random when empty.
    pub direction: Vec<f64>,
    pub rhos: Vec<f64>,
    pub target: TargetSpec,
    pub solver: SolverOptions,
    pub optimizer: OptimizerOptions,
    pub constants_samples: usize,
    pub idlab: IdlabConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out: PathBuf::from("runs"),
            cache: None,
            domain: DomainConfig::default(),
            m: 32,
            m_c: 8,
            nu: 1.0,
            alpha: vec![0.2, 0.1, 0.05, 0.025, 0.0125, 0.0],
            lambda_reg: 0.01,
            radius: 5.0,
            control: (0..8).map(|k| 2.0 / (1.0 + k as f64)).collect(),
            direction: Vec::new(),
            rhos: vec![1e-1, 1e-2, 1e-3, 1e-4],
            target: TargetSpec::default(),
            solver: SolverOptions::default(),
            optimizer: OptimizerOptions::default(),
            constants_samples: 200,
            idlab: IdlabConfig::default(),
        }
    }
}

fn positive(path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite_all(path: &str, vs: &[f64]) -> CliResult<()> {
    match vs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CliError::config(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn load(file: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(file).map_err(|source| CliError::ConfigRead {
            file: file.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::ConfigParse { source, .. } => CliError::ConfigParse {
                file: file.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse {
            file: PathBuf::from("<inline>"),
            source: Box::new(e),
        })
    }

    /// Field-level checks; the error names the offending key.
    pub fn validate(&self) -> CliResult<()> {
        let d = &self.domain;
        match &d.mesh {
            Some(p) if !p.is_file() => {
                return Err(CliError::config("domain.mesh", format!("file {} does not exist", p.display())));
            }
            Some(_) => {}
            None => {
                positive("domain.a", d.a)?;
                positive("domain.b", d.b)?;
                positive("domain.h_target", d.h_target)?;
            }
        }
        if self.m == 0 {
            return Err(CliError::config("m", "must be at least 1"));
        }
        if self.m_c == 0 || self.m_c > self.m {
            return Err(CliError::config("m_c", format!("must lie in 1..={}, got {}", self.m, self.m_c)));
        }
        positive("nu", self.nu)?;
        if self.alpha.is_empty() {
            return Err(CliError::config("alpha", "must not be empty"));
        }
        for (i, a) in self.alpha.iter().enumerate() {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(CliError::config(format!("alpha[{i}]"), format!("must be nonnegative, got {a}")));
            }
            if i > 0 && *a >= self.alpha[i - 1] {
                return Err(CliError::config(format!("alpha[{i}]"), "list must be strictly decreasing"));
            }
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(CliError::config("lambda_reg", format!("must be nonnegative, got {}", self.lambda_reg)));
        }
        positive("R", self.radius)?;
        if self.control.len() > self.m {
            return Err(CliError::config("control", format!("has {} entries, m = {}", self.control.len(), self.m)));
        }
        finite_all("control", &self.control)?;
        if !self.direction.is_empty() && self.direction.len() != self.control.len() {
            return Err(CliError::config("direction", "must be empty or match the length of `control`"));
        }
        finite_all("direction", &self.direction)?;
        for (i, r) in self.rhos.iter().enumerate() {
            positive(&format!("rhos[{i}]"), *r)?;
        }
        match &self.target {
            TargetSpec::Zero => {}
            TargetSpec::FromControl { coefficients } => {
                if coefficients.len() > self.m_c {
                    return Err(CliError::config(
                        "target.coefficients",
                        format!("a control has at most m_c = {} entries", self.m_c),
                    ));
                }
                finite_all("target.coefficients", coefficients)?;
            }
            TargetSpec::Explicit { coefficients } => {
                if coefficients.len() > self.m {
                    return Err(CliError::config("target.coefficients", format!("at most m = {} entries", self.m)));
                }
                finite_all("target.coefficients", coefficients)?;
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(CliError::config("solver.max_iter", "must be at least 1"));
        }
        positive("optimizer.tol", self.optimizer.tol)?;
        positive("optimizer.initial_step", self.optimizer.initial_step)?;
        if !(self.optimizer.armijo_c1 > 0.0 && self.optimizer.armijo_c1 < 1.0) {
            return Err(CliError::config("optimizer.armijo_c1", "must lie in (0, 1)"));
        }
        let id = &self.idlab;
        if id.modes == 0 || id.modes > self.m {
            return Err(CliError::config("idlab.modes", format!("must lie in 1..={}", self.m)));
        }
        for (i, a) in id.sigma_alphas.iter().enumerate() {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(CliError::config(format!("idlab.sigma_alphas[{i}]"), "must be nonnegative"));
            }
        }
        for (i, h) in id.refinement_h.iter().enumerate() {
            positive(&format!("idlab.refinement_h[{i}]"), *h)?;
        }
        positive("idlab.circle_h", id.circle_h)?;
        Ok(())
    }

    /// Sorted-key JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        // serde_json's default map is ordered, so a Value round trip sorts keys.
        let value = serde_json::to_value(self).expect("config serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    pub fn first_alpha(&self) -> f64 {
        self.alpha[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_benchmark() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let cfg = RunConfig::parse("alpha = [0.1, 0.2, 0.0]").unwrap();
        match cfg.validate() {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "alpha[1]"),
            other => panic!("{other:?}"),
        }
        let cfg = RunConfig::parse("[domain]\nh_target = -1.0").unwrap();
        match cfg.validate() {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "domain.h_target"),
            other => panic!("{other:?}"),
        }
        let cfg = RunConfig::parse("[domain]\nmesh = \"/nonexistent/x.msh\"").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { path, .. }) if path == "domain.mesh"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("nu = 1.0\nmu = 2.0"), Err(CliError::ConfigParse { .. })));
    }

    #[test]
    fn canonical_json_round_trips() {
        let mut cfg = RunConfig::parse(
            "R = 2.5\nm = 12\nm_c = 4\n[target]\nkind = \"from-control\"\ncoefficients = [1.0, 0.5]\n",
        )
        .unwrap();
        cfg.cache = Some(PathBuf::from("cache"));
        let text = cfg.canonical_json();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical_json(), text);
        let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&text)
            .unwrap()
            .keys()
            .cloned()
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
