//! JSON run configuration.

use bandtrace_core::{
    Band, Mode, MultiBandMeasure, NewtonSettings, PointMass, ValidatedMeasure, Weight,
};
use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bands: Vec<[f64; 2]>,
    pub weight: Weight,
    #[serde(default)]
    pub masses: Vec<PointMass>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub range: RangeConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub pade: PadeConfig,
    /// Directory for CSV tables and the report; `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nodes: usize,
    pub n_max: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let n = NewtonSettings::default();
        Self {
            nodes: bandtrace_core::measure::DEFAULT_NODES,
            n_max: 40,
            tolerance: n.tolerance,
            max_iterations: n.max_iterations,
            restarts: n.restarts,
            seed: n.seed,
            mode: Mode::Asymptotic,
        }
    }
}

impl SolverConfig {
    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            restarts: self.restarts,
            seed: self.seed,
        }
    }
}

/// Degrees reported by `divisor`, `verify` and `pade`; `to` defaults to N max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeConfig {
    pub from: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<usize>,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self { from: 8, to: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Ray point right of E for the ψ check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop1_point: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub steps: usize,
    pub dt: f64,
    pub time_scale: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: 10,
            dt: 1.0,
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PadeConfig {
    /// Sample points as [re, im]; empty means two points above the middle of the hull.
    pub points: Vec<[f64; 2]>,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            Category::Data => CliError::schema(path, strip_position(&inner)),
            _ => CliError::Syntax {
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner),
            },
        }
    })?;
    config.check()?;
    Ok(config)
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

impl RunConfig {
    fn check(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(CliError::schema("bands", "at least one band is required"));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b[0] < b[1]) {
                return Err(CliError::schema(
                    format!("bands[{i}]"),
                    format!("lower edge {} is not below upper edge {}", b[0], b[1]),
                ));
            }
            if i > 0 && !(self.bands[i - 1][1] < b[0]) {
                return Err(CliError::schema(
                    format!("bands[{i}]"),
                    "bands must be disjoint and listed left to right",
                ));
            }
        }
        let s = &self.solver;
        if s.nodes < 2 {
            return Err(CliError::schema(
                "solver.nodes",
                "need at least 2 nodes per band",
            ));
        }
        if s.n_max == 0 {
            return Err(CliError::schema("solver.n_max", "must be positive"));
        }
        if !(s.tolerance > 0.0) {
            return Err(CliError::schema("solver.tolerance", "must be positive"));
        }
        if self.range.from == 0 {
            return Err(CliError::schema("range.from", "must be at least 1"));
        }
        if self.range_to() < self.range.from {
            return Err(CliError::schema(
                "range",
                format!("from {} exceeds to {}", self.range.from, self.range_to()),
            ));
        }
        if self.range_to() > s.n_max {
            return Err(CliError::schema(
                "range.to",
                format!("exceeds solver.n_max = {}", s.n_max),
            ));
        }
        if !(self.flow.dt > 0.0) {
            return Err(CliError::schema("flow.dt", "must be positive"));
        }
        Ok(())
    }

    pub fn range_to(&self) -> usize {
        self.range.to.unwrap_or(self.solver.n_max)
    }

    /// Applies `--n-max` and `--mode`, then re-checks.
    pub fn with_overrides(mut self, n_max: Option<usize>, mode: Option<Mode>) -> Result<Self> {
        if let Some(n) = n_max {
            self.solver.n_max = n;
            self.range.to = self.range.to.map(|t| t.min(n));
            self.range.from = self.range.from.min(n);
        }
        if let Some(m) = mode {
            self.solver.mode = m;
        }
        self.check()?;
        Ok(self)
    }

    pub fn measure(&self) -> Result<ValidatedMeasure> {
        let bands = self.bands.iter().map(|&b| Band::from(b)).collect();
        let m = MultiBandMeasure::new(bands, self.weight.clone(), self.masses.clone());
        ValidatedMeasure::new(m, self.solver.nodes).map_err(CliError::Measure)
    }
}
