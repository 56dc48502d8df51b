//! Experiment configuration: one JSON document naming a manifold, a seed and
//! an operation with its parameters. Unknown keys are rejected everywhere.

use std::path::Path;

use horocell::bridge::{DriftVariant, SpatialKernel};
use horocell::convolution::{FunctionSpec, KernelSpec, Mode, Nonlinearity};
use horocell::Point;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Manifold identifier, e.g. `sphere2` or `euclidean:3`.
    pub manifold: String,
    pub seed: u64,
    pub operation: Operation,
    /// Also write the CSV data file of operations that have one.
    #[serde(default)]
    pub write_csv: bool,
}

/// A frame given by its base point and, optionally, basis columns; the basis
/// defaults to the orthonormalized chart frame and is orthonormalized either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub base: Point,
    #[serde(default)]
    pub columns: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

fn default_nodes() -> usize {
    16
}

fn default_bracket_step() -> f64 {
    1e-3
}

fn default_log_tol() -> f64 {
    horocell::manifold::LOG_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Operation {
    GeodesicExp { base: Point, velocity: Vec<f64>, n_steps: usize },
    RiemannianLog {
        from: Point,
        to: Point,
        #[serde(default = "default_log_tol")]
        tol: f64,
    },
    SectionalCurvature { point: Point, a: Vec<f64>, b: Vec<f64> },
    Holonomy { frame: FrameConfig, path: Vec<Point> },
    TransportFrame { frame: FrameConfig, direction: Vec<f64>, t: f64, n_steps: usize },
    SampleBrownian { frame: FrameConfig, t: f64, n_steps: usize, n_paths: usize },
    ConvDirectional {
        kernel: KernelSpec,
        function: FunctionSpec,
        frame: FrameConfig,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    ConvHorizontal { kernel: KernelSpec, function: FunctionSpec, frame: FrameConfig, t: f64, n_paths: usize, n_steps: usize },
    ConvLogForm { kernel: KernelSpec, function: FunctionSpec, frame: FrameConfig, t: f64, n_paths: usize, n_steps: usize },
    ConvFiberDensity { kernel: KernelSpec, function: FunctionSpec, frame: FrameConfig, t: f64, n_paths: usize, n_steps: usize },
    ConvMultilayer {
        layers: Vec<LayerConfig>,
        function: FunctionSpec,
        frame: FrameConfig,
        total_time: f64,
        n_paths: usize,
        n_steps: usize,
        #[serde(default)]
        mode: Mode,
    },
    CommutatorDefect {
        k1: KernelSpec,
        k2: KernelSpec,
        function: FunctionSpec,
        frame: FrameConfig,
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "default_bracket_step")]
        bracket_step: f64,
    },
    HeatKernel { from: Point, to: Point, t: f64, n_paths: usize, n_steps: usize },
    SampleWdm {
        points: Vec<Point>,
        weights: Vec<f64>,
        t: f64,
        #[serde(default)]
        drift_variant: DriftVariant,
        j: usize,
        n_steps: usize,
    },
    WdmLoglik { points: Vec<Point>, weights: Vec<f64>, t: f64, at: Point, n_paths: usize, n_steps: usize },
    WfmGradientDescent { points: Vec<Point>, weights: Vec<f64>, step: f64, tol: f64, max_iter: usize },
    ConvWdm { kernel: SpatialKernel, at: Point, neighbors: Vec<Point>, t: f64, j: usize, n_steps: usize },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::GeodesicExp { .. } => "geodesic-exp",
            Operation::RiemannianLog { .. } => "riemannian-log",
            Operation::SectionalCurvature { .. } => "sectional-curvature",
            Operation::Holonomy { .. } => "holonomy",
            Operation::TransportFrame { .. } => "transport-frame",
            Operation::SampleBrownian { .. } => "sample-brownian",
            Operation::ConvDirectional { .. } => "conv-directional",
            Operation::ConvHorizontal { .. } => "conv-horizontal",
            Operation::ConvLogForm { .. } => "conv-log-form",
            Operation::ConvFiberDensity { .. } => "conv-fiber-density",
            Operation::ConvMultilayer { .. } => "conv-multilayer",
            Operation::CommutatorDefect { .. } => "commutator-defect",
            Operation::HeatKernel { .. } => "heat-kernel",
            Operation::SampleWdm { .. } => "sample-wdm",
            Operation::WdmLoglik { .. } => "wdm-loglik",
            Operation::WfmGradientDescent { .. } => "wfm-gradient-descent",
            Operation::ConvWdm { .. } => "conv-wdm",
        }
    }
}

/// A parsed config with the digest of its canonical form.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
}

/// SHA-256 of the document re-serialized with sorted keys and no whitespace.
pub fn canonical_hash(text: &str) -> Result<String, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    let canonical = serde_json::to_string(&value).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

pub fn parse(text: &str) -> Result<LoadedConfig, CliError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    Ok(LoadedConfig { config, hash: canonical_hash(text)? })
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: &str = r#"{"manifold": "sphere2", "seed": 1, "operation": {"name": "sectional-curvature",
        "point": {"chart": 0, "coords": [0.0, 0.0]}, "a": [1.0, 0.0], "b": [0.0, 1.0]}}"#;
    const B: &str = r#"{"operation": {"b": [0.0, 1.0], "a": [1.0, 0.0], "name": "sectional-curvature",
        "point": {"coords": [0.0, 0.0], "chart": 0}}, "seed": 1, "manifold": "sphere2"}"#;

    #[test]
    fn hash_ignores_key_order_and_whitespace() {
        assert_eq!(canonical_hash(A).unwrap(), canonical_hash(B).unwrap());
        assert_ne!(canonical_hash(A).unwrap(), canonical_hash(&A.replace("\"seed\": 1", "\"seed\": 2")).unwrap());
    }

    #[test]
    fn rejects_unknown_operation_keys() {
        let bad = A.replace("\"a\":", "\"alpha\": 3, \"a\":");
        assert!(matches!(parse(&bad), Err(CliError::ConfigInvalid(_))));
    }

    #[test]
    fn config_round_trips() {
        let c = parse(A).unwrap().config;
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.operation.name(), "sectional-curvature");
    }
}
