//! Dispatch of a loaded config to the library and assembly of the result record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use horocell::bridge::{self, PointMap, WdmProblem, WeightedSampleSet};
use horocell::convolution::{
    self, DirectionalFunction, FiberGrid, Kernel, Layer, LayerStack, McEstimate, McParams, Quadrature,
};
use horocell::frame::{self, Frame, OrthonormalFrame};
use horocell::manifold::{self, Manifold, Tangent};
use horocell::stochastics::{self, DevelopOptions};
use horocell::Point;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FrameConfig, LoadedConfig, Operation};
use crate::error::{failed, invalid, CliError};

/// One JSON result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub operation: String,
    pub manifold: String,
    pub seed: u64,
    pub values: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    pub wall_time: f64,
    pub version: String,
}

/// What an operation produced before bookkeeping is attached.
struct Outcome {
    values: Value,
    stderr: Option<Vec<f64>>,
    diagnostics: BTreeMap<String, f64>,
    csv: Option<Vec<u8>>,
}

impl Outcome {
    fn plain(values: Value) -> Self {
        Self { values, stderr: None, diagnostics: BTreeMap::new(), csv: None }
    }

    fn estimate(est: McEstimate) -> Self {
        let mut diagnostics = est.diagnostics;
        diagnostics.insert("n_paths".into(), est.n_paths as f64);
        Self { values: json!(est.value), stderr: Some(est.stderr), diagnostics, csv: None }
    }
}

/// Paths of the files written by [`run`].
#[derive(Debug, Clone)]
pub struct Written {
    pub json: PathBuf,
    pub csv: Option<PathBuf>,
}

pub fn execute(loaded: &LoadedConfig, seed_override: Option<u64>) -> Result<(ResultRecord, Option<Vec<u8>>), CliError> {
    let cfg = &loaded.config;
    let seed = seed_override.unwrap_or(cfg.seed);
    let m = manifold::from_id(&cfg.manifold).map_err(invalid)?;
    log::info!("running {} on {} with seed {seed}", cfg.operation.name(), cfg.manifold);
    let start = Instant::now();
    let out = dispatch(m, cfg, seed)?;
    let record = ResultRecord {
        config_hash: loaded.hash.clone(),
        operation: cfg.operation.name().to_string(),
        manifold: cfg.manifold.clone(),
        seed,
        values: out.values,
        stderr: out.stderr,
        diagnostics: out.diagnostics,
        wall_time: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((record, out.csv))
}

/// Runs the config and writes `<stem>.json` (and `<stem>.csv` when the
/// operation produced one and `write_csv` is set) into `out_dir`.
pub fn run(config_path: &Path, loaded: &LoadedConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<Written, CliError> {
    let (record, csv) = execute(loaded, seed_override)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
    let json_path = out_dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&record).expect("records serialize");
    std::fs::write(&json_path, text + "\n").map_err(|e| CliError::io(&json_path, e))?;
    let csv_path = match csv {
        Some(bytes) if loaded.config.write_csv => {
            let p = out_dir.join(format!("{stem}.csv"));
            std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
            Some(p)
        }
        _ => None,
    };
    Ok(Written { json: json_path, csv: csv_path })
}

fn build_frame(m: &dyn Manifold, spec: &FrameConfig) -> Result<OrthonormalFrame, CliError> {
    manifold::check_point(m, &spec.base).map_err(invalid)?;
    let d = m.dim();
    match &spec.columns {
        None => OrthonormalFrame::standard(m, spec.base.clone()).map_err(invalid),
        Some(cols) => {
            if cols.len() != d || cols.iter().any(|c| c.len() != d) {
                return Err(CliError::ConfigInvalid(format!("frame needs {d} columns of length {d}")));
            }
            let basis = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
            let f = Frame::new(spec.base.clone(), basis).map_err(invalid)?;
            frame::orthonormalize(m, &f).map_err(invalid)
        }
    }
}

fn check_points(m: &dyn Manifold, pts: &[&Point]) -> Result<(), CliError> {
    pts.iter().try_for_each(|p| manifold::check_point(m, p)).map_err(invalid)
}

fn check_len(what: &str, v: &[f64], d: usize) -> Result<(), CliError> {
    if v.len() != d {
        return Err(CliError::ConfigInvalid(format!("{what} has length {}, expected {d}", v.len())));
    }
    Ok(())
}

fn frame_json(u: &Frame) -> Value {
    json!({ "chart": u.base.chart, "coords": u.base.coords, "basis": u.basis_flat() })
}

fn point_json(p: &Point) -> Value {
    json!({ "chart": p.chart, "coords": p.coords })
}

fn dispatch(m: Arc<dyn Manifold>, cfg: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let mr = m.as_ref();
    let d = mr.dim();
    let kernel = |spec: &convolution::KernelSpec| Kernel::new(d, spec.clone()).map_err(invalid);
    let function = |spec: &convolution::FunctionSpec| DirectionalFunction::from_spec(m.clone(), spec).map_err(invalid);
    match &cfg.operation {
        Operation::GeodesicExp { base, velocity, n_steps } => {
            check_points(mr, &[base])?;
            check_len("velocity", velocity, d)?;
            let p = manifold::geodesic_exp(mr, &Tangent::new(base.clone(), velocity.clone()), *n_steps).map_err(failed)?;
            Ok(Outcome::plain(point_json(&p)))
        }
        Operation::RiemannianLog { from, to, tol } => {
            check_points(mr, &[from, to])?;
            let v = manifold::riemannian_log(mr, from, to, *tol).map_err(failed)?;
            let norm = manifold::metric_norm(mr, from, &v.components);
            let mut out = Outcome::plain(json!(v.components));
            out.diagnostics.insert("length".into(), norm);
            Ok(out)
        }
        Operation::SectionalCurvature { point, a, b } => {
            check_points(mr, &[point])?;
            check_len("a", a, d)?;
            check_len("b", b, d)?;
            let k = manifold::sectional_curvature(mr, point, a, b).map_err(failed)?;
            Ok(Outcome::plain(json!(k)))
        }
        Operation::Holonomy { frame, path } => {
            let u = build_frame(mr, frame)?;
            check_points(mr, &path.iter().collect::<Vec<_>>())?;
            let a = frame::holonomy(mr, &u, path).map_err(failed)?;
            let rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
            let mut out = Outcome::plain(json!(rows));
            if d == 2 {
                out.diagnostics.insert("angle".into(), a[(1, 0)].atan2(a[(0, 0)]));
            }
            Ok(out)
        }
        Operation::TransportFrame { frame, direction, t, n_steps } => {
            let u = build_frame(mr, frame)?;
            check_len("direction", direction, d)?;
            let r = frame::transport_frame_geodesic_report(mr, &u, direction, *t, *n_steps).map_err(failed)?;
            let mut out = Outcome::plain(frame_json(r.frame.frame()));
            out.diagnostics.insert("orthonormality_defect".into(), r.defect);
            out.diagnostics.insert("reprojected".into(), if r.reprojected { 1.0 } else { 0.0 });
            Ok(out)
        }
        Operation::SampleBrownian { frame, t, n_steps, n_paths } => {
            let u = build_frame(mr, frame)?;
            let paths = (0..*n_paths as u64)
                .into_par_iter()
                .map(|j| stochastics::sample_brownian_stream(mr, &u, *t, *n_steps, seed, j))
                .collect::<horocell::Result<Vec<_>>>()
                .map_err(failed)?;
            let ends: Vec<Value> = paths.iter().map(|p| frame_json(p.endpoint().frame())).collect();
            let max_defect = paths.iter().map(|p| p.max_defect).fold(0.0, f64::max);
            let mut csv = Vec::new();
            stochastics::write_csv(&paths, &mut csv).map_err(failed)?;
            let mut out = Outcome::plain(json!(ends));
            out.diagnostics.insert("max_orthonormality_defect".into(), max_defect);
            out.csv = Some(csv);
            Ok(out)
        }
        Operation::ConvDirectional { kernel: k, function: f, frame, nodes } => {
            let (k, f, u) = (kernel(k)?, function(f)?, build_frame(mr, frame)?);
            let v = convolution::conv_directional(mr, &k, &f, &u, Quadrature { nodes: *nodes }).map_err(failed)?;
            Ok(Outcome::plain(json!(v)))
        }
        Operation::ConvHorizontal { kernel: k, function: f, frame, t, n_paths, n_steps } => {
            let (k, f, u) = (kernel(k)?, function(f)?, build_frame(mr, frame)?);
            let p = McParams::new(*t, *n_paths, *n_steps, seed);
            Ok(Outcome::estimate(convolution::conv_horizontal_mc(mr, &k, &f, &u, &p).map_err(failed)?))
        }
        Operation::ConvLogForm { kernel: k, function: f, frame, t, n_paths, n_steps } => {
            let (k, f, u) = (kernel(k)?, function(f)?, build_frame(mr, frame)?);
            let p = McParams::new(*t, *n_paths, *n_steps, seed);
            Ok(Outcome::estimate(convolution::conv_log_form(mr, &k, &f, &u, &p).map_err(failed)?))
        }
        Operation::ConvFiberDensity { kernel: k, function: f, frame, t, n_paths, n_steps } => {
            let (k, f, u) = (kernel(k)?, function(f)?, build_frame(mr, frame)?);
            let p = McParams::new(*t, *n_paths, *n_steps, seed);
            let est = convolution::conv_fiber_density(mr, &k, &f, &u, &p, FiberGrid::default()).map_err(failed)?;
            Ok(Outcome::estimate(est))
        }
        Operation::ConvMultilayer { layers, function: f, frame, total_time, n_paths, n_steps, mode } => {
            let layers = layers
                .iter()
                .map(|l| Ok(Layer { kernel: kernel(&l.kernel)?, nonlinearity: l.nonlinearity }))
                .collect::<Result<Vec<_>, CliError>>()?;
            let stack = LayerStack::new(layers, *total_time).map_err(invalid)?;
            let (f, u) = (function(f)?, build_frame(mr, frame)?);
            let est = convolution::conv_multilayer(mr, &stack, &f, &u, *n_paths, *n_steps, seed, *mode, &DevelopOptions::default())
                .map_err(failed)?;
            Ok(Outcome::estimate(est))
        }
        Operation::CommutatorDefect { k1, k2, function: f, frame, nodes, bracket_step } => {
            let (k1, k2, f, u) = (kernel(k1)?, kernel(k2)?, function(f)?, build_frame(mr, frame)?);
            let q = Quadrature { nodes: *nodes };
            let defects = convolution::commutator_defect(mr, &k1, &k2, &f, &u, q).map_err(failed)?;
            let bracket = convolution::bracket_term(mr, &k1, &k2, &f, &u, q, *bracket_step).map_err(failed)?;
            Ok(Outcome::plain(json!({
                "assoc": defects.assoc,
                "comm": defects.comm,
                "nested": defects.nested,
                "bracket_term": bracket,
            })))
        }
        Operation::HeatKernel { from, to, t, n_paths, n_steps } => {
            check_points(mr, &[from, to])?;
            let est = bridge::heat_kernel_estimate(mr, from, to, *t, *n_paths, *n_steps, seed).map_err(failed)?;
            Ok(Outcome::estimate(est))
        }
        Operation::SampleWdm { points, weights, t, drift_variant, j, n_steps } => {
            let prob = WdmProblem::new(m.clone(), points.clone(), weights.clone(), *t, *drift_variant).map_err(invalid)?;
            let (v, set) = bridge::sample_wdm_sir(&prob, *j, *n_steps, seed).map_err(failed)?;
            wdm_outcome(mr, &v, &set)
        }
        Operation::WdmLoglik { points, weights, t, at, n_paths, n_steps } => {
            let prob = WdmProblem::new(m.clone(), points.clone(), weights.clone(), *t, Default::default()).map_err(invalid)?;
            check_points(mr, &[at])?;
            Ok(Outcome::estimate(bridge::wdm_loglik(&prob, at, *n_paths, *n_steps, seed).map_err(failed)?))
        }
        Operation::WfmGradientDescent { points, weights, step, tol, max_iter } => {
            check_points(mr, &points.iter().collect::<Vec<_>>())?;
            let y = bridge::wfm_gradient_descent(mr, points, weights, *step, *tol, *max_iter).map_err(failed)?;
            Ok(Outcome::plain(point_json(&y)))
        }
        Operation::ConvWdm { kernel: k, at, neighbors, t, j, n_steps } => {
            check_points(mr, &[at])?;
            check_points(mr, &neighbors.iter().collect::<Vec<_>>())?;
            let (v, set) =
                bridge::conv_wdm(m.clone(), k, &PointMap::Identity, at, neighbors, *t, *j, *n_steps, seed).map_err(failed)?;
            wdm_outcome(mr, &v, &set)
        }
    }
}

/// Resampled point, weighted moments and weight diagnostics of a SIR run; the
/// CSV lists every weighted sample.
fn wdm_outcome(m: &dyn Manifold, v: &Point, set: &WeightedSampleSet) -> Result<Outcome, CliError> {
    let (mean, cov) = bridge::wdm_moments(m, set).map_err(failed)?;
    let normalized = set.normalized_weights().map_err(failed)?;
    let ess = set.effective_sample_size().map_err(failed)?;
    let d = m.dim();
    let cov_rows: Vec<Vec<f64>> = cov.row_iter().map(|r| r.iter().copied().collect()).collect();

    let mut diagnostics = BTreeMap::new();
    let n = set.hit_defects.len().max(1) as f64;
    diagnostics.insert("ess".into(), ess);
    diagnostics.insert("escaped".into(), set.escaped as f64);
    diagnostics.insert("hit_defect_mean".into(), set.hit_defects.iter().sum::<f64>() / n);
    diagnostics.insert("hit_defect_max".into(), set.hit_defects.iter().cloned().fold(0.0, f64::max));
    diagnostics.insert("log_weight_min".into(), set.log_weights.iter().cloned().fold(f64::INFINITY, f64::min));
    diagnostics.insert("log_weight_max".into(), set.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    diagnostics.insert("n_samples".into(), set.samples.len() as f64);

    let io = |e: csv::Error| CliError::OperationFailed { class: "Io", message: format!("csv: {e}") };
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample".to_string(), "chart_id".into()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend(["log_weight".into(), "normalized_weight".into(), "hit_defect".into()]);
    wtr.write_record(&header).map_err(io)?;
    for (i, p) in set.samples.iter().enumerate() {
        let mut rec = vec![i.to_string(), p.chart.to_string()];
        rec.extend(p.coords.iter().map(|x| format!("{x:?}")));
        rec.extend([set.log_weights[i], normalized[i], set.hit_defects[i]].iter().map(|x| format!("{x:?}")));
        wtr.write_record(&rec).map_err(io)?;
    }
    let csv = wtr.into_inner().map_err(|e| CliError::OperationFailed { class: "Io", message: e.to_string() })?;

    Ok(Outcome {
        values: json!({
            "resampled": point_json(v),
            "weighted_mean": point_json(&mean),
            "weighted_covariance": cov_rows,
        }),
        stderr: None,
        diagnostics,
        csv: Some(csv),
    })
}
