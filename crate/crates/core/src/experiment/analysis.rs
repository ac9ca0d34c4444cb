//! Model report: classification of `z0`, bulk constants and, on request, the
//! support boundary.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::write_json;
use crate::bulk::{bulk_parameters, fixed_point_residual, BulkParameters};
use crate::error::{Error, Result};
use crate::model::{classify_point, trace_boundary, DeformationSpec, PointClass};

pub const MODEL_REPORT_FILE: &str = "model_report.json";
pub const BOUNDARY_FILE: &str = "boundary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub spec: DeformationSpec,
    #[serde(with = "crate::serde_complex")]
    pub z0: Complex64,
    pub classification: PointClass,
    pub support_level: f64,
    pub bulk_parameters: BulkParameters,
    pub fixed_point_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_polylines: Option<usize>,
}

/// Builds the report, refusing edge and exterior points, and writes it with
/// the optional boundary CSV into `out_dir`.
pub fn model_report(config: &ExperimentConfig, out_dir: &Path) -> Result<(ModelReport, PathBuf)> {
    let spec = config.validate()?;
    let class = classify_point(&spec, config.z0)?;
    class.require_bulk()?;
    let bp = bulk_parameters(&spec, config.z0)?;
    let residual = fixed_point_residual(&spec, config.z0, bp.t0)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (boundary_csv, boundary_polylines) = match &config.boundary {
        Some(req) => {
            let curve = trace_boundary(&spec, req.window, req.resolution)?;
            curve.save_csv(&out_dir.join(BOUNDARY_FILE))?;
            (Some(BOUNDARY_FILE.to_string()), Some(curve.polylines.len()))
        }
        None => (None, None),
    };
    let report = ModelReport {
        spec: config.spec.clone(),
        z0: config.z0,
        classification: class,
        support_level: 1.0 / spec.tau,
        bulk_parameters: bp,
        fixed_point_residual: residual,
        boundary_csv,
        boundary_polylines,
    };
    let path = out_dir.join(MODEL_REPORT_FILE);
    write_json(&path, &report)?;
    Ok((report, path))
}
