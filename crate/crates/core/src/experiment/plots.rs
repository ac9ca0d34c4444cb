//! Plot-ready CSV bundle assembled from a finished run.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::campaign::RunManifest;
use crate::error::{Error, Result};
use crate::kernel::predicted_pair_correlation;
use crate::stats::{save_csv, ComparisonReport};

pub const DENSITY_FILE: &str = "density_vs_N.csv";
pub const ERROR_FILE: &str = "error_vs_N.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotBundle {
    pub directory: PathBuf,
    pub files: Vec<String>,
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

/// Step function read back from an `x,cdf` file.
fn read_ecdf(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut parts = line.split(',').map(|p| p.trim().parse::<f64>());
            match (parts.next(), parts.next()) {
                (Some(Ok(x)), Some(Ok(c))) => Ok((x, c)),
                _ => Err(Error::Config(format!("{}: malformed row `{line}`", path.display()))),
            }
        })
        .collect()
}

fn step_eval(points: &[(f64, f64)], x: f64) -> f64 {
    match points.partition_point(|(v, _)| *v <= x) {
        0 => 0.0,
        k => points[k - 1].1,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the bundle into `out_dir` (default: `plots/` next to the manifest).
pub fn build_plot_bundle(manifest_path: &Path, out_dir: Option<&Path>) -> Result<PlotBundle> {
    let manifest = RunManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let out = out_dir.map(Path::to_path_buf).unwrap_or_else(|| root.join("plots"));

    let mut loaded = Vec::new();
    for entry in &manifest.reports {
        let report_path = require(root.join(&entry.report))?;
        let text = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
        let report: ComparisonReport = serde_json::from_str(&text)?;
        let deformed = read_ecdf(&require(root.join(&entry.spacing_ecdf))?)?;
        let baseline = read_ecdf(&require(root.join(&entry.baseline_spacing_ecdf))?)?;
        require(root.join(&entry.g_of_r))?;
        if let Some(s) = &entry.spectra {
            require(root.join(s))?;
        }
        loaded.push((report, deformed, baseline));
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let mut files = Vec::new();
    save_csv(&out.join(DENSITY_FILE), |w| {
        writeln!(w, "N,density_hat,density_theory,density_rel_err,n_trials")?;
        for (r, _, _) in &loaded {
            writeln!(w, "{},{},{},{},{}", r.n, r.density_hat, r.density_theory, r.density_rel_err, r.n_trials)?;
        }
        Ok(())
    })?;
    files.push(DENSITY_FILE.to_string());
    save_csv(&out.join(ERROR_FILE), |w| {
        writeln!(w, "N,density_rel_err,g_max_abs_dev,ks_spacing_vs_ginibre,inv_sqrt_N")?;
        for (r, _, _) in &loaded {
            let inv = 1.0 / (r.n as f64).sqrt();
            writeln!(w, "{},{},{},{},{}", r.n, r.density_rel_err, fmt_opt(r.g_max_abs_dev), fmt_opt(r.ks_spacing_vs_ginibre), inv)?;
        }
        Ok(())
    })?;
    files.push(ERROR_FILE.to_string());
    for (r, deformed, baseline) in &loaded {
        let g_name = format!("g_vs_theory_N{}.csv", r.n);
        save_csv(&out.join(&g_name), |w| {
            writeln!(w, "r,ghat,g_theory,count")?;
            let h = &r.g_of_r;
            for ((x, v), c) in h.bin_centers.iter().zip(&h.values).zip(&h.counts) {
                writeln!(w, "{x},{v},{},{c}", predicted_pair_correlation(*x))?;
            }
            Ok(())
        })?;
        files.push(g_name);
        let s_name = format!("spacing_ecdfs_N{}.csv", r.n);
        save_csv(&out.join(&s_name), |w| {
            writeln!(w, "x,cdf_deformed,cdf_ginibre")?;
            let mut xs: Vec<f64> = deformed.iter().chain(baseline.iter()).map(|p| p.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            for x in xs {
                writeln!(w, "{x},{},{}", step_eval(deformed, x), step_eval(baseline, x))?;
            }
            Ok(())
        })?;
        files.push(s_name);
    }
    Ok(PlotBundle { directory: out, files })
}
