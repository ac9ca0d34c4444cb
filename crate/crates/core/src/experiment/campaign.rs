//! Sampling campaigns: every `(N, trial)` task is independent and carries its
//! own stream, results are reduced in trial order, so outputs do not depend on
//! scheduling or on the number of workers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{now_unix_seconds, write_json};
use crate::bulk::{bulk_parameters, BulkParameters};
use crate::error::{Error, Result};
use crate::lab::{sample_spectrum, save_spectra_csv, spectra_file_name, SpectrumSample};
use crate::model::{DeformationSpec, ValidatedSpec};
use crate::rng::{finalize, mix_seed};
use crate::stats::{nearest_neighbor_spacings, save_csv, ComparisonReport, Ecdf, LocalStatistics};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BULK_FILE: &str = "bulk_parameters.json";
/// Reference bulk point of the pure Ginibre baseline.
pub const BASELINE_Z0: f64 = 0.3;
const FALLBACK_TAG: u64 = 0x52_4554_5259;
const BASELINE_TAG: u64 = 0x4241_5345;

/// Seed of the stream family used for dimension `n`.
pub fn dimension_seed(master_seed: u64, n: usize) -> u64 {
    mix_seed(master_seed, n as u64)
}

pub fn fallback_seed(seed: u64) -> u64 {
    finalize(seed ^ FALLBACK_TAG)
}

pub fn baseline_seed(master_seed: u64) -> u64 {
    finalize(master_seed ^ BASELINE_TAG)
}

/// Pure Ginibre (`tau = 1`, `R0 = 2`) sampled at `z0 = 0.3`.
pub fn baseline_spec() -> ValidatedSpec {
    DeformationSpec::pure_ginibre(1.0, 2).validate().expect("baseline spec is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resample {
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: u64,
    pub ensemble: String,
    pub reason: String,
}

fn is_retryable(e: &Error) -> bool {
    matches!(e, Error::Convergence(_) | Error::Numerical(_))
}

/// Samples `trials` spectra of dimension `n`. A trial whose eigensolve fails
/// is redrawn once from a fallback stream; a second failure aborts.
pub fn run_trials(
    spec: &ValidatedSpec,
    z0: Complex64,
    n: usize,
    trials: usize,
    seed: u64,
    ensemble: &str,
) -> Result<(Vec<SpectrumSample>, Vec<Resample>)> {
    let outcomes: Vec<Result<(SpectrumSample, Option<Resample>)>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| match sample_spectrum(spec, z0, n, seed, trial) {
            Ok(s) => Ok((s, None)),
            Err(e) if is_retryable(&e) => {
                log::warn!("{ensemble} N={n} trial {trial}: {e}; resampling from the fallback stream");
                let s = sample_spectrum(spec, z0, n, fallback_seed(seed), trial)?;
                Ok((s, Some(Resample { n, trial, ensemble: ensemble.to_string(), reason: e.to_string() })))
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut samples = Vec::with_capacity(trials);
    let mut resamples = Vec::new();
    for outcome in outcomes {
        let (s, r) = outcome?;
        samples.push(s);
        resamples.extend(r);
    }
    samples.sort_by_key(|s| s.trial_index);
    Ok((samples, resamples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    #[serde(rename = "N")]
    pub n: usize,
    pub report: String,
    pub g_of_r: String,
    pub spacing_ecdf: String,
    pub baseline_spacing_ecdf: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectra: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    /// Wall-clock seconds per stage, keyed `sample_N{n}`, `stats_N{n}`, ...
    pub stages_s: BTreeMap<String, f64>,
}

/// Index of a completed run. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    pub bulk_parameters: String,
    pub reports: Vec<ReportEntry>,
    pub resamples: Vec<Resample>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Manifest without timestamps and stage timings, for determinism checks.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v.as_object_mut().expect("object").remove("timing");
        v
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("ginlab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("eigensolver".to_string(), "faer 0.24 evd_cplx (sequential)".to_string()),
        ("rng".to_string(), "ChaCha8 + SplitMix64 seed mixing".to_string()),
    ])
}

fn timed<T>(stages: &mut BTreeMap<String, f64>, key: String, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    stages.insert(key, start.elapsed().as_secs_f64());
    out
}

fn save_ecdf(path: &Path, spacings: Vec<f64>) -> Result<()> {
    let ecdf = Ecdf::new(spacings);
    save_csv(path, |w| ecdf.write_csv(w))
}

/// Runs the whole campaign and writes reports, CSVs and the manifest into
/// `out_dir`. Returns the manifest and its path.
pub fn run_campaign(config: &ExperimentConfig, out_dir: &Path) -> Result<(RunManifest, PathBuf)> {
    let spec = config.validate()?;
    let started = now_unix_seconds();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let bp: BulkParameters = bulk_parameters(&spec, config.z0)?;
    let baseline = baseline_spec();
    let baseline_bp = bulk_parameters(&baseline, Complex64::new(BASELINE_Z0, 0.0))?;
    write_json(&out_dir.join(BULK_FILE), &bp)?;

    let mut stages = BTreeMap::new();
    let mut resamples = Vec::new();
    let mut reports = Vec::new();
    for &n in &config.n_list {
        let seed = dimension_seed(config.master_seed, n);
        let (samples, r) =
            timed(&mut stages, format!("sample_N{n}"), || run_trials(&spec, config.z0, n, config.trials, seed, "deformed"))?;
        resamples.extend(r);
        let base_seed = dimension_seed(baseline_seed(config.master_seed), n);
        let (base_samples, r) = timed(&mut stages, format!("baseline_N{n}"), || {
            run_trials(&baseline, baseline_bp.z0, n, config.trials, base_seed, "baseline")
        })?;
        resamples.extend(r);

        let entry = timed(&mut stages, format!("stats_N{n}"), || {
            let stats = LocalStatistics::from_samples(&samples, &bp, config.window_rho)?;
            let base_stats = LocalStatistics::from_samples(&base_samples, &baseline_bp, config.window_rho)?;
            let base_spacings = nearest_neighbor_spacings(&base_stats);
            let report = ComparisonReport::build(&stats, Some(&base_spacings), config.pair_r_max, config.pair_bins)?;
            for w in &report.warnings {
                log::warn!("N={n}: {w}");
            }
            let entry = ReportEntry {
                n,
                report: format!("report_N{n}.json"),
                g_of_r: format!("g_of_r_N{n}.csv"),
                spacing_ecdf: format!("spacing_ecdf_N{n}.csv"),
                baseline_spacing_ecdf: format!("spacing_ecdf_baseline_N{n}.csv"),
                spectra: config.dump_spectra.then(|| spectra_file_name(n, config.master_seed)),
            };
            write_json(&out_dir.join(&entry.report), &report)?;
            save_csv(&out_dir.join(&entry.g_of_r), |w| report.g_of_r.write_csv(w))?;
            save_ecdf(&out_dir.join(&entry.spacing_ecdf), nearest_neighbor_spacings(&stats))?;
            save_ecdf(&out_dir.join(&entry.baseline_spacing_ecdf), base_spacings)?;
            if let Some(name) = &entry.spectra {
                save_spectra_csv(&samples, &out_dir.join(name))?;
            }
            Ok(entry)
        })?;
        log::info!("N={n}: done");
        reports.push(entry);
    }

    let manifest = RunManifest {
        config_hash: config.hash(),
        versions: versions(),
        config: config.clone(),
        bulk_parameters: BULK_FILE.to_string(),
        reports,
        resamples,
        timing: Timing { started_unix_s: started, finished_unix_s: now_unix_seconds(), stages_s: stages },
    };
    let path = out_dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok((manifest, path))
}
