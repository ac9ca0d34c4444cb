//! Local statistics of rescaled eigenvalues near a bulk point.
//!
//! Eigenvalues are mapped to `zhat = sqrt(N sigma^2) (lambda - z0)`; in those
//! units the limiting process is the Ginibre bulk process with density
//! `1/pi`. Estimators keep guard bands away from the window border:
//! the density uses `|zhat| <= rho/2`, pair counts use reference points with
//! `|zhat| <= rho - r_max`, and nearest-neighbour spacings use reference
//! points with `|zhat| <= rho - 2`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bulk::{rescale_factor, BulkParameters};
use crate::error::{Error, Result};
use crate::kernel::predicted_pair_correlation;
use crate::lab::SpectrumSample;
use crate::rng::TrialRng;

pub const DEFAULT_WINDOW_RHO: f64 = 5.0;
pub const DEFAULT_PAIR_R_MAX: f64 = 2.5;
pub const DEFAULT_PAIR_BINS: usize = 25;
/// Guard band for spacing reference points.
pub const SPACING_GUARD: f64 = 2.0;

const MIN_DENSITY_COUNT: usize = 50;
const MIN_PAIRS: usize = 200;
const MIN_SPACING_POINTS: usize = 200;
const MIN_MATCHED_SPACINGS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalStatistics {
    /// Per trial (in trial order), the rescaled points with `|zhat| <= rho`.
    pub rescaled_points: Vec<Vec<Complex64>>,
    pub window_radius: f64,
    pub n_trials: usize,
    pub n: usize,
    pub sigma_sq: f64,
}

/// Rescaled eigenvalues inside the window of radius `rho`.
pub fn extract_local(sample: &SpectrumSample, bp: &BulkParameters, rho: f64) -> Vec<Complex64> {
    let scale = rescale_factor(bp, sample.n);
    sample
        .eigenvalues
        .iter()
        .map(|l| (l - bp.z0) * scale)
        .filter(|z| z.norm() <= rho)
        .collect()
}

impl LocalStatistics {
    /// Aggregates samples of one dimension; trials are ordered by index so the
    /// result does not depend on the order the samples were produced in.
    pub fn from_samples(samples: &[SpectrumSample], bp: &BulkParameters, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config(format!("window radius must be positive, got {rho}")));
        }
        let Some(first) = samples.first() else {
            return Err(Error::InsufficientData("no samples".into()));
        };
        let n = first.n;
        if samples.iter().any(|s| s.n != n) {
            return Err(Error::Dimension("samples of different dimensions cannot be pooled".into()));
        }
        let mut ordered: Vec<&SpectrumSample> = samples.iter().collect();
        ordered.sort_by_key(|s| s.trial_index);
        Ok(LocalStatistics {
            rescaled_points: ordered.iter().map(|s| extract_local(s, bp, rho)).collect(),
            window_radius: rho,
            n_trials: samples.len(),
            n,
            sigma_sq: bp.sigma_sq,
        })
    }

    /// Statistics built directly from already rescaled point clouds.
    pub fn from_rescaled(trials: Vec<Vec<Complex64>>, rho: f64) -> Self {
        let rescaled_points: Vec<Vec<Complex64>> =
            trials.into_iter().map(|t| t.into_iter().filter(|z| z.norm() <= rho).collect()).collect();
        LocalStatistics {
            n_trials: rescaled_points.len(),
            rescaled_points,
            window_radius: rho,
            n: 0,
            sigma_sq: 1.0,
        }
    }

    pub fn total_points(&self) -> usize {
        self.rescaled_points.iter().map(Vec::len).sum()
    }

    /// Keeps only the first `trials` trials.
    pub fn truncated(&self, trials: usize) -> Self {
        let rescaled_points: Vec<_> = self.rescaled_points.iter().take(trials).cloned().collect();
        LocalStatistics { n_trials: rescaled_points.len(), rescaled_points, ..self.clone() }
    }
}

/// Points per unit rescaled area inside `|zhat| <= rho/2`, averaged over trials.
pub fn density_estimate(stats: &LocalStatistics) -> Result<f64> {
    density_estimate_within(stats, 0.5 * stats.window_radius)
}

/// Density estimate over the disc `|zhat| <= inner`.
pub fn density_estimate_within(stats: &LocalStatistics, inner: f64) -> Result<f64> {
    if stats.n_trials == 0 {
        return Err(Error::InsufficientData("no trials".into()));
    }
    let count = count_within(stats, inner);
    if count < MIN_DENSITY_COUNT {
        return Err(Error::InsufficientData(format!(
            "{count} points inside |zhat| <= {inner}, need at least {MIN_DENSITY_COUNT}"
        )));
    }
    Ok(density_from_count(count, inner, stats.n_trials))
}

fn density_from_count(count: usize, inner: f64, trials: usize) -> f64 {
    count as f64 / (PI * inner * inner * trials as f64)
}

pub fn count_within(stats: &LocalStatistics, radius: f64) -> usize {
    stats.rescaled_points.iter().flatten().filter(|z| z.norm() <= radius).count()
}

/// Unrescaled density: eigenvalues per unit area within `radius` of `z0`.
pub fn raw_density_estimate(samples: &[SpectrumSample], z0: Complex64, radius: f64) -> f64 {
    let count = samples
        .iter()
        .flat_map(|s| s.eigenvalues.iter())
        .filter(|l| (*l - z0).norm() <= radius)
        .count();
    count as f64 / (PI * radius * radius * samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
    pub r_max: f64,
    /// Reference points (inside `|zhat| <= rho - r_max`) summed over trials.
    pub reference_count: u64,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.r_max / self.bin_centers.len() as f64
    }

    /// Largest `|ghat(r_b) - (1 - exp(-r_b^2))|` over bins holding at least
    /// `min_pairs` pairs, with the number of such bins.
    pub fn max_deviation_from_theory(&self, min_pairs: u64) -> (f64, usize) {
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for ((r, v), c) in self.bin_centers.iter().zip(&self.values).zip(&self.counts) {
            if *c >= min_pairs {
                worst = worst.max((v - predicted_pair_correlation(*r)).abs());
                used += 1;
            }
        }
        (worst, used)
    }

    /// CSV with columns `r,value,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,value,count")?;
        for ((r, v), c) in self.bin_centers.iter().zip(&self.values).zip(&self.counts) {
            writeln!(out, "{r},{v},{c}")?;
        }
        Ok(())
    }
}

/// Binned pair correlation `ghat(r)`, normalized against the theoretical
/// density `1/pi` so that a Ginibre bulk sample gives `ghat -> 1 - exp(-r^2)`.
pub fn pair_correlation_estimate(stats: &LocalStatistics, r_max: f64, n_bins: usize) -> Result<Histogram> {
    if n_bins < 4 {
        return Err(Error::Config(format!("need at least 4 bins, got {n_bins}")));
    }
    if !(r_max > 0.0) || r_max > 0.5 * stats.window_radius {
        return Err(Error::Config(format!(
            "r_max = {r_max} must lie in (0, rho/2 = {}]",
            0.5 * stats.window_radius
        )));
    }
    let h = pair_histogram(stats, r_max, n_bins);
    let total: u64 = h.counts.iter().sum();
    if total < MIN_PAIRS as u64 {
        return Err(Error::InsufficientData(format!("{total} contributing pairs, need at least {MIN_PAIRS}")));
    }
    Ok(h)
}

fn pair_histogram(stats: &LocalStatistics, r_max: f64, n_bins: usize) -> Histogram {
    let inner = stats.window_radius - r_max;
    let width = r_max / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    let mut reference_count = 0u64;
    for points in &stats.rescaled_points {
        for (i, zi) in points.iter().enumerate() {
            if zi.norm() > inner {
                continue;
            }
            reference_count += 1;
            for (j, zj) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (zi - zj).norm();
                if d < r_max {
                    counts[((d / width) as usize).min(n_bins - 1)] += 1;
                }
            }
        }
    }
    let bin_centers: Vec<f64> = (0..n_bins).map(|b| (b as f64 + 0.5) * width).collect();
    let values = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            let annulus = PI * (hi * hi - lo * lo);
            if reference_count == 0 {
                0.0
            } else {
                c as f64 / (annulus * (1.0 / PI) * reference_count as f64)
            }
        })
        .collect();
    Histogram { bin_centers, values, counts, r_max, reference_count }
}

/// Empirical CDF as sorted samples; the CDF at `xs[i]` is `(i + 1) / n`
/// (ties share the value of their last occurrence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    pub xs: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Ecdf { xs: samples }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `F(x) = #{samples <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.xs.partition_point(|v| *v <= x) as f64 / self.xs.len() as f64
    }

    pub fn median(&self) -> f64 {
        let n = self.xs.len();
        if n % 2 == 1 {
            self.xs[n / 2]
        } else {
            0.5 * (self.xs[n / 2 - 1] + self.xs[n / 2])
        }
    }

    /// CSV with columns `x,cdf`, one row per distinct sample value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,cdf")?;
        let n = self.xs.len() as f64;
        for (i, x) in self.xs.iter().enumerate() {
            if i + 1 < self.xs.len() && self.xs[i + 1] == *x {
                continue;
            }
            writeln!(out, "{x},{}", (i + 1) as f64 / n)?;
        }
        Ok(())
    }
}

/// Sup-norm distance between two empirical step functions.
pub fn ks_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    while i < a.xs.len() || j < b.xs.len() {
        let x = match (a.xs.get(i), b.xs.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.xs.len() && a.xs[i] <= x {
            i += 1;
        }
        while j < b.xs.len() && b.xs[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Nearest-neighbour distances of points with `|zhat| <= rho - 2`, with
/// neighbours searched among all points of the same trial. Trial order.
pub fn nearest_neighbor_spacings(stats: &LocalStatistics) -> Vec<f64> {
    let inner = stats.window_radius - SPACING_GUARD;
    let mut out = Vec::new();
    for points in &stats.rescaled_points {
        for (i, zi) in points.iter().enumerate() {
            if zi.norm() > inner {
                continue;
            }
            let nearest = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, zj)| (zi - zj).norm())
                .fold(f64::INFINITY, f64::min);
            if nearest.is_finite() {
                out.push(nearest);
            }
        }
    }
    out
}

pub fn nn_spacing_ecdf(stats: &LocalStatistics) -> Result<Ecdf> {
    let total = stats.total_points();
    if total < MIN_SPACING_POINTS {
        return Err(Error::InsufficientData(format!("{total} points in the window, need at least {MIN_SPACING_POINTS}")));
    }
    let spacings = nearest_neighbor_spacings(stats);
    if spacings.is_empty() {
        return Err(Error::InsufficientData("no point inside the spacing window".into()));
    }
    Ok(Ecdf::new(spacings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub points_in_window: u64,
    pub density_points: u64,
    pub pair_reference_points: u64,
    pub pairs: u64,
    pub spacings: u64,
    pub baseline_spacings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_trials: usize,
    pub window_radius: f64,
    pub density_hat: f64,
    pub density_theory: f64,
    pub density_rel_err: f64,
    pub g_of_r: Histogram,
    /// Largest deviation of `ghat` from `1 - exp(-r^2)` over bins with at
    /// least [`ComparisonReport::G_MIN_PAIRS`] pairs (`null` if none qualify).
    pub g_max_abs_dev: Option<f64>,
    /// Two-sample KS distance between nearest-neighbour spacing laws of this
    /// ensemble and a pure Ginibre baseline at equal sample size. Spacing laws
    /// are not covered by correlation-function convergence; this is a
    /// universality heuristic.
    pub ks_spacing_vs_ginibre: Option<f64>,
    pub counts: ReportCounts,
    /// Estimates computed below their minimum sample sizes.
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub const G_MIN_PAIRS: u64 = 500;

    /// Builds the report; `baseline` is the pure Ginibre spacing sample, if any.
    /// Undersized samples still produce every estimate, flagged in `warnings`.
    pub fn build(stats: &LocalStatistics, baseline: Option<&[f64]>, r_max: f64, n_bins: usize) -> Result<Self> {
        if stats.n_trials == 0 {
            return Err(Error::InsufficientData("no trials".into()));
        }
        let mut warnings = Vec::new();
        let inner = 0.5 * stats.window_radius;
        let density_points = count_within(stats, inner);
        if density_points < MIN_DENSITY_COUNT {
            warnings.push(format!("density: {density_points} points, fewer than {MIN_DENSITY_COUNT}"));
        }
        let density_hat = density_from_count(density_points, inner, stats.n_trials);
        let density_theory = 1.0 / PI;
        let g_of_r = match pair_correlation_estimate(stats, r_max, n_bins) {
            Ok(h) => h,
            Err(Error::InsufficientData(msg)) => {
                warnings.push(format!("pair correlation: {msg}"));
                pair_histogram(stats, r_max, n_bins)
            }
            Err(e) => return Err(e),
        };
        let (dev, used) = g_of_r.max_deviation_from_theory(Self::G_MIN_PAIRS);
        let spacings = nearest_neighbor_spacings(stats);
        let (ks, baseline_len) = match baseline {
            Some(base) => {
                let m = spacings.len().min(base.len());
                let ks = (m > 0).then(|| ks_distance(&Ecdf::new(spacings[..m].to_vec()), &Ecdf::new(base[..m].to_vec())));
                if m < MIN_MATCHED_SPACINGS {
                    warnings.push(format!("spacing KS: {m} matched spacings, fewer than {MIN_MATCHED_SPACINGS}"));
                }
                (ks, base.len() as u64)
            }
            None => (None, 0),
        };
        Ok(ComparisonReport {
            n: stats.n,
            n_trials: stats.n_trials,
            window_radius: stats.window_radius,
            density_hat,
            density_theory,
            density_rel_err: (density_hat - density_theory).abs() / density_theory,
            g_max_abs_dev: (used > 0).then_some(dev),
            counts: ReportCounts {
                points_in_window: stats.total_points() as u64,
                density_points: density_points as u64,
                pair_reference_points: g_of_r.reference_count,
                pairs: g_of_r.counts.iter().sum(),
                spacings: spacings.len() as u64,
                baseline_spacings: baseline_len,
            },
            g_of_r,
            ks_spacing_vs_ginibre: ks,
            warnings,
        })
    }
}

/// Homogeneous Poisson cloud of the given intensity in the disc of radius `rho`.
pub fn poisson_cloud(intensity: f64, rho: f64, rng: &mut TrialRng) -> Vec<Complex64> {
    let mean = intensity * PI * rho * rho;
    let count = poisson(mean, rng);
    (0..count)
        .map(|_| {
            let r = rho * rng.uniform().sqrt();
            Complex64::from_polar(r, std::f64::consts::TAU * rng.uniform())
        })
        .collect()
}

fn poisson(mean: f64, rng: &mut TrialRng) -> usize {
    // Sum of Poisson(<= 20) pieces keeps the product method away from underflow.
    let mut remaining = mean;
    let mut total = 0;
    while remaining > 0.0 {
        let piece = remaining.min(20.0);
        remaining -= piece;
        let limit = (-piece).exp();
        let mut p = rng.uniform();
        while p > limit {
            total += 1;
            p *= rng.uniform();
        }
    }
    total
}

pub fn save_csv(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}
