//! Sampling from the deformed ensemble and computing full complex spectra.

use std::io::Write;
use std::path::Path;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors, EvdError};
use faer::diag::Diag;
use faer::{c64, Mat, MatRef, Par};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_mean_matrix, ValidatedSpec};
use crate::numeric::pairwise_sum_complex;
use crate::rng::TrialRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    #[serde(with = "crate::serde_complex::vec")]
    pub eigenvalues: Vec<Complex64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub trial_index: u64,
    pub trace_residual: f64,
    pub trace2_residual: f64,
}

/// `X = X0 + G` with `G_jk` i.i.d. complex Gaussian, `E|G_jk|^2 = tau/N`.
/// Entries are drawn row by row from the trial's stream.
pub fn sample_matrix(spec: &ValidatedSpec, z0: Complex64, n: usize, seed: u64, trial: u64) -> Result<Mat<c64>> {
    let mean = build_mean_matrix(spec, n, z0)?;
    let mut rng = TrialRng::new(seed, trial);
    let scale = (spec.tau / (2.0 * n as f64)).sqrt();
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re = rng.standard_normal() * scale;
        let im = rng.standard_normal() * scale;
        entries.push(c64::new(re, im));
    }
    let mut x = Mat::from_fn(n, n, |i, j| entries[i * n + j]);
    for (i, d) in mean.diagonal.iter().enumerate() {
        x[(i, i)] += *d;
    }
    Ok(x)
}

/// All eigenvalues of a square complex matrix, sorted by real part then
/// imaginary part, with trace identities checked.
///
/// The reduction is delegated to faer's dense complex eigensolver
/// (Hessenberg reduction followed by shifted QR) run sequentially, so the
/// result does not depend on the thread pool.
pub fn eigenvalues(x: MatRef<'_, c64>) -> Result<SpectrumSample> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square", n, x.ncols())));
    }
    for j in 0..n {
        for i in 0..n {
            let v = x[(i, j)];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    let mut s = Diag::<c64>::zeros(n);
    let par = Par::Seq;
    let mut mem = MemBuffer::new(evd::evd_scratch::<c64>(
        n,
        ComputeEigenvectors::No,
        ComputeEigenvectors::No,
        par,
        Default::default(),
    ));
    evd::evd_cplx(x, s.as_mut(), None, None, par, MemStack::new(&mut mem), Default::default()).map_err(
        |e| match e {
            EvdError::NoConvergence => Error::Convergence(format!("QR iteration on a {n}x{n} matrix")),
        },
    )?;
    let mut eigenvalues: Vec<Complex64> = s.column_vector().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let trace = pairwise_sum_complex(&(0..n).map(|i| x[(i, i)]).collect::<Vec<_>>());
    let mut products = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            products.push(x[(i, j)] * x[(j, i)]);
        }
    }
    let trace2 = pairwise_sum_complex(&products);
    let eig_sum = pairwise_sum_complex(&eigenvalues);
    let eig_sq_sum = pairwise_sum_complex(&eigenvalues.iter().map(|l| l * l).collect::<Vec<_>>());
    let trace_residual = (eig_sum - trace).norm();
    let trace2_residual = (eig_sq_sum - trace2).norm();
    let nf = n as f64;
    if trace_residual > 1e-8 * nf * (1.0 + trace.norm()) {
        return Err(Error::Numerical(format!(
            "eigenvalue sum misses the trace by {trace_residual:e} (N = {n})"
        )));
    }
    if trace2_residual > 1e-6 * nf * (1.0 + trace2.norm()) {
        return Err(Error::Numerical(format!(
            "sum of squared eigenvalues misses Tr X^2 by {trace2_residual:e} (N = {n})"
        )));
    }
    Ok(SpectrumSample { eigenvalues, n, seed: 0, trial_index: 0, trace_residual, trace2_residual })
}

/// Samples one matrix and returns its spectrum with provenance filled in.
pub fn sample_spectrum(spec: &ValidatedSpec, z0: Complex64, n: usize, seed: u64, trial: u64) -> Result<SpectrumSample> {
    let x = sample_matrix(spec, z0, n, seed, trial)?;
    let mut sample = eigenvalues(x.as_ref())?;
    sample.seed = seed;
    sample.trial_index = trial;
    Ok(sample)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// diagonal of R made real positive (Gram-Schmidt yields that directly).
pub fn haar_unitary_with_rng(n: usize, rng: &mut TrialRng) -> Mat<c64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<c64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re = rng.standard_normal() * scale;
                    let im = rng.standard_normal() * scale;
                    c64::new(re, im)
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        // Two passes of modified Gram-Schmidt keep the columns orthogonal to
        // working precision.
        for _ in 0..2 {
            for q in 0..k {
                let (done, rest) = cols.split_at_mut(k);
                let proj: c64 = done[q].iter().zip(rest[0].iter()).map(|(u, v)| u.conj() * v).sum();
                for (v, u) in rest[0].iter_mut().zip(done[q].iter()) {
                    *v -= u * proj;
                }
            }
        }
        let norm = cols[k].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[k].iter_mut() {
            *v /= norm;
        }
    }
    Mat::from_fn(n, n, |i, j| cols[j][i])
}

pub fn haar_unitary(n: usize, seed: u64) -> Mat<c64> {
    let mut rng = TrialRng::from_seed(crate::rng::finalize(seed ^ 0x4841_4152));
    haar_unitary_with_rng(n, &mut rng)
}

/// Raw-spectrum dump with columns `trial,re,im`.
pub fn write_spectra_csv<W: Write>(samples: &[SpectrumSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "trial,re,im")?;
    for s in samples {
        for l in &s.eigenvalues {
            writeln!(out, "{},{},{}", s.trial_index, l.re, l.im)?;
        }
    }
    Ok(())
}

pub fn spectra_file_name(n: usize, seed: u64) -> String {
    format!("spectra_N{n}_seed{seed}.csv")
}

pub fn save_spectra_csv(samples: &[SpectrumSample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_spectra_csv(samples, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, DeformationSpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ginibre() -> ValidatedSpec {
        DeformationSpec::pure_ginibre(1.0, 2).validate().unwrap()
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_spectrum() {
        let x = Mat::from_fn(3, 3, |i, j| if i != j { c(0.0, 0.0) } else { [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)][i] });
        let s = eigenvalues(x.as_ref()).unwrap();
        let expected = sorted(vec![c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)]);
        for (a, b) in s.eigenvalues.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn nilpotent_spectrum() {
        let x = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let s = eigenvalues(x.as_ref()).unwrap();
        assert!(s.eigenvalues.iter().all(|l| l.norm() < 1e-12));
    }

    /// Durand-Kerner iteration: an independent polynomial root finder.
    fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
        let deg = coeffs.len() - 1;
        let p = |z: Complex64| coeffs.iter().fold(c(0.0, 0.0), |acc, &a| acc * z + a);
        let mut roots: Vec<Complex64> = (0..deg).map(|k| c(0.4, 0.9).powu(k as u32)).collect();
        for _ in 0..500 {
            for i in 0..deg {
                let denom = (0..deg).filter(|&j| j != i).fold(c(1.0, 0.0), |acc, j| acc * (roots[i] - roots[j]));
                let step = p(roots[i]) / denom;
                roots[i] -= step;
            }
        }
        sorted(roots)
    }

    #[test]
    fn companion_matrix_roots() {
        // p(l) = l^3 - 6 l^2 + 11 l - 6
        let oracle = polynomial_roots(&[1.0, -6.0, 11.0, -6.0]);
        let companion = [[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let x = Mat::from_fn(3, 3, |i, j| c(companion[i][j], 0.0));
        let s = eigenvalues(x.as_ref()).unwrap();
        for ((l, o), exact) in s.eigenvalues.iter().zip(&oracle).zip([1.0, 2.0, 3.0]) {
            assert!((l - o).norm() < 1e-10);
            assert!((l - c(exact, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn entry_variance_of_two_by_two() {
        let spec = DeformationSpec::pure_ginibre(1.0, 0).validate().unwrap();
        let draws = 100_000;
        let mut acc = 0.0;
        for t in 0..draws {
            let x = sample_matrix(&spec, c(0.3, 0.0), 2, 11, t).unwrap();
            acc += x[(0, 0)].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((0.49..=0.51).contains(&mean), "E|X11|^2 = {mean}");
    }

    #[test]
    fn entry_mean_matches_mean_matrix() {
        let spec = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(1.0, 0.5, 0.5), Atom::new(-1.0, 0.0, 0.5)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 2,
        }
        .validate()
        .unwrap();
        let n = 4;
        let draws = 100_000u64;
        let mut sum = Mat::<c64>::zeros(n, n);
        for t in 0..draws {
            sum += sample_matrix(&spec, c(0.0, 0.0), n, 5, t).unwrap();
        }
        let mean_matrix = build_mean_matrix(&spec, n, c(0.0, 0.0)).unwrap();
        // Each of re/im has standard deviation sqrt(tau / 2N); allow 4 sigma / sqrt(draws).
        let bound = 4.0 * (spec.tau / (2.0 * n as f64)).sqrt() / (draws as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { mean_matrix.diagonal[i] } else { c(0.0, 0.0) };
                let got = sum[(i, j)] / draws as f64;
                assert!((got.re - expected.re).abs() < bound && (got.im - expected.im).abs() < bound);
            }
        }
    }

    #[test]
    fn same_seed_same_matrix() {
        let spec = ginibre();
        let a = sample_matrix(&spec, c(0.3, 0.0), 16, 99, 3).unwrap();
        let b = sample_matrix(&spec, c(0.3, 0.0), 16, 99, 3).unwrap();
        let d = sample_matrix(&spec, c(0.3, 0.0), 16, 99, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        let s1 = sample_spectrum(&spec, c(0.3, 0.0), 32, 99, 3).unwrap();
        let s2 = sample_spectrum(&spec, c(0.3, 0.0), 32, 99, 3).unwrap();
        assert_eq!(s1, s2);
        assert_eq!((s1.seed, s1.trial_index, s1.n), (99, 3, 32));
    }

    #[test]
    fn spectrum_is_permutation_invariant() {
        let spec = ginibre();
        let x = sample_matrix(&spec, c(0.3, 0.0), 24, 3, 0).unwrap();
        let mut rng = TrialRng::new(17, 0);
        let mut perm: Vec<usize> = (0..24).collect();
        for i in (1..24).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, j);
        }
        let y = Mat::from_fn(24, 24, |i, j| x[(perm[i], perm[j])]);
        let a = eigenvalues(x.as_ref()).unwrap().eigenvalues;
        let b = eigenvalues(y.as_ref()).unwrap().eigenvalues;
        // Match as multisets: each eigenvalue of one has a partner in the other.
        for l in &a {
            let d = b.iter().map(|m| (l - m).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8);
        }
    }

    #[test]
    fn spectral_radius_of_pure_ginibre() {
        let spec = ginibre();
        for trial in 0..3 {
            let s = sample_spectrum(&spec, c(0.3, 0.0), 512, 2024, trial).unwrap();
            let radius = s.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
            assert!((0.9..=1.2).contains(&radius), "spectral radius {radius}");
            assert_eq!(s.eigenvalues.len(), 512);
        }
    }

    #[test]
    fn non_square_is_rejected() {
        let x = Mat::<c64>::zeros(2, 3);
        assert!(matches!(eigenvalues(x.as_ref()), Err(Error::Dimension(_))));
    }

    #[test]
    fn haar_unitarity() {
        let u = haar_unitary(1, 5);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
        for seed in 0..20 {
            let u = haar_unitary(3, seed);
            for i in 0..3 {
                for j in 0..3 {
                    let dot: c64 = (0..3).map(|k| u[(k, i)].conj() * u[(k, j)]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - c(target, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn haar_second_moment() {
        let mut rng = TrialRng::new(8, 0);
        let draws = 100_000;
        let mean = (0..draws).map(|_| haar_unitary_with_rng(4, &mut rng)[(0, 0)].norm_sqr()).sum::<f64>() / draws as f64;
        assert!((mean - 0.25).abs() < 0.01, "E|U11|^2 = {mean}");
    }

    #[test]
    fn spectra_csv_layout() {
        let s = sample_spectrum(&ginibre(), c(0.3, 0.0), 8, 1, 2).unwrap();
        let mut buf = Vec::new();
        write_spectra_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,re,im\n2,"));
        assert_eq!(text.lines().count(), 9);
        assert_eq!(spectra_file_name(256, 7), "spectra_N256_seed7.csv");
    }
}
