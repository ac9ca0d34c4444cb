//! The Ginibre bulk kernel
//!
//! ```text
//! K(z, w) = exp(-|z|^2/2 - |w|^2/2 + z conj(w)) / pi
//! ```
//!
//! and the n-point correlations `det[K(z_i, z_j)]` it generates.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};
use num_complex::Complex64;

/// Determinants in `[-CLAMP_BAND, 0]` are rounding noise of a PSD Gram
/// determinant and are reported as zero.
pub const CLAMP_BAND: f64 = 1e-12;

/// Exponent assembled first, then a single `exp`.
pub fn ginibre_kernel(z: Complex64, w: Complex64) -> Complex64 {
    let exponent = -0.5 * z.norm_sqr() - 0.5 * w.norm_sqr() + z * w.conj();
    exponent.exp() / PI
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelPrediction {
    pub points: Vec<Complex64>,
    /// Row-major `n x n` kernel matrix.
    pub kernel_matrix: Vec<Complex64>,
    pub correlation: f64,
}

impl KernelPrediction {
    pub fn new(points: &[Complex64]) -> Self {
        let kernel_matrix = kernel_matrix(points);
        let correlation = clamp(determinant(points.len(), kernel_matrix.clone()).re);
        KernelPrediction { points: points.to_vec(), kernel_matrix, correlation }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.kernel_matrix[i * self.n() + j]
    }

    /// Smallest eigenvalue of the (Hermitian) kernel matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.n();
        let m = Mat::from_fn(n, n, |i, j| c64::new(self.entry(i, j).re, self.entry(i, j).im));
        m.self_adjoint_eigenvalues(Side::Lower)
            .map(|ev| ev.into_iter().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN)
    }

    /// Largest `|K_ij - conj(K_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }
}

fn kernel_matrix(points: &[Complex64]) -> Vec<Complex64> {
    points
        .iter()
        .flat_map(|&z| points.iter().map(move |&w| ginibre_kernel(z, w)))
        .collect()
}

fn clamp(det: f64) -> f64 {
    if (-CLAMP_BAND..0.0).contains(&det) {
        0.0
    } else {
        det
    }
}

/// Determinant by LU with partial pivoting on a row-major matrix.
pub(crate) fn determinant(n: usize, mut a: Vec<Complex64>) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
            .unwrap();
        if a[pivot * n + k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != k {
            for j in 0..n {
                a.swap(k * n + j, pivot * n + j);
            }
            det = -det;
        }
        let p = a[k * n + k];
        det *= p;
        for i in k + 1..n {
            let factor = a[i * n + k] / p;
            for j in k + 1..n {
                let v = a[k * n + j];
                a[i * n + j] -= factor * v;
            }
        }
    }
    det
}

/// `det[K(z_i, z_j)]_{i,j=1..n}`, clamped at zero within rounding.
pub fn npoint_correlation(points: &[Complex64]) -> f64 {
    KernelPrediction::new(points).correlation
}

/// Normalized two-point function `g(r) = 1 - exp(-r^2)`.
pub fn predicted_pair_correlation(r: f64) -> f64 {
    -(-r * r).exp_m1()
}
