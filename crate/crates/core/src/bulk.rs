//! Bulk fixed point `t0` and the local rescaling constants.
//!
//! At a bulk point `z0` (where `P00(z0) > 1/tau`), `t0` is the unique
//! positive root of
//!
//! ```text
//! g(t) = sum_a tau c_a / (f_a + t) - 1,    f_a = |a - z0|^2.
//! ```
//!
//! `g` is strictly decreasing with `g(0) = tau P00 - 1 > 0` and
//! `g(tau) <= 0`, so `[0, tau]` always brackets it. From `t0`:
//!
//! ```text
//! P0 = sum_a c_a (a - z0) / (f_a + t0)^2
//! P1 = sum_a c_a / (f_a + t0)^2
//! sigma^2 = t0 P1 + |P0|^2 / P1
//! ```
//!
//! and the mean eigenvalue density at `z0` is `N sigma^2 / pi` per unit area.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{classify_point, squared_distances, ValidatedSpec};
use crate::numeric::{pairwise_sum, pairwise_sum_complex};

const BRACKET_WIDTH: f64 = 1e-15;
const NEWTON_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkParameters {
    #[serde(with = "crate::serde_complex")]
    pub z0: Complex64,
    pub t0: f64,
    #[serde(with = "crate::serde_complex")]
    pub p0: Complex64,
    pub p1: f64,
    pub sigma_sq: f64,
    pub predicted_density: f64,
}

/// `g(t) = sum tau c_a / (f_a + t) - 1` and its derivative.
fn fixed_point_fn(tau: f64, weights: &[f64], f: &[f64], t: f64) -> (f64, f64) {
    let vals: Vec<f64> = weights.iter().zip(f).map(|(c, f)| tau * c / (f + t)).collect();
    let ders: Vec<f64> = weights.iter().zip(f).map(|(c, f)| -tau * c / ((f + t) * (f + t))).collect();
    (pairwise_sum(&vals) - 1.0, pairwise_sum(&ders))
}

/// Residual `sum tau c_a / (f_a + t) - 1` of the fixed-point equation.
pub fn fixed_point_residual(spec: &ValidatedSpec, z0: Complex64, t: f64) -> Result<f64> {
    let f = squared_distances(spec, z0)?;
    let weights: Vec<f64> = spec.atoms.iter().map(|a| a.weight).collect();
    Ok(fixed_point_fn(spec.tau, &weights, &f, t).0)
}

/// Bisection on `[0, tau]` down to a bracket of width 1e-15, then a few
/// Newton steps that are kept only when they reduce the residual.
pub fn solve_t0(spec: &ValidatedSpec, z0: Complex64) -> Result<f64> {
    classify_point(spec, z0)?.require_bulk()?;
    let f = squared_distances(spec, z0)?;
    let weights: Vec<f64> = spec.atoms.iter().map(|a| a.weight).collect();
    let g = |t: f64| fixed_point_fn(spec.tau, &weights, &f, t);

    let (mut lo, mut hi) = (0.0, spec.tau);
    while hi - lo > BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (gm, _) = g(mid);
        if gm > 0.0 {
            lo = mid;
        } else if gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut best = g(t).0.abs();
    for _ in 0..NEWTON_STEPS {
        let (gv, dg) = g(t);
        if gv == 0.0 || dg == 0.0 {
            break;
        }
        let candidate = t - gv / dg;
        if !(candidate > 0.0) {
            break;
        }
        let r = g(candidate).0.abs();
        if r < best {
            best = r;
            t = candidate;
        } else {
            break;
        }
    }
    Ok(t)
}

/// Rescaling constants at `z0` for a given fixed point `t0`.
pub fn bulk_parameters_with_t0(spec: &ValidatedSpec, z0: Complex64, t0: f64) -> Result<BulkParameters> {
    let f = squared_distances(spec, z0)?;
    let p1_terms: Vec<f64> = spec
        .atoms
        .iter()
        .zip(&f)
        .map(|(a, f)| a.weight / ((f + t0) * (f + t0)))
        .collect();
    let p0_terms: Vec<Complex64> = spec
        .atoms
        .iter()
        .zip(&f)
        .map(|(a, f)| (a.position - z0) * (a.weight / ((f + t0) * (f + t0))))
        .collect();
    let p1 = pairwise_sum(&p1_terms);
    let p0 = pairwise_sum_complex(&p0_terms);
    let sigma_sq = t0 * p1 + p0.norm_sqr() / p1;
    Ok(BulkParameters {
        z0,
        t0,
        p0,
        p1,
        sigma_sq,
        predicted_density: sigma_sq / std::f64::consts::PI,
    })
}

pub fn bulk_parameters(spec: &ValidatedSpec, z0: Complex64) -> Result<BulkParameters> {
    let t0 = solve_t0(spec, z0)?;
    bulk_parameters_with_t0(spec, z0, t0)
}

/// `sqrt(N sigma^2)`: maps `z` to `zhat = sqrt(N sigma^2) (z - z0)`.
pub fn rescale_factor(bp: &BulkParameters, n: usize) -> f64 {
    (n as f64 * bp.sigma_sq).sqrt()
}
