//! Numerical checks of the two maximum lemmas (scalar restriction `n = 1`)
//! and of the HCIZ integral for `n <= 2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bulk::solve_t0;
use crate::error::{Error, Result};
use crate::lab::haar_unitary_with_rng;
use crate::model::{classify_point, squared_distances, ValidatedSpec};
use crate::numeric::{golden_section_max, pairwise_sum};
use crate::rng::TrialRng;

pub const ARGMAX_TOL: f64 = 1e-6;
pub const VALUE_TOL: f64 = 1e-6;
pub const GAP_FLOOR: f64 = -1e-12;
pub const DEFAULT_GRID_RESOLUTION: f64 = 0.05;
const SEARCH_TOL: f64 = 1e-10;
const STRICT_STEP: f64 = 0.1;
const MAX_SWEEPS: usize = 400;
const HCIZ_SHARD: usize = 4096;
const HCIZ_STREAM: u64 = 0x4843_495a;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCheckResult {
    pub argmax_found: Vec<f64>,
    pub argmax_expected: Vec<f64>,
    /// Objective at the expected maximizer minus objective at the found one.
    pub max_gap: f64,
    pub tolerance: f64,
    pub value_found: f64,
    pub value_expected: f64,
    pub passed: bool,
}

fn argmax_agrees(found: &[f64], expected: &[f64], tol: f64) -> bool {
    found.len() == expected.len() && found.iter().zip(expected).all(|(a, b)| (a - b).abs() < tol)
}

/// `phi(h) = sum c_a log(f_a + h) - h / tau`.
fn phi(tau: f64, weights: &[f64], f: &[f64], h: f64) -> f64 {
    let terms: Vec<f64> = weights.iter().zip(f).map(|(c, f)| c * (f + h).ln()).collect();
    pairwise_sum(&terms) - h / tau
}

pub fn check_lemma_maximum_y(spec: &ValidatedSpec, z0: Complex64) -> Result<MaxCheckResult> {
    let t0 = solve_t0(spec, z0)?;
    check_lemma_maximum_y_against(spec, z0, t0)
}

/// Same check with the expected maximizer supplied by the caller.
pub fn check_lemma_maximum_y_against(spec: &ValidatedSpec, z0: Complex64, t0: f64) -> Result<MaxCheckResult> {
    classify_point(spec, z0)?.require_bulk()?;
    let f = squared_distances(spec, z0)?;
    let weights: Vec<f64> = spec.atoms.iter().map(|a| a.weight).collect();
    let objective = |h: f64| phi(spec.tau, &weights, &f, h);
    let (found, value_found) = golden_section_max(objective, 0.0, 10.0 * spec.tau, SEARCH_TOL);
    let value_expected = objective(t0);
    let max_gap = value_expected - value_found;
    let strict = [t0 - STRICT_STEP, t0 + STRICT_STEP]
        .into_iter()
        .filter(|&h| h >= 0.0)
        .all(|h| objective(h) < value_expected);
    let passed = (found - t0).abs() < ARGMAX_TOL && max_gap >= GAP_FLOOR && strict;
    Ok(MaxCheckResult {
        argmax_found: vec![found],
        argmax_expected: vec![t0],
        max_gap,
        tolerance: ARGMAX_TOL,
        value_found,
        value_expected,
        passed,
    })
}

/// Scalar form of the second lemma. Variables are `x = (T_1, .., T_t, |A|, |B|)`,
/// all nonnegative, with `|x|^2 <= 1`.
#[derive(Debug, Clone)]
pub struct JnProblem {
    pub tau: f64,
    pub weights: Vec<f64>,
    pub f: Vec<f64>,
    pub z0: Complex64,
    pub d: Complex64,
    pub t0: f64,
}

impl JnProblem {
    pub fn new(spec: &ValidatedSpec, z0: Complex64, d: Complex64, t0: f64) -> Result<Self> {
        classify_point(spec, z0)?.require_bulk()?;
        if d == z0 {
            return Err(Error::Config("D must differ from z0".into()));
        }
        Ok(JnProblem {
            tau: spec.tau,
            weights: spec.atoms.iter().map(|a| a.weight).collect(),
            f: squared_distances(spec, z0)?,
            z0,
            d,
            t0,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len() + 2
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let t = self.weights.len();
        let b = x[t + 1];
        let terms: Vec<f64> = (0..t)
            .map(|k| {
                let s = x[k] * x[k];
                self.tau * self.weights[k] * s.ln() - self.f[k] * s
            })
            .collect();
        let total: f64 = x.iter().map(|v| v * v).sum();
        pairwise_sum(&terms) + self.z0.norm_sqr() * total - b * b * (self.z0 - self.d).norm_sqr()
    }

    pub fn expected_maximizer(&self) -> Vec<f64> {
        let mut x: Vec<f64> =
            self.weights.iter().zip(&self.f).map(|(c, f)| (self.tau * c / (f + self.t0)).sqrt()).collect();
        x.extend([0.0, 0.0]);
        x
    }

    /// `sum tau c log(tau c / (f + t0)) + t0 + |z0|^2 - tau`.
    pub fn bound(&self) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.f)
            .map(|(c, f)| self.tau * c * (self.tau * c / (f + self.t0)).ln())
            .collect();
        pairwise_sum(&terms) + self.t0 + self.z0.norm_sqr() - self.tau
    }

    /// Change of the objective when `|A|` (or `|B|`) is raised to `h` from the
    /// expected maximizer, shrinking the `T`s to stay on the constraint.
    pub fn feasible_step(&self, which_b: bool, h: f64) -> f64 {
        let x0 = self.expected_maximizer();
        let t = self.weights.len();
        let mut x: Vec<f64> = x0.iter().map(|v| v * (1.0 - h * h).sqrt()).collect();
        x[if which_b { t + 1 } else { t }] = h;
        self.objective(&x) - self.objective(&x0)
    }
}

fn from_spherical(r: f64, angles: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(angles.len() + 1);
    let mut carry = r;
    for &theta in angles {
        x.push(carry * theta.cos());
        carry *= theta.sin();
    }
    x.push(carry);
    x
}

fn to_spherical(x: &[f64]) -> (f64, Vec<f64>) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut angles = Vec::with_capacity(x.len() - 1);
    for k in 0..x.len() - 1 {
        let tail = x[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        angles.push(tail.atan2(x[k]));
    }
    (r, angles)
}

/// Best point of the lattice `res * Z^d` inside the quarter ball, with
/// strictly positive `T`s.
fn coarse_grid_max(problem: &JnProblem, res: f64) -> (Vec<f64>, f64) {
    let steps = (1.0 / res).floor() as usize;
    let t = problem.weights.len();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut x = vec![0.0; problem.dim()];
    #[allow(clippy::too_many_arguments)]
    fn walk(k: usize, used: f64, x: &mut Vec<f64>, t: usize, res: f64, steps: usize, p: &JnProblem, best: &mut (Vec<f64>, f64)) {
        if k == x.len() {
            let v = p.objective(x);
            if v > best.1 {
                *best = (x.clone(), v);
            }
            return;
        }
        let start = usize::from(k < t);
        for i in start..=steps {
            let xi = i as f64 * res;
            if used + xi * xi > 1.0 + 1e-12 {
                break;
            }
            x[k] = xi;
            walk(k + 1, used + xi * xi, x, t, res, steps, p, best);
        }
        x[k] = 0.0;
    }
    walk(0, 0.0, &mut x, t, res, steps, problem, &mut best);
    best
}

/// Coordinate-wise golden-section ascent in spherical coordinates, so the
/// constraint becomes the box `r in [0, 1]`, angles in `[0, pi/2]`.
fn refine(problem: &JnProblem, start: &[f64]) -> (Vec<f64>, f64) {
    let (mut r, mut angles) = to_spherical(start);
    let mut value = problem.objective(start);
    let half_pi = std::f64::consts::FRAC_PI_2;
    for _ in 0..MAX_SWEEPS {
        let before = value;
        let (best_r, v) = golden_section_max(|s| problem.objective(&from_spherical(s, &angles)), 0.0, 1.0, SEARCH_TOL);
        if v >= value {
            r = best_r;
            value = v;
        }
        for k in 0..angles.len() {
            let (best, v) = golden_section_max(
                |theta| {
                    let mut trial = angles.clone();
                    trial[k] = theta;
                    problem.objective(&from_spherical(r, &trial))
                },
                0.0,
                half_pi,
                SEARCH_TOL,
            );
            if v >= value {
                angles[k] = best;
                value = v;
            }
        }
        if value - before <= 1e-15 * (1.0 + value.abs()) {
            break;
        }
    }
    (from_spherical(r, &angles), value)
}

pub fn check_lemma_jn(spec: &ValidatedSpec, z0: Complex64, grid_resolution: f64) -> Result<MaxCheckResult> {
    let t0 = solve_t0(spec, z0)?;
    let problem = JnProblem::new(spec, z0, z0 + 1.0, t0)?;
    check_lemma_jn_problem(&problem, grid_resolution)
}

pub fn check_lemma_jn_problem(problem: &JnProblem, grid_resolution: f64) -> Result<MaxCheckResult> {
    if !(grid_resolution > 0.0 && grid_resolution <= 0.5) {
        return Err(Error::Config(format!("grid resolution {grid_resolution} outside (0, 0.5]")));
    }
    let expected = problem.expected_maximizer();
    let norm_sq: f64 = expected.iter().map(|v| v * v).sum();
    if !(norm_sq <= 1.0 + 1e-9) {
        return Err(Error::Infeasible(format!("expected maximizer has squared norm {norm_sq} > 1")));
    }
    let (coarse, _) = coarse_grid_max(problem, grid_resolution);
    let (found, value_found) = refine(problem, &coarse);
    let value_expected = problem.objective(&expected);
    let max_gap = value_expected - value_found;
    let bound = problem.bound();
    let passed = argmax_agrees(&found, &expected, grid_resolution)
        && max_gap >= GAP_FLOOR
        && (value_found - bound).abs() < VALUE_TOL;
    Ok(MaxCheckResult {
        argmax_found: found,
        argmax_expected: expected,
        max_gap,
        tolerance: grid_resolution,
        value_found,
        value_expected: bound,
        passed,
    })
}

fn check_hciz_inputs(n: usize, a: &[f64], b: &[f64]) -> Result<()> {
    if !(1..=2).contains(&n) || a.len() != n || b.len() != n {
        return Err(Error::Dimension(format!("HCIZ check needs n in {{1, 2}} and matching diagonals, got n={n}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Config("HCIZ diagonals must be finite".into()));
    }
    if n == 2 && ((a[0] - a[1]).abs() < 1e-8 || (b[0] - b[1]).abs() < 1e-8) {
        return Err(Error::DegenerateSpectrum("diagonal entries coincide within 1e-8".into()));
    }
    Ok(())
}

/// `l^{-n(n-1)/2} det[e^{l a_i b_j}] / (V(a) V(b))` for `n <= 2`.
pub fn hciz_closed_form(a: &[f64], b: &[f64], l: f64) -> Result<f64> {
    let n = a.len();
    check_hciz_inputs(n, a, b)?;
    if n == 1 {
        return Ok((l * a[0] * b[0]).exp());
    }
    // e^x - e^y over x - y, with x - y = l (a2 - a1)(b2 - b1).
    let y = l * (a[0] * b[1] + a[1] * b[0]);
    let gap = l * (a[1] - a[0]) * (b[1] - b[0]);
    let quotient = if gap == 0.0 { 1.0 } else { gap.exp_m1() / gap };
    Ok(y.exp() * quotient)
}

/// Average of `exp(l Tr(A U B U*))` over Haar unitaries. Samples are split
/// into fixed shards with their own streams, so the result does not depend
/// on the thread count.
pub fn hciz_monte_carlo(a: &[f64], b: &[f64], l: f64, samples: usize, seed: u64) -> Result<f64> {
    let n = a.len();
    check_hciz_inputs(n, a, b)?;
    if samples == 0 {
        return Err(Error::Config("HCIZ needs at least one sample".into()));
    }
    let shards = samples.div_ceil(HCIZ_SHARD);
    let partial: Vec<f64> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let count = HCIZ_SHARD.min(samples - shard * HCIZ_SHARD);
            let mut rng = TrialRng::new(seed ^ HCIZ_STREAM, shard as u64);
            let values: Vec<f64> = (0..count)
                .map(|_| {
                    let u = haar_unitary_with_rng(n, &mut rng);
                    let mut trace = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            trace += a[i] * b[j] * u[(i, j)].norm_sqr();
                        }
                    }
                    (l * trace).exp()
                })
                .collect();
            pairwise_sum(&values)
        })
        .collect();
    Ok(pairwise_sum(&partial) / samples as f64)
}

/// Relative error `|MC - closed form| / |closed form|`.
pub fn check_hciz(n: usize, a: &[f64], b: &[f64], l: f64, samples: usize, seed: u64) -> Result<f64> {
    check_hciz_inputs(n, a, b)?;
    let exact = hciz_closed_form(a, b, l)?;
    let mc = hciz_monte_carlo(a, b, l, samples, seed)?;
    Ok((mc - exact).abs() / exact.abs())
}
