//! Verification suite over the shipped example specs.

use serde::Serialize;
use serde_json::{json, Value};

use crate::bulk::solve_t0;
use crate::catalog::shipped;
use crate::error::Result;
use crate::variational::{
    check_hciz, check_lemma_jn_problem, check_lemma_maximum_y_against, JnProblem, DEFAULT_GRID_RESOLUTION,
};

pub const DEFAULT_HCIZ_SAMPLES: usize = 1_000_000;
pub const HCIZ_TOL: f64 = 0.01;
pub const HCIZ_LOW_PRECISION: f64 = 0.05;
const EXACT_TOL: f64 = 1e-14;
const RATE_RATIO: f64 = 0.3;
const DIRECTION_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub hciz_samples: usize,
    /// Added to every `t0` the lemma checks expect (negative control).
    pub t0_offset: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, hciz_samples: DEFAULT_HCIZ_SAMPLES, t0_offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub hciz_samples: usize,
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

fn outcome(name: String, result: Result<(bool, Value)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: json!({ "error": e.to_string() }) },
    }
}

pub fn run_verification(opts: &VerifyOptions) -> VerifyReport {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    for example in shipped() {
        let name = &example.name;
        let spec = match example.validated() {
            Ok(s) => s,
            Err(e) => {
                checks.push(outcome(format!("spec/{name}"), Err(e)));
                continue;
            }
        };
        checks.push(outcome(format!("lemma_maximum_y/{name}"), (|| {
            let mut results = Vec::new();
            for z in example.grid_points(5) {
                let t0 = solve_t0(&spec, z)? + opts.t0_offset;
                results.push(check_lemma_maximum_y_against(&spec, z, t0)?);
            }
            let worst = results
                .iter()
                .map(|r| (r.argmax_found[0] - r.argmax_expected[0]).abs())
                .fold(0.0, f64::max);
            let passed = results.iter().all(|r| r.passed);
            Ok((passed, json!({ "points": results.len(), "worst_argmax_error": worst, "results": results })))
        })()));
        let problem = || {
            let t0 = solve_t0(&spec, example.z0)? + opts.t0_offset;
            JnProblem::new(&spec, example.z0, example.z0 + 1.0, t0)
        };
        checks.push(outcome(format!("lemma_jn/{name}"), (|| {
            let r = check_lemma_jn_problem(&problem()?, DEFAULT_GRID_RESOLUTION)?;
            Ok((r.passed, serde_json::to_value(&r)?))
        })()));
        checks.push(outcome(format!("lemma_jn_directions/{name}"), (|| {
            let p = problem()?;
            let (da, db) = (p.feasible_step(false, DIRECTION_STEP), p.feasible_step(true, DIRECTION_STEP));
            Ok((da < 0.0 && db < 0.0, json!({ "step": DIRECTION_STEP, "delta_a": da, "delta_b": db })))
        })()));
    }

    checks.push(outcome("hciz/n1".into(), (|| {
        let err = check_hciz(1, &[0.7], &[-1.3], 0.9, 1000, opts.seed)?;
        Ok((err < EXACT_TOL, json!({ "relative_error": err, "tolerance": EXACT_TOL })))
    })()));
    checks.push(outcome("hciz/n2_l0".into(), (|| {
        let err = check_hciz(2, &[0.0, 1.0], &[0.0, 1.0], 0.0, 1000, opts.seed)?;
        Ok((err < EXACT_TOL, json!({ "relative_error": err, "tolerance": EXACT_TOL })))
    })()));
    checks.push(outcome("hciz/n2".into(), (|| {
        let err = check_hciz(2, &[0.0, 1.0], &[0.0, 1.0], 1.0, opts.hciz_samples, opts.seed)?;
        if err > HCIZ_LOW_PRECISION {
            warnings.push(format!("low precision: HCIZ relative error {err:.3e} with {} samples", opts.hciz_samples));
        }
        Ok((err < HCIZ_TOL, json!({ "relative_error": err, "tolerance": HCIZ_TOL, "samples": opts.hciz_samples })))
    })()));
    if opts.hciz_samples >= 100 {
        checks.push(outcome("hciz/rate".into(), (|| {
            let mut ratios = Vec::new();
            for k in 0..3u64 {
                let seed = opts.seed.wrapping_add(k);
                let fine = check_hciz(2, &[0.0, 1.0], &[0.0, 1.0], 1.0, opts.hciz_samples, seed)?;
                let coarse = check_hciz(2, &[0.0, 1.0], &[0.0, 1.0], 1.0, opts.hciz_samples / 100, seed)?;
                ratios.push(fine / coarse);
            }
            let wins = ratios.iter().filter(|r| **r < RATE_RATIO).count();
            Ok((wins >= 2, json!({ "ratios": ratios, "threshold": RATE_RATIO, "sample_ratio": 100 })))
        })()));
    }

    let all_passed = checks.iter().all(|c| c.passed);
    VerifyReport { seed: opts.seed, hciz_samples: opts.hciz_samples, checks, warnings, all_passed }
}
