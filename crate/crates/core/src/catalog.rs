//! Example deformations shipped with the crate, each with a reference bulk
//! point and a rectangle inside the support used for grid sweeps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{DeformationSpec, ValidatedSpec, Window};

const SOURCES: [&str; 3] = [
    include_str!("../specs/pure_ginibre.json"),
    include_str!("../specs/two_atom.json"),
    include_str!("../specs/three_atom.json"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub name: String,
    pub spec: DeformationSpec,
    #[serde(with = "crate::serde_complex")]
    pub z0: Complex64,
    pub grid: Window,
}

impl ExampleSpec {
    pub fn validated(&self) -> Result<ValidatedSpec> {
        self.spec.clone().validate()
    }

    /// `k x k` lattice spanning `grid`, row by row from the bottom left.
    pub fn grid_points(&self, k: usize) -> Vec<Complex64> {
        let g = self.grid;
        let step = |lo: f64, hi: f64, i: usize| if k > 1 { lo + (hi - lo) * i as f64 / (k - 1) as f64 } else { 0.5 * (lo + hi) };
        (0..k)
            .flat_map(|j| (0..k).map(move |i| Complex64::new(step(g.x_min, g.x_max, i), step(g.y_min, g.y_max, j))))
            .collect()
    }
}

pub fn shipped() -> Vec<ExampleSpec> {
    SOURCES.iter().map(|s| serde_json::from_str(s).expect("shipped spec parses")).collect()
}

pub fn by_name(name: &str) -> Option<ExampleSpec> {
    shipped().into_iter().find(|e| e.name == name)
}
