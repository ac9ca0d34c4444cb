//! The deformed ensemble's mean-matrix structure and the geometry of its
//! limit spectrum.
//!
//! The mean matrix is `X0 = diag(A0, 0)` with
//! `A0 = diag(a_1 I_{r_1}, .., a_t I_{r_t}, z0 I_{r0}, A_{t+1})`. The block
//! `A_{t+1}` is only required to be normal; since both the Gaussian weight
//! `Tr (X - X0)(X - X0)*` and the spectrum are invariant under a common
//! unitary conjugation, it is stored as its diagonal of eigenvalues.
//!
//! The limit support is `{z : P00(z) >= 1/tau}` with
//! `P00(z) = sum_a c_a / |a - z|^2`.

mod boundary;

pub use boundary::{trace_boundary, BoundaryCurve, Polyline, Window};

use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, NotBulkKind, Result};
use crate::numeric::pairwise_sum;

/// Absolute band around `P00 = 1/tau` classified as the edge.
pub const EDGE_EPS: f64 = 1e-9;

/// Tolerance on `sum c_a = 1`. Weights are never renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One atom `(a, c)` of the limiting measure of the mean spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AtomRepr", into = "AtomRepr")]
pub struct Atom {
    pub position: Complex64,
    pub weight: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    re: f64,
    im: f64,
    c: f64,
}

impl From<AtomRepr> for Atom {
    fn from(r: AtomRepr) -> Self {
        Atom { position: Complex64::new(r.re, r.im), weight: r.c }
    }
}

impl From<Atom> for AtomRepr {
    fn from(a: Atom) -> Self {
        AtomRepr { re: a.position.re, im: a.position.im, c: a.weight }
    }
}

impl Atom {
    pub fn new(re: f64, im: f64, weight: f64) -> Self {
        Atom { position: Complex64::new(re, im), weight }
    }
}

/// All inputs of the ensemble: time parameter, atoms, and the finite
/// (N-independent) blocks of the mean matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationSpec {
    pub tau: f64,
    pub atoms: Vec<Atom>,
    /// Multiplicity of the `z0` block.
    #[serde(default)]
    pub r0: usize,
    /// Eigenvalues of the normal block `A_{t+1}`.
    #[serde(default, with = "crate::serde_complex::vec")]
    pub finite_block: Vec<Complex64>,
    /// Number of trailing zeros in the mean matrix.
    #[serde(rename = "R0")]
    pub zero_padding: usize,
}

impl DeformationSpec {
    /// Pure Ginibre: a single atom at the origin.
    pub fn pure_ginibre(tau: f64, zero_padding: usize) -> Self {
        DeformationSpec {
            tau,
            atoms: vec![Atom::new(0.0, 0.0, 1.0)],
            r0: 0,
            finite_block: Vec::new(),
            zero_padding,
        }
    }

    pub fn validate(self) -> Result<ValidatedSpec> {
        validate_spec(self)
    }
}

/// A [`DeformationSpec`] whose invariants have been checked.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedSpec(DeformationSpec);

impl Deref for ValidatedSpec {
    type Target = DeformationSpec;
    fn deref(&self) -> &DeformationSpec {
        &self.0
    }
}

impl ValidatedSpec {
    pub fn into_inner(self) -> DeformationSpec {
        self.0
    }
}

pub fn validate_spec(spec: DeformationSpec) -> Result<ValidatedSpec> {
    if !(spec.tau > 0.0) || !spec.tau.is_finite() {
        return Err(Error::NonpositiveParam { name: "tau", value: spec.tau });
    }
    if spec.atoms.is_empty() {
        return Err(Error::WeightSum { sum: 0.0 });
    }
    for atom in &spec.atoms {
        if !(atom.weight > 0.0) || !atom.weight.is_finite() {
            return Err(Error::NonpositiveParam { name: "c", value: atom.weight });
        }
        if !atom.position.re.is_finite() || !atom.position.im.is_finite() {
            return Err(Error::Config("atom position must be finite".into()));
        }
    }
    for (i, a) in spec.atoms.iter().enumerate() {
        for (j, b) in spec.atoms.iter().enumerate().skip(i + 1) {
            if a.position == b.position {
                return Err(Error::DuplicateAtom { first: i, second: j });
            }
        }
    }
    let weights: Vec<f64> = spec.atoms.iter().map(|a| a.weight).collect();
    let sum = pairwise_sum(&weights);
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum { sum });
    }
    Ok(ValidatedSpec(spec))
}

/// Squared distances `f_a = |a - z0|^2`, rejecting a collision with an atom.
pub(crate) fn squared_distances(spec: &DeformationSpec, z0: Complex64) -> Result<Vec<f64>> {
    spec.atoms
        .iter()
        .map(|a| {
            let f = (a.position - z0).norm_sqr();
            if f == 0.0 {
                Err(Error::AtomCollision { re: z0.re, im: z0.im })
            } else {
                Ok(f)
            }
        })
        .collect()
}

/// `P00(z0) = sum_a c_a / |a - z0|^2`.
pub fn p00(spec: &ValidatedSpec, z0: Complex64) -> Result<f64> {
    let f = squared_distances(spec, z0)?;
    let terms: Vec<f64> = spec.atoms.iter().zip(&f).map(|(a, f)| a.weight / f).collect();
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointTag {
    Bulk,
    Edge,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointClass {
    pub tag: PointTag,
    pub p00: f64,
}

impl PointClass {
    /// `Ok(())` for bulk points, otherwise the matching `NotBulk` error.
    pub fn require_bulk(&self) -> Result<()> {
        match self.tag {
            PointTag::Bulk => Ok(()),
            PointTag::Edge => Err(Error::NotBulk(NotBulkKind::Edge)),
            PointTag::Exterior => Err(Error::NotBulk(NotBulkKind::Exterior)),
        }
    }
}

pub fn classify_point(spec: &ValidatedSpec, z0: Complex64) -> Result<PointClass> {
    let p = p00(spec, z0)?;
    let level = 1.0 / spec.tau;
    let tag = if (p - level).abs() <= EDGE_EPS {
        PointTag::Edge
    } else if p > level {
        PointTag::Bulk
    } else {
        PointTag::Exterior
    };
    Ok(PointClass { tag, p00: p })
}

/// Diagonal of the mean matrix `X0` together with the atom multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrix {
    pub diagonal: Vec<Complex64>,
    /// `r_a` for each atom, in atom order.
    pub multiplicities: Vec<usize>,
}

impl MeanMatrix {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }
}

/// Splits `m` slots among atoms: `floor(c_a m)` each, then the remainder one
/// by one in decreasing order of fractional part (ties by atom index).
pub fn atom_multiplicities(weights: &[f64], m: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut fractions: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    for (i, &c) in weights.iter().enumerate() {
        let exact = c * m as f64;
        let base = exact.floor();
        counts.push(base as usize);
        fractions.push((i, exact - base));
    }
    let assigned: usize = counts.iter().sum();
    // Floating error can push the floor sum one past m when weights sum to 1 - eps.
    let remainder = m.saturating_sub(assigned);
    fractions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in fractions.iter().cycle().take(remainder) {
        counts[i] += 1;
    }
    let mut over = counts.iter().sum::<usize>().saturating_sub(m);
    for &(i, _) in fractions.iter().rev() {
        if over == 0 {
            break;
        }
        if counts[i] > 0 {
            counts[i] -= 1;
            over -= 1;
        }
    }
    counts
}

/// Builds the diagonal of `X0` for dimension `n`: atom blocks, then `r0`
/// copies of `z0`, then the finite block, then `R0` zeros.
pub fn build_mean_matrix(spec: &ValidatedSpec, n: usize, z0: Complex64) -> Result<MeanMatrix> {
    let fixed = spec.r0 + spec.finite_block.len() + spec.zero_padding;
    let needed = fixed + spec.atoms.len();
    if n < needed {
        return Err(Error::Dimension(format!(
            "N = {n} is too small: need at least {needed} (r0 + r_(t+1) + R0 + t)"
        )));
    }
    let weights: Vec<f64> = spec.atoms.iter().map(|a| a.weight).collect();
    let multiplicities = atom_multiplicities(&weights, n - fixed);
    let mut diagonal = Vec::with_capacity(n);
    for (atom, &r) in spec.atoms.iter().zip(&multiplicities) {
        diagonal.extend(std::iter::repeat_n(atom.position, r));
    }
    diagonal.extend(std::iter::repeat_n(z0, spec.r0));
    diagonal.extend_from_slice(&spec.finite_block);
    diagonal.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), spec.zero_padding));
    debug_assert_eq!(diagonal.len(), n);
    Ok(MeanMatrix { diagonal, multiplicities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_atoms(tau: f64) -> ValidatedSpec {
        DeformationSpec {
            tau,
            atoms: vec![Atom::new(1.0, 0.0, 0.5), Atom::new(-1.0, 0.0, 0.5)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 4,
        }
        .validate()
        .unwrap()
    }

    fn ginibre(tau: f64) -> ValidatedSpec {
        DeformationSpec::pure_ginibre(tau, 8).validate().unwrap()
    }

    #[test]
    fn validation_accepts_and_rejects() {
        assert!(DeformationSpec::pure_ginibre(1.0, 8).validate().is_ok());
        two_atoms(1.0);
        let bad = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(0.0, 0.0, 0.6), Atom::new(1.0, 0.0, 0.6)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 0,
        };
        assert!(matches!(bad.validate(), Err(Error::WeightSum { .. })));
        let dup = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(1.0, 0.0, 0.5), Atom::new(1.0, 0.0, 0.5)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 0,
        };
        assert!(matches!(dup.validate(), Err(Error::DuplicateAtom { .. })));
        let neg_tau = DeformationSpec { tau: 0.0, ..DeformationSpec::pure_ginibre(1.0, 0) };
        assert!(matches!(neg_tau.validate(), Err(Error::NonpositiveParam { name: "tau", .. })));
        let neg_c = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(0.0, 0.0, 1.5), Atom::new(1.0, 0.0, -0.5)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 0,
        };
        assert!(matches!(neg_c.validate(), Err(Error::NonpositiveParam { name: "c", .. })));
    }

    #[test]
    fn weights_are_not_renormalized() {
        let spec = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(0.0, 0.0, 0.5), Atom::new(1.0, 0.0, 0.5 + 5e-13)],
            r0: 0,
            finite_block: vec![],
            zero_padding: 0,
        };
        let v = spec.clone().validate().unwrap();
        assert_eq!(v.atoms[1].weight, 0.5 + 5e-13);
        assert_eq!(*v, spec);
    }

    #[test]
    fn spec_json_layout() {
        let json = r#"{"tau":2.0,"atoms":[{"re":1.0,"im":0.0,"c":0.5},{"re":-1.0,"im":0.0,"c":0.5}],
                       "r0":1,"finite_block":[{"re":0.0,"im":3.0}],"R0":4}"#;
        let spec: DeformationSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.zero_padding, 4);
        assert_eq!(spec.finite_block, vec![Complex64::new(0.0, 3.0)]);
        let back = serde_json::to_value(&spec).unwrap();
        assert_eq!(back["R0"], 4);
        assert_eq!(back["atoms"][1]["re"], -1.0);
        assert_eq!(back["atoms"][1]["c"], 0.5);
    }

    #[test]
    fn p00_examples() {
        let g = ginibre(1.0);
        assert_eq!(p00(&g, Complex64::new(2.0, 0.0)).unwrap(), 0.25);
        assert_eq!(p00(&two_atoms(1.0), Complex64::new(0.0, 0.0)).unwrap(), 1.0);
        assert!(matches!(p00(&g, Complex64::new(0.0, 0.0)), Err(Error::AtomCollision { .. })));
    }

    #[test]
    fn classification_of_pure_ginibre() {
        let g = ginibre(1.0);
        let c = classify_point(&g, Complex64::new(0.5, 0.0)).unwrap();
        assert_eq!(c.tag, PointTag::Bulk);
        assert_eq!(c.p00, 4.0);
        assert_eq!(classify_point(&g, Complex64::new(1.0, 0.0)).unwrap().tag, PointTag::Edge);
        let c = classify_point(&g, Complex64::new(2.0, 0.0)).unwrap();
        assert_eq!(c.tag, PointTag::Exterior);
        assert_eq!(c.p00, 0.25);
        assert!(matches!(c.require_bulk(), Err(Error::NotBulk(NotBulkKind::Exterior))));
    }

    #[test]
    fn circular_law_geometry_on_grid() {
        for tau in [0.5, 1.0, 4.0] {
            let g = ginibre(tau);
            let delta = 1e-3;
            for i in -20..=20 {
                for j in -20..=20 {
                    let z = Complex64::new(i as f64 * 0.13, j as f64 * 0.11);
                    if z.norm() == 0.0 || (z.norm() - tau.sqrt()).abs() < delta {
                        continue;
                    }
                    let bulk = classify_point(&g, z).unwrap().tag == PointTag::Bulk;
                    assert_eq!(bulk, z.norm() < tau.sqrt() - delta, "tau={tau} z={z}");
                }
            }
        }
    }

    #[test]
    fn p00_positive_and_decays_on_rays() {
        let spec = DeformationSpec {
            tau: 1.0,
            atoms: vec![
                Atom::new(0.0, 0.0, 0.5),
                Atom::new(1.5, 0.5, 0.3),
                Atom::new(-1.0, 1.0, 0.2),
            ],
            r0: 0,
            finite_block: vec![],
            zero_padding: 2,
        }
        .validate()
        .unwrap();
        for k in 0..8 {
            let dir = Complex64::from_polar(1.0, k as f64 * 0.7 + 0.1);
            let mut prev = f64::INFINITY;
            for r in [10.0, 100.0, 1000.0, 1e4] {
                let p = p00(&spec, dir * r).unwrap();
                assert!(p > 0.0 && p < prev);
                prev = p;
            }
            assert!(prev < 1e-7);
        }
    }

    #[test]
    fn mean_matrix_examples() {
        let g = ginibre(1.0);
        let m = build_mean_matrix(&g, 16, Complex64::new(0.3, 0.0)).unwrap();
        assert_eq!(m.dim(), 16);
        assert_eq!(m.multiplicities, vec![8]);
        assert!(m.diagonal.iter().all(|z| *z == Complex64::new(0.0, 0.0)));

        let s = two_atoms(1.0);
        let m = build_mean_matrix(&s, 100, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(m.multiplicities, vec![48, 48]);
        let ones = m.diagonal.iter().filter(|z| z.re == 1.0).count();
        let minus = m.diagonal.iter().filter(|z| z.re == -1.0).count();
        let zeros = m.diagonal.iter().filter(|z| z.re == 0.0).count();
        assert_eq!((ones, minus, zeros), (48, 48, 4));

        let big_fixed = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(1.0, 0.0, 1.0)],
            r0: 2,
            finite_block: vec![Complex64::new(5.0, 0.0); 2],
            zero_padding: 4,
        }
        .validate()
        .unwrap();
        assert!(matches!(
            build_mean_matrix(&big_fixed, 3, Complex64::new(0.0, 0.0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn mean_matrix_block_order_and_trace() {
        let spec = DeformationSpec {
            tau: 1.0,
            atoms: vec![Atom::new(1.0, 1.0, 0.25), Atom::new(-2.0, 0.0, 0.75)],
            r0: 2,
            finite_block: vec![Complex64::new(0.0, 3.0)],
            zero_padding: 3,
        }
        .validate()
        .unwrap();
        let z0 = Complex64::new(0.1, -0.2);
        let m = build_mean_matrix(&spec, 30, z0).unwrap();
        // 24 atom slots: 6 and 18.
        assert_eq!(m.multiplicities, vec![6, 18]);
        assert_eq!(m.diagonal[23], Complex64::new(-2.0, 0.0));
        assert_eq!(&m.diagonal[24..26], &[z0, z0]);
        assert_eq!(m.diagonal[26], Complex64::new(0.0, 3.0));
        let trace: Complex64 = m.diagonal.iter().sum();
        let expected = Complex64::new(1.0, 1.0) * 6.0 + Complex64::new(-2.0, 0.0) * 18.0
            + z0 * 2.0
            + Complex64::new(0.0, 3.0);
        assert!((trace - expected).norm() < 1e-12);
    }

    #[test]
    fn rounding_ties_go_to_lower_index() {
        assert_eq!(atom_multiplicities(&[0.5, 0.5], 7), vec![4, 3]);
        assert_eq!(atom_multiplicities(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(atom_multiplicities(&[0.1, 0.2, 0.7], 9), vec![1, 2, 6]);
    }

    proptest! {
        #[test]
        fn multiplicities_sum_and_residual(raw in proptest::collection::vec(0.01f64..1.0, 1..7), m in 0usize..5000) {
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let counts = atom_multiplicities(&weights, m);
            prop_assert_eq!(counts.iter().sum::<usize>(), m);
            for (c, w) in counts.iter().zip(&weights) {
                prop_assert!((*c as f64 - w * m as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}
