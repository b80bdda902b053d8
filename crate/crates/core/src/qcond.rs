//! Bipartite density matrices, partial traces and conditioning on a
//! projective event of the second subsystem.
//!
//! Basis ordering is `|a⟩⊗|b⟩ ↦ a·d2 + b`. The conditional state of subsystem 1
//! given the event `P₂` is
//!
//! ```text
//! ρ₁/₂ = Tr₂((1⊗P₂) ρ (1⊗P₂)) / Tr((1⊗P₂) ρ)
//! ```
//!
//! which is also available in its one-sided form through
//! [`conditional_density_raw`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrix-entry tolerance for Hermiticity, idempotency and unit trace.
pub const TOL: f64 = 1e-12;
/// Conditioning events below this probability are rejected.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Largest supported total dimension.
pub const MAX_DIM: usize = 64;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteDims {
    pub d1: usize,
    pub d2: usize,
}

impl BipartiteDims {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidInput("subsystem dimensions must be >= 1".into()));
        }
        if d1 * d2 > MAX_DIM {
            return Err(Error::InvalidInput(format!("total dimension {} exceeds {MAX_DIM}", d1 * d2)));
        }
        Ok(BipartiteDims { d1, d2 })
    }

    pub fn total(&self) -> usize {
        self.d1 * self.d2
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.total() {
            return Err(Error::DimensionMismatch { expected: self.total(), found: dim });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `max |ρ − ρ†|` entrywise.
    pub hermitian_defect: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    /// `|Tr ρ − 1|`.
    pub trace_defect: f64,
}

impl ValidationReport {
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect <= TOL
    }

    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue >= -TOL
    }

    pub fn has_unit_trace(&self) -> bool {
        self.trace_defect <= TOL
    }

    pub fn is_valid(&self) -> bool {
        self.is_hermitian() && self.is_positive() && self.has_unit_trace()
    }
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Checks Hermiticity, positivity and unit trace of a square matrix.
/// Non-square input yields an invalid report with infinite defects.
pub fn validate(m: &CMatrix) -> ValidationReport {
    if !m.is_square() || m.nrows() == 0 || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return ValidationReport {
            hermitian_defect: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            trace_defect: f64::INFINITY,
        };
    }
    let min_eigenvalue = hermitian_part(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    ValidationReport {
        hermitian_defect: hermitian_defect(m),
        min_eigenvalue,
        trace_defect: (m.trace() - Complex64::new(1.0, 0.0)).norm(),
    }
}

/// `P = P†` and `‖P² − P‖_max < 1e−12`.
pub fn is_projector(p: &CMatrix) -> bool {
    p.is_square()
        && hermitian_defect(p) <= TOL
        && (p * p - p).iter().map(|z| z.norm()).fold(0.0, f64::max) < TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() > MAX_DIM {
            return Err(Error::InvalidInput(format!("dimension {} exceeds {MAX_DIM}", m.nrows())));
        }
        let report = validate(&m);
        if !report.is_valid() {
            return Err(Error::InvalidInput(format!(
                "not a density matrix (hermitian defect {:e}, min eigenvalue {:e}, trace defect {:e})",
                report.hermitian_defect, report.min_eigenvalue, report.trace_defect
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        Self::new(normalized_outer(psi)?)
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        Self::new(CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        Self::new(self.0.kronecker(&other.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Projector(CMatrix);

impl Projector {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !is_projector(&m) {
            return Err(Error::InvalidInput("matrix is not an orthogonal projector".into()));
        }
        Ok(Projector(m))
    }

    /// Rank-one projector onto the span of `psi`.
    pub fn rank_one(psi: &[Complex64]) -> Result<Self> {
        Self::new(normalized_outer(psi)?)
    }

    /// Projector onto computational basis state `|k⟩` of dimension `d`.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidInput(format!("basis index {k} out of range for dimension {d}")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Ok(Projector(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

fn normalized_outer(psi: &[Complex64]) -> Result<CMatrix> {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidInput("state vector must be nonzero and finite".into()));
    }
    let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
    Ok(&v * v.adjoint())
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

fn matrix_from_json(j: MatrixJson) -> Result<CMatrix> {
    let d = j.dim;
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidInput(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
    if !rows_ok(&j.re) || !rows_ok(&j.im) {
        return Err(Error::DimensionMismatch { expected: d, found: j.re.len() });
    }
    Ok(CMatrix::from_fn(d, d, |r, c| Complex64::new(j.re[r][c], j.im[r][c])))
}

fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    let d = m.nrows();
    MatrixJson {
        dim: d,
        re: (0..d).map(|r| (0..d).map(|c| m[(r, c)].re).collect()).collect(),
        im: (0..d).map(|r| (0..d).map(|c| m[(r, c)].im).collect()).collect(),
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        Self::new(matrix_from_json(j)?)
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(d: DensityMatrix) -> Self {
        matrix_to_json(&d.0)
    }
}

impl TryFrom<MatrixJson> for Projector {
    type Error = Error;
    fn try_from(j: MatrixJson) -> Result<Self> {
        Self::new(matrix_from_json(j)?)
    }
}

impl From<Projector> for MatrixJson {
    fn from(p: Projector) -> Self {
        matrix_to_json(&p.0)
    }
}

/// Reads a general complex matrix from the `{"dim","re","im"}` layout.
pub fn matrix_from_value(v: &serde_json::Value) -> Result<CMatrix> {
    let j: MatrixJson = serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    matrix_from_json(j)
}

pub fn matrix_to_value(m: &CMatrix) -> serde_json::Value {
    serde_json::to_value(matrix_to_json(m)).expect("plain numeric payload")
}

fn partial_trace_matrix(m: &CMatrix, dims: BipartiteDims, keep: Keep) -> CMatrix {
    let BipartiteDims { d1, d2 } = dims;
    match keep {
        Keep::First => CMatrix::from_fn(d1, d1, |a, ap| (0..d2).map(|b| m[(a * d2 + b, ap * d2 + b)]).sum()),
        Keep::Second => CMatrix::from_fn(d2, d2, |b, bp| (0..d1).map(|a| m[(a * d2 + b, a * d2 + bp)]).sum()),
    }
}

pub fn partial_trace(rho: &DensityMatrix, dims: BipartiteDims, keep: Keep) -> Result<DensityMatrix> {
    dims.check(rho.dim())?;
    Ok(DensityMatrix(partial_trace_matrix(&rho.0, dims, keep)))
}

fn lift_second(p: &Projector, dims: BipartiteDims) -> Result<CMatrix> {
    if p.dim() != dims.d2 {
        return Err(Error::DimensionMismatch { expected: dims.d2, found: p.dim() });
    }
    Ok(CMatrix::identity(dims.d1, dims.d1).kronecker(&p.0))
}

/// `Tr((1⊗P₂)ρ)`.
pub fn event_probability(rho: &DensityMatrix, p2: &Projector, dims: BipartiteDims) -> Result<f64> {
    dims.check(rho.dim())?;
    let lifted = lift_second(p2, dims)?;
    Ok((&lifted * &rho.0).trace().re)
}

fn checked_probability(rho: &DensityMatrix, p2: &Projector, dims: BipartiteDims) -> Result<(CMatrix, f64)> {
    let probability = event_probability(rho, p2, dims)?;
    if !(probability >= PROBABILITY_FLOOR) {
        return Err(Error::ZeroProbability { probability });
    }
    Ok((lift_second(p2, dims)?, probability))
}

/// Conditional state of subsystem 1 given `P₂`, via the symmetric sandwich.
pub fn conditional_density(rho: &DensityMatrix, p2: &Projector, dims: BipartiteDims) -> Result<DensityMatrix> {
    let (lifted, probability) = checked_probability(rho, p2, dims)?;
    let sandwich = &lifted * &rho.0 * &lifted;
    let reduced = partial_trace_matrix(&sandwich, dims, Keep::First) / Complex64::new(probability, 0.0);
    Ok(DensityMatrix(hermitian_part(&reduced)))
}

/// One-sided form `Tr₂((1⊗P₂)ρ) / Tr((1⊗P₂)ρ)`, returned without
/// symmetrization.
pub fn conditional_density_raw(rho: &DensityMatrix, p2: &Projector, dims: BipartiteDims) -> Result<CMatrix> {
    let (lifted, probability) = checked_probability(rho, p2, dims)?;
    Ok(partial_trace_matrix(&(&lifted * &rho.0), dims, Keep::First) / Complex64::new(probability, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalExpectation {
    /// `Tr((f⊗P₂)ρ)`.
    pub value: f64,
    /// `Tr₁(f · Tr₂((1⊗P₂)ρ))`.
    pub identity_value: f64,
    /// `Tr((1⊗P₂)ρ)`.
    pub probability: f64,
}

impl ConditionalExpectation {
    /// Expectation of `f` in the normalized conditional state.
    pub fn normalized(&self) -> Result<f64> {
        if !(self.probability >= PROBABILITY_FLOOR) {
            return Err(Error::ZeroProbability { probability: self.probability });
        }
        Ok(self.value / self.probability)
    }
}

pub fn conditional_expectation(
    rho: &DensityMatrix,
    f: &CMatrix,
    p2: &Projector,
    dims: BipartiteDims,
) -> Result<ConditionalExpectation> {
    dims.check(rho.dim())?;
    if !f.is_square() || f.nrows() != dims.d1 {
        return Err(Error::DimensionMismatch { expected: dims.d1, found: f.nrows() });
    }
    if hermitian_defect(f) > TOL {
        return Err(Error::InvalidInput("observable is not Hermitian".into()));
    }
    let lifted = lift_second(p2, dims)?;
    let joint = f.kronecker(&p2.0);
    let value = (&joint * &rho.0).trace().re;
    let reduced = partial_trace_matrix(&(&lifted * &rho.0), dims, Keep::First);
    let identity_value = (f * reduced).trace().re;
    let probability = (&lifted * &rho.0).trace().re;
    let scale = f.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if (value - identity_value).abs() > TOL * scale {
        return Err(Error::Inconsistent(format!(
            "expectation routes disagree: {value:e} vs {identity_value:e}"
        )));
    }
    Ok(ConditionalExpectation { value, identity_value, probability })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap()
    }

    fn max_entry(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn bell_partial_trace_is_maximally_mixed() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        for keep in [Keep::First, Keep::Second] {
            let r = partial_trace(&bell(), dims, keep).unwrap();
            let expected = DensityMatrix::maximally_mixed(2).unwrap();
            assert!(max_entry(&(r.matrix() - expected.matrix())) < 1e-15);
        }
    }

    #[test]
    fn trivial_second_factor() {
        let rho = DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), c(0.3)],
        ))
        .unwrap();
        let dims = BipartiteDims::new(2, 1).unwrap();
        assert_eq!(partial_trace(&rho, dims, Keep::First).unwrap(), rho);
    }

    #[test]
    fn dimension_mismatch() {
        let dims = BipartiteDims::new(3, 2).unwrap();
        assert!(matches!(partial_trace(&bell(), dims, Keep::First), Err(Error::DimensionMismatch { .. })));
        let p = Projector::basis(3, 0).unwrap();
        let dims = BipartiteDims::new(2, 2).unwrap();
        assert!(matches!(conditional_density(&bell(), &p, dims), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bell_conditioning() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        let p0 = Projector::basis(2, 0).unwrap();
        let r = conditional_density(&bell(), &p0, dims).unwrap();
        assert!(max_entry(&(r.matrix() - Projector::basis(2, 0).unwrap().matrix())) < 1e-15);
        let z = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0)]));
        let e = conditional_expectation(&bell(), &z, &p0, dims).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);
        assert!((e.normalized().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_support_has_zero_probability() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        let rho = DensityMatrix::pure(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        let p1 = Projector::basis(2, 1).unwrap();
        assert!(matches!(conditional_density(&rho, &p1, dims), Err(Error::ZeroProbability { .. })));
        assert!(matches!(conditional_density_raw(&rho, &p1, dims), Err(Error::ZeroProbability { .. })));
    }

    #[test]
    fn validation_reports() {
        assert!(validate(DensityMatrix::maximally_mixed(3).unwrap().matrix()).is_valid());
        let bad = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.2), c(-0.2)]));
        let r = validate(&bad);
        assert!(r.is_hermitian() && r.has_unit_trace() && !r.is_positive());
        assert!(!validate(&CMatrix::zeros(2, 3)).is_valid());
        let rect = Complex64::new(0.0, 1.0);
        let nonherm = CMatrix::from_row_slice(2, 2, &[c(0.5), rect, rect, c(0.5)]);
        assert!(!validate(&nonherm).is_hermitian());
        assert!(DensityMatrix::new(bad).is_err());
    }

    #[test]
    fn projector_checks() {
        assert!(is_projector(Projector::basis(3, 1).unwrap().matrix()));
        assert!(!is_projector(&(CMatrix::identity(2, 2) * c(0.5))));
        assert!(Projector::new(CMatrix::identity(2, 2) * c(2.0)).is_err());
        assert!(Projector::rank_one(&[c(0.0), c(0.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let rho = bell();
        let s = serde_json::to_string(&rho).unwrap();
        assert!(s.starts_with("{\"dim\":4,\"re\":"));
        let back: DensityMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
        let bad = r#"{"dim":2,"re":[[1.2,0.0],[0.0,-0.2]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
        let ragged = r#"{"dim":2,"re":[[1.0,0.0]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<Projector>(ragged).is_err());
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        let f = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let p = Projector::basis(2, 0).unwrap();
        assert!(matches!(conditional_expectation(&bell(), &f, &p, dims), Err(Error::InvalidInput(_))));
    }
}
