//! Dense real matrix kernels.
//!
//! Everything downstream works on [`SquareMatrix`], a finite-valued square
//! `DMatrix<f64>`. Norms are spectral (largest singular value) throughout.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

const EIG_EPS: f64 = f64::EPSILON;
const EIG_MAX_ITER: usize = 10_000;

/// Relative asymmetry tolerated by symmetric-only routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real n×n matrix with finite entries, n ≥ 1.
#[derive(Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<f64>);

impl SquareMatrix {
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(invalid("matrix dimension must be at least 1"));
        }
        if m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite matrix entry at flat index {pos}")));
        }
        Ok(Self(m))
    }

    /// Builds an n×n matrix from `n*n` row-major entries.
    pub fn from_row_slice(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("matrix rows must all have length equal to the row count"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_slice(n, &flat)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self(DMatrix::zeros(n, n))
    }

    /// Wraps a matrix produced by arithmetic on valid inputs, rejecting
    /// overflow to infinity or NaN.
    pub(crate) fn checked(m: DMatrix<f64>, what: &str) -> Result<Self> {
        if m.iter().all(|v| v.is_finite()) {
            Ok(Self(m))
        } else {
            Err(Error::Overflow(format!("{what} produced non-finite entries")))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &SquareMatrix) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }

    /// `self − c·id`
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= c;
        }
        Self(m)
    }

    pub fn same_dim(&self, other: &SquareMatrix, what: &str) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(invalid(format!(
                "{what}: dimension mismatch ({} vs {})",
                self.dim(),
                other.dim()
            )))
        }
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl<'a> Mul<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a SquareMatrix> for &'a SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &'a SquareMatrix) -> SquareMatrix {
        SquareMatrix(&self.0 - &rhs.0)
    }
}

// Serialized as a list of rows.
impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SquareMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Symmetric positive-definite matrix.
#[derive(Clone, PartialEq)]
pub struct SymmetricPD(SquareMatrix);

impl SymmetricPD {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        let lambda_min = min_eigenvalue_sym(&m)?;
        if lambda_min <= 0.0 {
            return Err(invalid(format!(
                "matrix is not positive definite (smallest eigenvalue {lambda_min:e})"
            )));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(SquareMatrix::identity(n))
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

impl fmt::Debug for SymmetricPD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for SymmetricPD {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

/// Matrix exponential `e^{tM}` (Padé scaling and squaring).
pub fn expm(m: &SquareMatrix, t: f64) -> Result<SquareMatrix> {
    if !t.is_finite() {
        return Err(invalid(format!("expm: time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(SquareMatrix::identity(m.dim()));
    }
    let scaled = &m.0 * t;
    SquareMatrix::checked(scaled.exp(), "expm")
}

/// Eigenvalues of a general real matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &SquareMatrix) -> Result<Vec<(f64, f64)>> {
    let schur = Schur::try_new(m.0.clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Decomposition("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect())
}

pub fn spectral_radius(m: &SquareMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &SquareMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn spectral_norm(m: &SquareMatrix) -> Result<f64> {
    spectral_norm_dense(&m.0)
}

pub(crate) fn spectral_norm_dense(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let svd = SVD::try_new(m.clone(), false, false, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Decomposition("SVD did not converge".into()))?;
    Ok(svd.singular_values.max())
}

/// Largest absolute asymmetry relative to the largest entry.
pub fn relative_asymmetry(s: &SquareMatrix) -> f64 {
    let scale = s.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let n = s.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    worst / scale
}

/// Smallest eigenvalue of `(S + Sᵀ)/2`; `S` must be symmetric to within
/// [`SYMMETRY_TOL`] relative to its largest entry.
pub fn min_eigenvalue_sym(s: &SquareMatrix) -> Result<f64> {
    Ok(*symmetric_eigenvalues(s)?
        .first()
        .expect("dimension is at least 1"))
}

/// Eigenvalues of the symmetric part, sorted ascending.
pub fn symmetric_eigenvalues(s: &SquareMatrix) -> Result<Vec<f64>> {
    let asym = relative_asymmetry(s);
    if asym > SYMMETRY_TOL {
        return Err(invalid(format!(
            "matrix is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    let sym = (&s.0 + s.0.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Decomposition("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

pub fn is_hurwitz(m: &SquareMatrix) -> Result<bool> {
    Ok(spectral_abscissa(m)? < 0.0)
}

pub fn is_schur(m: &SquareMatrix) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0)
}

pub fn vector_norm(v: &DVector<f64>) -> f64 {
    v.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Cholesky;
    use proptest::prelude::*;

    fn example_a() -> SquareMatrix {
        SquareMatrix::from_row_slice(2, &[1.2, 0.1, 0.1, -3.0]).unwrap()
    }

    fn example_b() -> SquareMatrix {
        SquareMatrix::from_row_slice(2, &[0.2, 0.1, -0.1, 1.5]).unwrap()
    }

    fn rel_diff(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
        spectral_norm(&(a - b)).unwrap() / spectral_norm(b).unwrap().max(f64::MIN_POSITIVE)
    }

    /// e^{tS} for symmetric S through the eigendecomposition.
    fn expm_symmetric_oracle(s: &SquareMatrix, t: f64) -> SquareMatrix {
        let eig = SymmetricEigen::new(s.as_dmatrix().clone());
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (l * t).exp()));
        let q = &eig.eigenvectors;
        SquareMatrix::from_dmatrix(q * d * q.transpose()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(SquareMatrix::from_row_slice(0, &[]).is_err());
        assert!(SquareMatrix::from_row_slice(2, &[1.0, 2.0, 3.0]).is_err());
        assert!(SquareMatrix::from_row_slice(1, &[f64::NAN]).is_err());
        assert!(SquareMatrix::from_row_slice(1, &[f64::INFINITY]).is_err());
        assert!(SquareMatrix::from_dmatrix(DMatrix::zeros(2, 3)).is_err());
        assert!(SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let a = example_a();
        assert_eq!(a.row_major(), vec![1.2, 0.1, 0.1, -3.0]);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "[[1.2,0.1],[0.1,-3.0]]");
        let back: SquareMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn expm_at_zero_is_identity() {
        let e = expm(&example_a(), 0.0).unwrap();
        assert_eq!(e, SquareMatrix::identity(2));
        assert!(expm(&example_a(), f64::NAN).is_err());
    }

    #[test]
    fn expm_of_diagonal() {
        let d = SquareMatrix::from_diagonal(&[1.0, -3.0]).unwrap();
        let e = expm(&d, 1.0).unwrap();
        let want = SquareMatrix::from_diagonal(&[1f64.exp(), (-3f64).exp()]).unwrap();
        assert!(rel_diff(&e, &want) < 1e-14);
        assert!(e.get(0, 1).abs() < 1e-300 && e.get(1, 0).abs() < 1e-300);
    }

    #[test]
    fn expm_example_generator_trace() {
        // eigenvalues (−1.8 ± √17.68)/2
        let root = 17.68_f64.sqrt();
        let l1 = (-1.8 + root) / 2.0;
        let l2 = (-1.8 - root) / 2.0;
        let e = expm(&example_a(), 1.0).unwrap();
        let trace = e.get(0, 0) + e.get(1, 1);
        let want = l1.exp() + l2.exp();
        assert!((trace - want).abs() <= 1e-13 * want);
        assert!((trace - (1.2024_f64.exp() + (-3.0024_f64).exp())).abs() < 1e-3);
        let oracle = expm_symmetric_oracle(&example_a(), 1.0);
        assert!(rel_diff(&e, &oracle) < 1e-12);
    }

    #[test]
    fn expm_accuracy_for_large_arguments() {
        // ‖tM‖ up to 50 on symmetric inputs with an exact spectral oracle
        let s = SquareMatrix::from_row_slice(3, &[2.0, 1.0, 0.0, 1.0, -4.0, 0.5, 0.0, 0.5, 1.0])
            .unwrap();
        for &t in &[0.1, 1.0, 5.0, 10.0] {
            let e = expm(&s, t).unwrap();
            let oracle = expm_symmetric_oracle(&s, t);
            assert!(rel_diff(&e, &oracle) < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let d = SquareMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        assert!((spectral_radius(&d).unwrap() - 3.0).abs() < 1e-14);
        let nil = SquareMatrix::from_row_slice(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
        // roots of λ² − 1.7λ + 0.31
        let want = (1.7 + (1.7_f64 * 1.7 - 4.0 * 0.31).sqrt()) / 2.0;
        let got = spectral_radius(&example_b()).unwrap();
        assert!((got - want).abs() <= 1e-10 * want);
        assert!((got - 1.492).abs() < 1e-3);
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(&SquareMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let d = SquareMatrix::from_diagonal(&[-5.0, 2.0]).unwrap();
        assert!((spectral_norm(&d).unwrap() - 5.0).abs() < 1e-14);

        let c = example_b().commutator(&example_a());
        let want = [[0.02, -0.55], [-0.29, -0.02]];
        for (i, row) in want.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                assert!((c.get(i, j) - w).abs() < 1e-14);
            }
        }
        // 2x2 singular values: σ² are eigenvalues of CᵀC
        let ctc = c.transpose().as_dmatrix() * c.as_dmatrix();
        let (p, q, r) = (ctc[(0, 0)], ctc[(0, 1)], ctc[(1, 1)]);
        let big = ((p + r) / 2.0 + (((p - r) / 2.0).powi(2) + q * q).sqrt()).sqrt();
        let got = spectral_norm(&c).unwrap();
        assert!((got - big).abs() <= 1e-10 * big);
        assert!((got - 0.5505).abs() < 1e-4);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue_sym(&SquareMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let d = SquareMatrix::from_diagonal(&[-1.0, 4.0]).unwrap();
        assert!((min_eigenvalue_sym(&d).unwrap() + 1.0).abs() < 1e-15);

        let b = example_b();
        let btb = &b.transpose() * &b;
        let (p, q, r) = (0.05, -0.13, 2.26);
        let want = (p + r) / 2.0 - (((p - r) / 2.0_f64).powi(2) + q * q).sqrt();
        let got = min_eigenvalue_sym(&btb).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.0424).abs() < 1e-4);

        let asym = SquareMatrix::from_row_slice(2, &[1.0, 0.5, 0.4, 1.0]).unwrap();
        assert!(matches!(min_eigenvalue_sym(&asym), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn stability_classification() {
        let d = SquareMatrix::from_diagonal(&[-1.0, -2.0]).unwrap();
        assert!(is_hurwitz(&d).unwrap());
        // ℓ = π, μ = 1 shifts by exactly 1
        let shifted = example_a().shifted(1.0);
        assert!(!is_hurwitz(&shifted).unwrap());
        assert!(!is_schur(&example_b()).unwrap());
        assert!(is_schur(&SquareMatrix::from_diagonal(&[0.5, -0.9]).unwrap()).unwrap());
    }

    #[test]
    fn symmetric_pd_checks() {
        assert!(SymmetricPD::new(SquareMatrix::identity(3)).is_ok());
        assert!(SymmetricPD::new(SquareMatrix::from_diagonal(&[1.0, 0.0]).unwrap()).is_err());
        assert!(SymmetricPD::new(example_b()).is_err());
    }

    fn matrix_strategy(max_n: usize, bound: f64) -> impl Strategy<Value = SquareMatrix> {
        (1..=max_n).prop_flat_map(move |n| {
            prop::collection::vec(-bound..bound, n * n)
                .prop_map(move |v| SquareMatrix::from_row_slice(n, &v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn expm_semigroup(m in matrix_strategy(6, 2.0), s in 0.0..2.0f64, t in 0.0..2.0f64) {
            let lhs = &expm(&m, s).unwrap() * &expm(&m, t).unwrap();
            let rhs = expm(&m, s + t).unwrap();
            prop_assert!(rel_diff(&lhs, &rhs) < 1e-10);
        }

        #[test]
        fn norm_transpose_invariant(m in matrix_strategy(6, 5.0)) {
            let a = spectral_norm(&m).unwrap();
            let b = spectral_norm(&m.transpose()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn radius_below_norm(m in matrix_strategy(6, 5.0)) {
            prop_assert!(spectral_radius(&m).unwrap() <= spectral_norm(&m).unwrap() + 1e-10);
        }

        #[test]
        fn positive_min_eigenvalue_iff_cholesky(m in matrix_strategy(5, 1.0), shift in -1.0..2.0f64) {
            let sym = SquareMatrix::from_dmatrix(
                (m.as_dmatrix() + m.as_dmatrix().transpose()) * 0.5,
            ).unwrap().shifted(-shift);
            let lambda = min_eigenvalue_sym(&sym).unwrap();
            prop_assume!(lambda.abs() > 1e-9);
            let chol = Cholesky::new(sym.as_dmatrix().clone()).is_some();
            prop_assert_eq!(lambda > 0.0, chol);
        }
    }
}
