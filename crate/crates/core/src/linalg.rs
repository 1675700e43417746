//! Small dense symmetric-matrix kernels.
//!
//! Everything here works on row-major `f64` storage of dimension `d ≤ ~50`.
//! Quadratic forms accumulate over the upper triangle (`i ≤ j`) and double
//! off-diagonal terms, so the result does not depend on which half of the
//! storage holds a value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on negative Cholesky pivots.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A dense symmetric `d × d` matrix. Writes always touch both halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * m.dim + i] = v;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on `i ≤ j` only.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from row-major data, requiring exact symmetry.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_row_major_tol(dim, data, 0.0)
    }

    /// Like [`SymMatrix::from_row_major`] but tolerates `|a_ij - a_ji| ≤ tol`,
    /// keeping the upper-triangle value.
    pub fn from_row_major_tol(dim: usize, data: Vec<f64>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (m.data[i * dim + j], m.data[j * dim + i]);
                if !((a - b).abs() <= tol) {
                    return Err(Error::NotSymmetric { i, j });
                }
                m.data[j * dim + i] = a;
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        self.data[i * self.dim + i] += v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_upper(self.dim, |i, j| f(i, j, self.get(i, j)))
    }
}

/// A dense lower-triangular matrix, stored row-major with explicit zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Accepts row-major data; entries above the diagonal must be zero.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "factor is not lower triangular at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.dim;
        SymMatrix::from_upper(d, |i, j| {
            let (ri, rj) = (self.row(i), self.row(j));
            (0..=i.min(j)).map(|k| ri[k] * rj[k]).sum()
        })
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = self.row(i);
            let mut acc = 0.0;
            for k in 0..=i {
                acc += row[k] * x[k];
            }
            *o = acc;
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `xᵀ M x`, accumulated over `i ≤ j` with doubled off-diagonal terms.
pub fn quad_form(x: &[f64], m: &SymMatrix) -> Result<f64> {
    check_dim(m.dim(), x.len())?;
    Ok(quad_form_unchecked(x, m))
}

pub(crate) fn quad_form_unchecked(x: &[f64], m: &SymMatrix) -> f64 {
    let d = m.dim();
    let mut acc = 0.0;
    for i in 0..d {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        acc += xi * xi * m.get(i, i);
        let mut off = 0.0;
        for j in (i + 1)..d {
            off += m.get(i, j) * x[j];
        }
        acc += 2.0 * xi * off;
    }
    acc
}

/// Outcome of a clamped norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValue {
    pub value: f64,
    /// The quadratic form was negative and was clamped to zero.
    pub clamped: bool,
}

/// `‖x‖_M = √max(xᵀMx, 0)`.
///
/// `M` need not be PSD; negative forms clamp to zero and set
/// [`NormValue::clamped`] so callers can count them.
pub fn weighted_norm(x: &[f64], m: &SymMatrix) -> Result<NormValue> {
    let q = quad_form(x, m)?;
    Ok(clamp_sqrt(q))
}

#[inline]
pub(crate) fn clamp_sqrt(q: f64) -> NormValue {
    if q < 0.0 {
        NormValue {
            value: 0.0,
            clamped: true,
        }
    } else {
        NormValue {
            value: q.sqrt(),
            clamped: false,
        }
    }
}

/// Entrywise product `A ∘ B`.
pub fn hadamard(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    check_dim(a.dim(), b.dim())?;
    Ok(SymMatrix::from_upper(a.dim(), |i, j| a.get(i, j) * b.get(i, j)))
}

/// PSD-safe Cholesky: returns `L` with `L Lᵀ = M`.
///
/// Pivots in `[-PSD_TOLERANCE, PSD_TOLERANCE]` are treated as zero and the
/// column is zeroed; the off-diagonal residual of such a column must also
/// vanish, otherwise the matrix is rejected at that index.
pub fn factorize(m: &SymMatrix) -> Result<LowerTriangular> {
    let d = m.dim();
    let mut l = LowerTriangular::zeros(d);
    let residual_tol = 1e-8 * (1.0 + m.max_abs());
    for j in 0..d {
        let mut pivot = m.get(j, j);
        for k in 0..j {
            pivot -= l.data[j * d + k] * l.data[j * d + k];
        }
        if pivot < -PSD_TOLERANCE {
            return Err(Error::NotPsd { index: j, pivot });
        }
        if pivot <= PSD_TOLERANCE {
            for i in (j + 1)..d {
                let mut r = m.get(i, j);
                for k in 0..j {
                    r -= l.data[i * d + k] * l.data[j * d + k];
                }
                if r.abs() > residual_tol {
                    return Err(Error::NotPsd { index: j, pivot });
                }
            }
            continue;
        }
        let root = pivot.sqrt();
        l.data[j * d + j] = root;
        for i in (j + 1)..d {
            let mut r = m.get(i, j);
            for k in 0..j {
                r -= l.data[i * d + k] * l.data[j * d + k];
            }
            l.data[i * d + j] = r / root;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn quad_form_examples() {
        let id = SymMatrix::identity(2);
        assert_eq!(quad_form(&[1.0, 1.0], &id).unwrap(), 2.0);
        let m = sym(&[&[2.0, 5.0], &[5.0, 3.0]]);
        assert_eq!(quad_form(&[1.0, 0.0], &m).unwrap(), 2.0);
        let m = sym(&[&[1.0, -2.0], &[-2.0, 1.0]]);
        assert_eq!(quad_form(&[1.0, 1.0], &m).unwrap(), -2.0);
    }

    #[test]
    fn quad_form_rejects_mismatch() {
        let err = quad_form(&[1.0, 2.0, 3.0], &SymMatrix::identity(2)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn weighted_norm_examples() {
        let n = weighted_norm(&[0.5, 0.5], &SymMatrix::identity(2)).unwrap();
        assert!((n.value - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(!n.clamped);

        let m = sym(&[&[1.0, -2.0], &[-2.0, 1.0]]);
        let n = weighted_norm(&[1.0, 1.0], &m).unwrap();
        assert_eq!(n.value, 0.0);
        assert!(n.clamped);

        let n = weighted_norm(&[0.0; 3], &SymMatrix::identity(3).scaled(-4.0)).unwrap();
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn hadamard_examples() {
        let b = sym(&[&[3.0, 7.0], &[7.0, 4.0]]);
        assert_eq!(
            hadamard(&SymMatrix::identity(2), &b).unwrap(),
            SymMatrix::diagonal(&[3.0, 4.0])
        );
        let ones = SymMatrix::from_upper(2, |_, _| 1.0);
        assert_eq!(hadamard(&ones, &b).unwrap(), b);
        let a = sym(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let b = sym(&[&[1.0, -1.0], &[-1.0, 2.0]]);
        assert_eq!(hadamard(&a, &b).unwrap(), sym(&[&[2.0, -1.0], &[-1.0, 6.0]]));
    }

    #[test]
    fn factorize_examples() {
        let l = factorize(&SymMatrix::diagonal(&[4.0, 9.0])).unwrap();
        assert_eq!(l.as_row_major(), &[2.0, 0.0, 0.0, 3.0]);

        let l = factorize(&sym(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(l.as_row_major(), &[1.0, 0.0, 1.0, 0.0]);

        match factorize(&sym(&[&[1.0, 2.0], &[2.0, 1.0]])) {
            Err(Error::NotPsd { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn factorize_rejects_indefinite_zero_pivot() {
        let m = sym(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(factorize(&m), Err(Error::NotPsd { index: 0, .. })));
    }

    #[test]
    fn asymmetric_rows_rejected() {
        let r = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]);
        assert_eq!(r.unwrap_err(), Error::NotSymmetric { i: 0, j: 1 });
    }

    fn random_sym(d: usize) -> impl Strategy<Value = SymMatrix> {
        prop::collection::vec(-10.0f64..10.0, d * d).prop_map(move |v| {
            SymMatrix::from_upper(d, |i, j| v[i * d + j])
        })
    }

    fn gram(d: usize, k: usize) -> impl Strategy<Value = SymMatrix> {
        prop::collection::vec(-3.0f64..3.0, d * k).prop_map(move |g| {
            SymMatrix::from_upper(d, |i, j| (0..k).map(|l| g[i * k + l] * g[j * k + l]).sum())
        })
    }

    proptest! {
        #[test]
        fn weighted_norm_is_finite_and_nonnegative(
            (m, x) in (1usize..7).prop_flat_map(|d| (random_sym(d), prop::collection::vec(-5.0f64..5.0, d)))
        ) {
            let n = weighted_norm(&x, &m).unwrap();
            prop_assert!(n.value.is_finite());
            prop_assert!(n.value >= 0.0);
        }

        #[test]
        fn factorize_reconstructs_gram_matrices(
            m in (1usize..8, 1usize..9).prop_flat_map(|(d, k)| gram(d, k))
        ) {
            let l = factorize(&m).unwrap();
            let r = l.reconstruct();
            let tol = 1e-8 * (1.0 + m.max_abs());
            for i in 0..m.dim() {
                for j in 0..m.dim() {
                    prop_assert!((r.get(i, j) - m.get(i, j)).abs() <= tol);
                }
            }
        }

        #[test]
        fn hadamard_sum_identity(
            (d, traj, m) in (1usize..7).prop_flat_map(|d| (
                Just(d),
                prop::collection::vec(prop::collection::vec(any::<bool>(), d), 1..50),
                random_sym(d),
            ))
        ) {
            // naive Σ_s d_{A_s} M d_{A_s}
            let mut naive = SymMatrix::zeros(d);
            let mut counts = SymMatrix::zeros(d);
            for a in &traj {
                for i in 0..d {
                    for j in i..d {
                        if a[i] && a[j] {
                            naive.set(i, j, naive.get(i, j) + m.get(i, j));
                            counts.set(i, j, counts.get(i, j) + 1.0);
                        }
                    }
                }
            }
            let via = hadamard(&counts, &m).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let tol = 1e-12 * (1.0 + naive.get(i, j).abs());
                    prop_assert!((via.get(i, j) - naive.get(i, j)).abs() <= tol);
                }
            }
        }
    }
}
