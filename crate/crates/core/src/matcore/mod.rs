//! Linear algebra on symmetric and positive semidefinite matrices.
//!
//! Everything in here is plain dense arithmetic sized for small state
//! dimensions (d up to ~20): vec/Kronecker calculus, the matrix
//! exponential, PSD square roots and the spectral quantities entering the
//! stationarity and ergodicity conditions.

mod bsnorm;

pub use bsnorm::{eig_decompose_real, k2b_constant_with, BsNormContext, K2bDomain};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};

/// Tolerance for membership in the PSD cone: eigenvalues down to
/// `-1e-10 * max(1, scale)` are attributed to floating-point drift on the
/// cone boundary.
pub fn psd_tol(scale: f64) -> f64 {
    1e-10 * scale.max(1.0)
}

/// A real symmetric matrix; symmetry holds entrywise exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps a matrix that is already exactly symmetric.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(CoreError::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        let mut max_asym = 0.0f64;
        for i in 0..data.nrows() {
            for j in (i + 1)..data.ncols() {
                max_asym = max_asym.max((data[(i, j)] - data[(j, i)]).abs());
            }
        }
        if max_asym > 0.0 {
            return Err(CoreError::NotSymmetric { max_asym });
        }
        Ok(Self { data })
    }

    /// Builds the exactly symmetric matrix `(m + m^T) / 2`.
    ///
    /// Addition commutes in IEEE arithmetic, so the result is symmetric
    /// entry for entry even when `m` carries rounding noise.
    pub fn symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CoreError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let d = m.nrows();
        let data = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Ok(Self { data })
    }

    /// Builds from a row-major flat slice of length `dim * dim`.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> DVector<f64> {
        let mut ev: Vec<f64> = self
            .data
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        DVector::from_vec(ev)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, &l| m.max(l.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }
}

/// A positive semidefinite matrix (up to [`psd_tol`] of its spectral norm).
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    base: SymMatrix,
}

impl PsdMatrix {
    /// Accepts symmetric input whose smallest eigenvalue is at least
    /// `-psd_tol(spectral norm)`.
    pub fn try_new(base: SymMatrix) -> Result<Self> {
        let min_eig = base.min_eigenvalue();
        let tol = psd_tol(base.spectral_norm());
        if min_eig < -tol {
            return Err(CoreError::NotPsd { min_eig, tol });
        }
        Ok(Self { base })
    }

    /// Validates positive definiteness: `min eig > 1e-12 * spectral norm`.
    pub fn try_new_positive_definite(base: SymMatrix) -> Result<Self> {
        let min_eig = base.min_eigenvalue();
        if min_eig <= 1e-12 * base.spectral_norm().max(1e-300) {
            return Err(CoreError::NotPositiveDefinite { min_eig });
        }
        Ok(Self { base })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            base: SymMatrix::zeros(dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            base: SymMatrix::identity(dim),
        }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        if scale < 0.0 {
            return Err(CoreError::InvalidParam(format!(
                "identity scale must be nonnegative, got {scale}"
            )));
        }
        Self::try_new(SymMatrix {
            data: DMatrix::identity(dim, dim) * scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.base.matrix()
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.base.min_eigenvalue()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.base.spectral_norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.base.frobenius_norm()
    }

    /// The unique PSD square root, by symmetric eigendecomposition.
    ///
    /// Eigenvalues inside the negative tolerance band are clamped to zero
    /// before the square root is taken.
    pub fn sqrt(&self) -> PsdMatrix {
        let eig = self.base.data.clone().symmetric_eigen();
        let d = self.dim();
        let mut root = DMatrix::zeros(d, d);
        for k in 0..d {
            let lam = eig.eigenvalues[k].max(0.0);
            let s = lam.sqrt();
            let v = eig.eigenvectors.column(k);
            // rank-one accumulation: root += s * v v^T
            for i in 0..d {
                for j in 0..d {
                    root[(i, j)] += s * v[i] * v[j];
                }
            }
        }
        let base = SymMatrix::symmetrized(&root).expect("square input");
        PsdMatrix { base }
    }
}

/// Column-stacking of a matrix into a vector of length `rows * cols`.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for square matrices of dimension `d`.
pub fn unvec(v: &DVector<f64>, d: usize) -> Result<DMatrix<f64>> {
    if v.len() != d * d {
        return Err(CoreError::DimensionMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    kron_impl(a, b)
}

/// Kronecker product for complex matrices.
pub fn kron_c(a: &DMatrix<Complex<f64>>, b: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    kron_impl(a, b)
}

fn kron_impl<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T>
where
    T: nalgebra::Scalar + Copy + std::ops::Mul<Output = T> + num_complex::ComplexFloat,
{
    let (p, q) = (a.nrows(), a.ncols());
    let (r, s) = (b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(p * r, q * s);
    for i in 0..p {
        for j in 0..q {
            let aij = a[(i, j)];
            for k in 0..r {
                for l in 0..s {
                    out[(i * r + k, j * s + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// The vec-space drift operator `B ⊗ I + I ⊗ B`.
pub fn vec_drift_matrix(b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = b.nrows();
    let id = DMatrix::identity(d, d);
    kron(b, &id) + kron(&id, b)
}

/// Spectral norm (largest singular value) of a real matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

/// Spectral norm of a complex matrix.
pub fn spectral_norm_c(m: &DMatrix<Complex<f64>>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

// Pade-13 coefficients for the scaling-and-squaring exponential
// (Higham, "The Scaling and Squaring Method for the Matrix Exponential
// Revisited").
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential `e^{m t}` by scaling and squaring with the order-13
/// Pade approximant.
///
/// Fails with [`CoreError::ExpOverflow`] when the spectral norm of `m t`
/// exceeds 700 (the result would overflow f64 range).
pub fn mat_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if !t.is_finite() {
        return Err(CoreError::InvalidParam(format!("non-finite time {t}")));
    }
    let x = m * t;
    let norm2 = spectral_norm(&x);
    if norm2 > 700.0 {
        return Err(CoreError::ExpOverflow { norm: norm2 });
    }

    let d = x.nrows();
    let one_norm = (0..d)
        .map(|j| x.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if one_norm > PADE13_THETA {
        (one_norm / PADE13_THETA).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = &x * 2.0f64.powi(-(squarings as i32));

    let id = DMatrix::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let w1 = &a6 * (PADE13[13] * &a6 + PADE13[11] * &a4 + PADE13[9] * &a2);
    let w2 = PADE13[7] * &a6 + PADE13[5] * &a4 + PADE13[3] * &a2 + PADE13[1] * &id;
    let u = &scaled * (w1 + w2);
    let z1 = &a6 * (PADE13[12] * &a6 + PADE13[10] * &a4 + PADE13[8] * &a2);
    let v = z1 + PADE13[6] * &a6 + PADE13[4] * &a4 + PADE13[2] * &a2 + PADE13[0] * &id;

    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| CoreError::InternalDefect("singular Pade denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Maximum of the real numerical range of `B ⊗ I + I ⊗ B`, i.e. the
/// largest eigenvalue of its symmetric part.
pub fn numerical_range_max(b: &DMatrix<f64>) -> f64 {
    let big = vec_drift_matrix(b);
    sym_part_extremes(&big).1
}

/// Minimum of the real numerical range of `B ⊗ I + I ⊗ B`.
pub fn numerical_range_min(b: &DMatrix<f64>) -> f64 {
    let big = vec_drift_matrix(b);
    sym_part_extremes(&big).0
}

fn sym_part_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = SymMatrix::symmetrized(m).expect("square input");
    let ev = sym.eigenvalues();
    (ev[0], ev[ev.len() - 1])
}

/// Largest real part over the eigenvalues of a real square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
