//! Norms twisted by an eigenbasis of the mean-reversion matrix.
//!
//! For diagonalizable `B` with eigenvector matrix `S`, the vector norm is
//! `|x|_{B,S} = |(S^-1 ⊗ S^-1) x|_2` and the matrix norm is the induced
//! operator norm `|X|_{B,S} = |(S^-1 ⊗ S^-1) X (S ⊗ S)|_2`. These enter the
//! stationarity and moment conditions together with the constant
//!
//! `K_2 = max { |X|_2 / |vec(X)|_{B,S} : X in the PSD cone, |X|_2 = 1 }`,
//!
//! which has no closed form for general `B` and is computed here by
//! projected gradient ascent with multi-start.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::matcore::{kron, kron_c, spectral_norm, spectral_norm_c, unvec, vec_of};
use crate::seeding::rng_for;

/// Condition-number threshold on the eigenvector matrix above which `B`
/// is treated as numerically non-diagonalizable.
const DIAG_COND_LIMIT: f64 = 1e8;

/// Built-in seed for the `K_2` multi-start optimizer, so contexts built
/// from the same `B` are bit-identical.
const K2B_SEED: u64 = 0x4b32_6f70;

/// Search domain for the `K_2` maximization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K2bDomain {
    /// Positive semidefinite matrices of unit spectral norm (the state
    /// space of the volatility process; the default).
    PsdCone,
    /// All symmetric matrices of unit spectral norm, for sensitivity
    /// analysis.
    Symmetric,
}

/// Eigendecomposition of a real matrix in complex arithmetic.
///
/// Returns the eigenvalues sorted by (real, imaginary) part and the
/// matrix of unit-norm eigenvectors in the matching column order. Fails
/// when no numerically reliable eigenbasis exists.
pub fn eig_decompose_real(
    b: &DMatrix<f64>,
) -> Result<(Vec<Complex<f64>>, DMatrix<Complex<f64>>)> {
    if b.nrows() != b.ncols() {
        return Err(CoreError::NotSquare {
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    let d = b.nrows();
    let scale = spectral_norm(b).max(1.0);
    let mut eigvals: Vec<Complex<f64>> = b.clone().complex_eigenvalues().iter().copied().collect();
    eigvals.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });

    let b_c = b.map(|x| Complex::new(x, 0.0));
    let mut s = DMatrix::<Complex<f64>>::zeros(d, d);
    let cluster_tol = 1e-8 * scale;

    let mut col = 0;
    let mut i = 0;
    while i < d {
        // eigenvalues within the cluster tolerance share one null-space
        // computation
        let mut j = i + 1;
        while j < d && (eigvals[j] - eigvals[i]).norm() <= cluster_tol {
            j += 1;
        }
        let mult = j - i;
        let lambda = eigvals[i..j].iter().sum::<Complex<f64>>() / (mult as f64);

        let mut shifted = b_c.clone();
        for k in 0..d {
            shifted[(k, k)] -= lambda;
        }
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .as_ref()
            .expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .expect("finite singular values")
        });
        for (slot, &k) in order[..mult].iter().enumerate() {
            let mut v: DVector<Complex<f64>> = v_t.row(k).map(|z| z.conj()).transpose();
            // deterministic phase: largest-modulus entry real positive
            let (mut phase, mut best) = (Complex::new(1.0, 0.0), 0.0);
            for z in v.iter() {
                if z.norm() > best {
                    best = z.norm();
                    phase = z / z.norm();
                }
            }
            v /= phase;
            v /= Complex::new(v.norm(), 0.0);
            let residual = (&b_c * &v - &v * lambda).norm();
            if residual > 1e-7 * scale {
                return Err(CoreError::NotDiagonalizable {
                    reason: format!(
                        "eigenvector residual {residual:e} for eigenvalue {lambda} (multiplicity {mult})"
                    ),
                });
            }
            s.set_column(col + slot, &v);
        }
        col += mult;
        i = j;
    }
    Ok((eigvals, s))
}

/// Precomputed eigenbasis data for the `B,S` norms.
#[derive(Debug, Clone)]
pub struct BsNormContext {
    b: DMatrix<f64>,
    s: DMatrix<Complex<f64>>,
    s_inv: DMatrix<Complex<f64>>,
    s_inv_kron: DMatrix<Complex<f64>>,
    s_kron: DMatrix<Complex<f64>>,
    /// Real symmetric Gram matrix of `S^-1 ⊗ S^-1`, so the vector norm of a
    /// real `x` is `sqrt(x^T gram x)`.
    gram: DMatrix<f64>,
    lambda: f64,
    k2b: f64,
    alpha1: f64,
}

impl BsNormContext {
    /// Builds the context for mean-reversion matrix `b` and jump shape
    /// matrix `a`.
    ///
    /// Fails with [`CoreError::NotDiagonalizable`] when the eigenvector
    /// matrix is ill-conditioned (condition number above 1e8) or the
    /// similarity transform does not diagonalize `b` to within 1e-10
    /// relative error.
    pub fn new(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self> {
        let d = b.nrows();
        if a.nrows() != d || a.ncols() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: a.nrows(),
            });
        }
        let (eigvals, s) = eig_decompose_real(b)?;
        let svals = s.clone().svd(false, false).singular_values;
        let smax = svals.iter().fold(0.0f64, |m, &v| m.max(v));
        let smin = svals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let cond = smax / smin.max(f64::MIN_POSITIVE);
        if !cond.is_finite() || cond >= DIAG_COND_LIMIT {
            return Err(CoreError::NotDiagonalizable {
                reason: format!("eigenvector matrix condition number {cond:e} >= 1e8"),
            });
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| CoreError::NotDiagonalizable {
                reason: "eigenvector matrix is singular".into(),
            })?;

        let scale = spectral_norm(b).max(1.0);
        let diag = &s_inv * b.map(|x| Complex::new(x, 0.0)) * &s;
        let mut max_offdiag = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    max_offdiag = max_offdiag.max(diag[(i, j)].norm());
                }
            }
        }
        if max_offdiag > 1e-10 * scale {
            return Err(CoreError::NotDiagonalizable {
                reason: format!("similarity transform leaves off-diagonal mass {max_offdiag:e}"),
            });
        }

        let s_inv_kron = kron_c(&s_inv, &s_inv);
        let s_kron = kron_c(&s, &s);
        let gram = hermitian_gram_real(&s_inv_kron);
        let lambda = eigvals.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);

        let k2b = k2b_optimize(&gram, &s, d, K2bDomain::PsdCone, 50, K2B_SEED);

        let s_norm = spectral_norm_c(&s);
        let s_inv_norm = spectral_norm_c(&s_inv);
        let mut ctx = Self {
            b: b.clone(),
            s,
            s_inv,
            s_inv_kron,
            s_kron,
            gram,
            lambda,
            k2b,
            alpha1: 0.0,
        };
        let a_kron_norm = ctx.matrix_norm(&kron(a, a));
        ctx.alpha1 = s_norm.powi(2) * s_inv_norm.powi(2) * k2b * a_kron_norm;
        Ok(ctx)
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn s(&self) -> &DMatrix<Complex<f64>> {
        &self.s
    }

    pub fn s_inv(&self) -> &DMatrix<Complex<f64>> {
        &self.s_inv
    }

    /// Largest real part over the spectrum of `B`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The optimized cone constant `K_2`.
    pub fn k2b(&self) -> f64 {
        self.k2b
    }

    /// `|S|_2^2 |S^-1|_2^2 K_2 |A ⊗ A|_{B,S}`.
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// `|x|_{B,S} = |(S^-1 ⊗ S^-1) x|_2` for a real vector of length d^2.
    pub fn vector_norm(&self, x: &DVector<f64>) -> f64 {
        let xc = x.map(|v| Complex::new(v, 0.0));
        (&self.s_inv_kron * xc).norm()
    }

    /// `|X|_{B,S} = |(S^-1 ⊗ S^-1) X (S ⊗ S)|_2` for a real d^2 x d^2 matrix.
    pub fn matrix_norm(&self, x: &DMatrix<f64>) -> f64 {
        let xc = x.map(|v| Complex::new(v, 0.0));
        spectral_norm_c(&(&self.s_inv_kron * xc * &self.s_kron))
    }

    /// Norm of `vec(y y^T)` in the `B,S` norm, a recurring integrand.
    pub fn vec_outer_norm(&self, y: &DVector<f64>) -> f64 {
        let outer = y * y.transpose();
        self.vector_norm(&vec_of(&outer))
    }
}

/// Real quadratic form of `k^H k`: for real `x`, `|k x|_2^2 = x^T gram x`.
fn hermitian_gram_real(k: &DMatrix<Complex<f64>>) -> DMatrix<f64> {
    let g = k.adjoint() * k;
    let n = g.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (g[(i, j)].re + g[(j, i)].re))
}

/// Ratio `|X|_2 / |vec(X)|_{B,S}` evaluated through the Gram matrix.
fn ratio(gram: &DMatrix<f64>, x: &DMatrix<f64>, domain: K2bDomain) -> f64 {
    let v = vec_of(x);
    let q2 = (gram * &v).dot(&v);
    if q2 <= 0.0 {
        return 0.0;
    }
    let sn = match domain {
        K2bDomain::PsdCone => top_eig(x).0,
        K2bDomain::Symmetric => {
            let (hi, lo) = extreme_eigs(x);
            hi.abs().max(lo.abs())
        }
    };
    sn / q2.sqrt()
}

fn top_eig(x: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = x.clone().symmetric_eigen();
    let mut best = 0;
    for k in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[k] > eig.eigenvalues[best] {
            best = k;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into())
}

fn extreme_eigs(x: &DMatrix<f64>) -> (f64, f64) {
    let ev = x.clone().symmetric_eigen().eigenvalues;
    let hi = ev.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lo = ev.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    (hi, lo)
}

fn project_psd(x: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.nrows();
    let eig = x.clone().symmetric_eigen();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        if lam > 0.0 {
            let v = eig.eigenvectors.column(k);
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += lam * v[i] * v[j];
                }
            }
        }
    }
    out
}

fn normalize_spectral(x: &DMatrix<f64>, domain: K2bDomain) -> Option<DMatrix<f64>> {
    let sn = match domain {
        K2bDomain::PsdCone => top_eig(x).0,
        K2bDomain::Symmetric => {
            let (hi, lo) = extreme_eigs(x);
            hi.abs().max(lo.abs())
        }
    };
    if sn <= 0.0 || !sn.is_finite() {
        return None;
    }
    Some(x / sn)
}

/// One projected-gradient ascent run from a given start.
fn ascend(
    gram: &DMatrix<f64>,
    start: DMatrix<f64>,
    domain: K2bDomain,
) -> f64 {
    let d = start.nrows();
    let mut x = match normalize_spectral(&start, domain) {
        Some(x) => x,
        None => return 0.0,
    };
    let mut best = ratio(gram, &x, domain);
    let mut eta = 0.5;
    for _ in 0..300 {
        let v = vec_of(&x);
        let q2 = (gram * &v).dot(&v);
        if q2 <= 0.0 {
            break;
        }
        // gradient of log ratio = grad |X|_2 / |X|_2 - (gram vec X)/q^2,
        // symmetrized onto the symmetric subspace
        let sn_grad = match domain {
            K2bDomain::PsdCone => {
                let (lam, v1) = top_eig(&x);
                if lam <= 0.0 {
                    break;
                }
                (&v1 * v1.transpose()) / lam
            }
            K2bDomain::Symmetric => {
                let eig = x.clone().symmetric_eigen();
                let mut best_k = 0;
                for k in 1..d {
                    if eig.eigenvalues[k].abs() > eig.eigenvalues[best_k].abs() {
                        best_k = k;
                    }
                }
                let lam = eig.eigenvalues[best_k];
                let v1: DVector<f64> = eig.eigenvectors.column(best_k).into();
                (&v1 * v1.transpose()) * (lam.signum() / lam.abs())
            }
        };
        let q_grad = unvec(&(gram * &v), d).expect("gram is d^2 x d^2") / q2;
        let g = &sn_grad - &q_grad;
        let g = DMatrix::from_fn(d, d, |i, j| 0.5 * (g[(i, j)] + g[(j, i)]));

        let mut improved = false;
        while eta > 1e-12 {
            let cand = &x + &g * eta;
            let cand = match domain {
                K2bDomain::PsdCone => project_psd(&cand),
                K2bDomain::Symmetric => cand,
            };
            if let Some(cand) = normalize_spectral(&cand, domain) {
                let r = ratio(gram, &cand, domain);
                if r > best {
                    best = r;
                    x = cand;
                    improved = true;
                    eta *= 1.5;
                    break;
                }
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    best
}

fn k2b_optimize(
    gram: &DMatrix<f64>,
    s: &DMatrix<Complex<f64>>,
    d: usize,
    domain: K2bDomain,
    n_random_starts: usize,
    seed: u64,
) -> f64 {
    let mut best = 0.0f64;

    // rank-one coordinate starts e_i e_i^T
    for i in 0..d {
        let mut x = DMatrix::zeros(d, d);
        x[(i, i)] = 1.0;
        best = best.max(ascend(gram, x, domain));
    }
    // identity start
    best = best.max(ascend(gram, DMatrix::identity(d, d), domain));
    // Re(S S^H): PSD and aligned with the eigenbasis geometry
    let ssh = s * s.adjoint();
    let ssh_re = DMatrix::from_fn(d, d, |i, j| 0.5 * (ssh[(i, j)].re + ssh[(j, i)].re));
    best = best.max(ascend(gram, ssh_re, domain));

    let mut rng = rng_for(seed, "k2b-starts", 0);
    for _ in 0..n_random_starts {
        let mut w = DMatrix::zeros(d, d);
        for _ in 0..d {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            w += &g * g.transpose();
        }
        if domain == K2bDomain::Symmetric {
            // also explore indefinite directions
            let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            w -= &g * g.transpose();
        }
        best = best.max(ascend(gram, w, domain));
    }
    best
}

/// Re-runs the `K_2` maximization with an explicit domain, start count and
/// seed. `k2b()` on the context is the `PsdCone` value with defaults.
pub fn k2b_constant_with(
    ctx: &BsNormContext,
    domain: K2bDomain,
    n_random_starts: usize,
    seed: u64,
) -> f64 {
    k2b_optimize(&ctx.gram, &ctx.s, ctx.dim(), domain, n_random_starts, seed)
}
