//! Lyapunov constants for small dense linear modes.
//!
//! For a Hurwitz mode `A` and `Q ≻ 0` the quadratic `V(x) = xᵀPx` with
//! `AᵀP + PA = −Q` decays at rate `λ_min(Q)/λ_max(P)`. The budget engine
//! uses the spectral abscissa as `γ` and eigenvalue ratios of the `P`
//! matrices as the jump comparability constant `ν`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// Largest dimension `eigen_spectrum` accepts.
pub const MAX_DIM: usize = 16;

/// Quadratic Lyapunov certificate of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCertificate {
    pub p_matrix: DMatrix<f64>,
    pub gamma: f64,
    pub eigenvalues: Vec<Complex64>,
}

impl ModeCertificate {
    pub fn new(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let eigenvalues = eigen_spectrum(a)?;
        let gamma = decay_rate_from_spectrum(&eigenvalues)?;
        let p_matrix = solve_lyapunov(a, q)?;
        Ok(Self {
            p_matrix,
            gamma,
            eigenvalues,
        })
    }

    /// Certificate with the default weight `Q = I`.
    pub fn with_identity(a: &DMatrix<f64>) -> Result<Self> {
        Self::new(a, &DMatrix::identity(a.nrows(), a.ncols()))
    }

    /// `(λ_min(P), λ_max(P))`.
    pub fn p_bounds(&self) -> (f64, f64) {
        sym_extremes(&self.p_matrix)
    }

    /// `V(x) = xᵀPx`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        (v.transpose() * &self.p_matrix * &v)[(0, 0)]
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(a.nrows())
}

/// All eigenvalues of a square real matrix.
///
/// 2×2 matrices use the characteristic quadratic directly. Larger ones go
/// through a real Schur decomposition; each eigenvalue is then checked
/// against an eigenvector recovered from `A − λI`, and the call fails if
/// `‖Av − λv‖ > 1e−10·‖A‖`.
pub fn eigen_spectrum(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = check_square(a)?;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(a[(0, 0)], 0.0)]),
        2 => Ok(quadratic_roots(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]).to_vec()),
        n if n > MAX_DIM => Err(Error::InvalidArgument(format!(
            "eigen_spectrum supports n <= {MAX_DIM}, got {n}"
        ))),
        _ => {
            let values = a
                .clone()
                .try_schur(f64::EPSILON, 10_000)
                .ok_or_else(|| Error::InvalidArgument("Schur iteration did not converge".into()))?
                .complex_eigenvalues();
            let mut out: Vec<Complex64> = values.iter().copied().collect();
            let tolerance = 1e-10 * a.norm().max(f64::MIN_POSITIVE);
            for lambda in &out {
                let residual = eigenpair_residual(a, *lambda);
                if residual > tolerance {
                    return Err(Error::EigenResidual {
                        residual,
                        tolerance,
                    });
                }
            }
            out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
            Ok(out)
        }
    }
}

/// Roots of `s² − tr·s + det` for `[[a, b], [c, d]]`.
fn quadratic_roots(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    // disc = tr²/4 − det, written to avoid cancellation in tr² − 4det
    let half_diff = 0.5 * (a - d);
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // larger-magnitude root first, then det / r1 for the other
        let r1 = if half_tr >= 0.0 {
            half_tr + root
        } else {
            half_tr - root
        };
        let det = a * d - b * c;
        let r2 = if r1 != 0.0 { det / r1 } else { half_tr - root };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half_tr, -im), Complex64::new(half_tr, im)]
    }
}

/// `‖Av − λv‖` for the unit vector `v` spanning the (numerical) null space
/// of `A − λI`.
fn eigenpair_residual(a: &DMatrix<f64>, lambda: Complex64) -> f64 {
    let n = a.nrows();
    let ac: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    let shifted = &ac - DMatrix::<Complex64>::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let Some(v_t) = svd.v_t else {
        return f64::INFINITY;
    };
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let v: DVector<Complex64> = v_t.row(idx).adjoint();
    (&ac * &v - &v * lambda).norm()
}

fn decay_rate_from_spectrum(spectrum: &[Complex64]) -> Result<f64> {
    let mut gamma = f64::INFINITY;
    for lambda in spectrum {
        if !(lambda.re < 0.0) {
            return Err(Error::NotHurwitz { eigenvalue: *lambda });
        }
        gamma = gamma.min(-lambda.re);
    }
    Ok(gamma)
}

/// `γ = min_i(−Re λ_i)`; fails on a non-Hurwitz matrix, naming the
/// offending eigenvalue.
pub fn decay_rate(a: &DMatrix<f64>) -> Result<f64> {
    decay_rate_from_spectrum(&eigen_spectrum(a)?)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    decay_rate(a).is_ok()
}

/// Solves `AᵀP + PA = −Q` for symmetric positive-definite `P`.
///
/// The Kronecker form `(I⊗Aᵀ + Aᵀ⊗I)·vec(P) = −vec(Q)` is solved by LU
/// with one step of iterative refinement.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(a)?;
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, A is {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) || (q - q.transpose()).norm() > 1e-12 * q.norm() {
        return Err(Error::InvalidArgument("Q must be finite and symmetric".into()));
    }
    if q.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("Q must be positive definite".into()));
    }
    decay_rate(a)?;

    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));

    let lu = kron.clone().lu();
    let mut vec_p = lu.solve(&rhs).ok_or(Error::Singular)?;
    let correction = lu.solve(&(&rhs - &kron * &vec_p)).ok_or(Error::Singular)?;
    vec_p += correction;

    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if p.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(p)
}

/// `‖AᵀP + PA + Q‖_F`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a + q).norm()
}

/// Extreme eigenvalues of a symmetric matrix.
pub(crate) fn sym_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `ν = max over p ≠ p′ of λ_max(P_p)/λ_min(P_p′)`, at least 1.
pub fn comparability_constant(certs: &[ModeCertificate]) -> Result<f64> {
    let first = certs
        .first()
        .ok_or_else(|| Error::InvalidArgument("need at least one certificate".into()))?;
    let n = first.p_matrix.nrows();
    if let Some(bad) = certs.iter().find(|c| c.p_matrix.nrows() != n) {
        return Err(Error::DimensionMismatch(format!(
            "certificates of dimension {n} and {}",
            bad.p_matrix.nrows()
        )));
    }
    let bounds: Vec<(f64, f64)> = certs.iter().map(ModeCertificate::p_bounds).collect();
    let mut nu = 1.0_f64;
    for (i, &(_, hi)) in bounds.iter().enumerate() {
        for (j, &(lo, _)) in bounds.iter().enumerate() {
            if i != j {
                nu = nu.max(hi / lo);
            }
        }
    }
    Ok(nu)
}
