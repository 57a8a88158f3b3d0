//! Dense symmetric linear algebra: eigendecomposition, pseudoinverse,
//! condition numbers, orthonormalization and principal angles.
//!
//! Everything here operates on small-to-moderate dense matrices stored as
//! `nalgebra` column-major matrices. Small symmetric problems (dimension up to
//! [`JACOBI_MAX_DIM`]) are diagonalized by cyclic Jacobi rotations, which keeps
//! high relative accuracy on the tiny eigenvalues that drive ill-posedness;
//! larger ones go through Householder tridiagonalization with implicit QR.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest dimension handled by the Jacobi eigensolver.
pub const JACOBI_MAX_DIM: usize = 64;

/// Relative tolerance below which negative eigenvalues of a PSD matrix are
/// treated as roundoff and clamped to zero.
pub const TOL_PSD: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Default relative rank cutoff: `dim * machine epsilon`.
pub fn default_rank_tol(dim: usize) -> f64 {
    dim.max(1) as f64 * f64::EPSILON
}

/// A dense symmetric positive-semidefinite matrix.
///
/// Construction symmetrizes the input as `(A + Aᵀ)/2`. Positive
/// semi-definiteness is checked lazily by [`sym_eigen`], which clamps
/// eigenvalues in `[-TOL_PSD·λ_max, 0)` to zero and rejects anything more
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix(DMatrix<f64>);

impl PsdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dims(format!(
                "PSD matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("PSD matrix must have dimension >= 1"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PSD matrix has non-finite entries"));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        PsdMatrix((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        PsdMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        PsdMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::invalid("diagonal entries must be finite and >= 0"));
        }
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `scale · XᵀX`, PSD by construction.
    pub fn gram(x: &DMatrix<f64>, scale: f64) -> Self {
        Self::symmetrized(x.tr_mul(x) * scale)
    }

    /// Projects an arbitrary symmetric matrix onto the PSD cone by clamping
    /// negative eigenvalues.
    pub fn project(m: &DMatrix<f64>) -> Result<Self> {
        let sym = Self::new(m.clone())?;
        let eig = symmetric_eigen(sym.as_matrix())?;
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        Ok(Self::symmetrized(reconstruct(&eig.eigenvectors, &clamped)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }

    pub fn scaled(&self, c: f64) -> Self {
        PsdMatrix(&self.0 * c)
    }

    /// Operator norm, i.e. the largest eigenvalue.
    pub fn op_norm(&self) -> Result<f64> {
        Ok(sym_eigen(self)?.max_eigenvalue())
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted non-increasing.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Column `i` is paired with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.get(0).copied().unwrap_or(0.0)
    }

    /// Number of eigenvalues strictly above `rank_tol · λ_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let lmax = self.max_eigenvalue();
        if lmax <= 0.0 {
            return 0;
        }
        self.eigenvalues.iter().filter(|&&l| l > rank_tol * lmax).count()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        reconstruct(&self.eigenvectors, &self.eigenvalues)
    }
}

fn reconstruct(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    &scaled * vectors.transpose()
}

/// Eigendecomposition of a general symmetric matrix (no PSD handling).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::dims(format!("eigensolver needs a square matrix, got {}x{}", n, m.ncols())));
    }
    if n == 0 {
        return Err(Error::invalid("eigensolver needs dimension >= 1"));
    }
    let (values, vectors) = if n <= JACOBI_MAX_DIM {
        jacobi(m)?
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100 * n)
            .ok_or(Error::NoConvergence { dim: n })?;
        (eig.eigenvalues, eig.eigenvectors)
    };
    Ok(sorted_descending(values, vectors))
}

fn sorted_descending(values: DVector<f64>, vectors: DMatrix<f64>) -> EigenDecomposition {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues = DVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let eigenvectors = DMatrix::from_columns(&order.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>());
    EigenDecomposition { eigenvalues, eigenvectors }
}

/// Cyclic Jacobi with the relative-accuracy skip rule: an off-diagonal entry
/// is annihilated unless it is negligible against its diagonal pair.
fn jacobi(input: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    if n == 1 {
        return Ok((DVector::from_element(1, a[(0, 0)]), v));
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= 0.5 * f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            return Ok((a.diagonal(), v));
        }
    }
    Err(Error::NoConvergence { dim: n })
}

/// Eigendecomposition of a PSD matrix, with roundoff-level negative
/// eigenvalues clamped to zero.
pub fn sym_eigen(a: &PsdMatrix) -> Result<EigenDecomposition> {
    let mut eig = symmetric_eigen(a.as_matrix())?;
    let lmax = eig.max_eigenvalue().max(0.0);
    let floor = -TOL_PSD * lmax;
    for l in eig.eigenvalues.iter_mut() {
        if *l < 0.0 {
            if *l < floor {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: *l });
            }
            *l = 0.0;
        }
    }
    Ok(eig)
}

/// Moore-Penrose pseudoinverse from the eigenpairs above `rank_tol · λ_max`.
/// A full-rank input yields its inverse.
pub fn pseudo_inverse(a: &PsdMatrix, rank_tol: Option<f64>) -> Result<PsdMatrix> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.dim()));
    let eig = sym_eigen(a)?;
    let r = eig.rank(tol);
    Ok(pinv_from_eigen(&eig, r))
}

/// Pseudoinverse keeping exactly the leading `rank` eigenpairs.
pub fn pseudo_inverse_rank(a: &PsdMatrix, rank: usize) -> Result<PsdMatrix> {
    let eig = sym_eigen(a)?;
    Ok(pinv_from_eigen(&eig, rank.min(a.dim())))
}

fn pinv_from_eigen(eig: &EigenDecomposition, rank: usize) -> PsdMatrix {
    let p = eig.eigenvectors.nrows();
    let mut out = DMatrix::zeros(p, p);
    for i in 0..rank {
        let l = eig.eigenvalues[i];
        if l <= 0.0 {
            break;
        }
        let v = eig.eigenvectors.column(i);
        out += (v * v.transpose()) / l;
    }
    PsdMatrix::symmetrized(out)
}

/// Number of eigenvalues above `rank_tol · λ_max`.
pub fn numerical_rank(a: &PsdMatrix, rank_tol: Option<f64>) -> Result<usize> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.dim()));
    Ok(sym_eigen(a)?.rank(tol))
}

/// `κ₂(A) = ‖A‖_op ‖A⁺‖_op`, restricted to the numerical range of `A`.
pub fn condition_number_psd(a: &PsdMatrix, rank_tol: Option<f64>) -> Result<f64> {
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.dim()));
    condition_from_eigen(&sym_eigen(a)?, tol)
}

pub(crate) fn condition_from_eigen(eig: &EigenDecomposition, rank_tol: f64) -> Result<f64> {
    let lmax = eig.max_eigenvalue();
    if lmax <= 0.0 {
        return Err(Error::UndefinedConditionNumber);
    }
    let r = eig.rank(rank_tol);
    Ok(lmax / eig.eigenvalues[r - 1])
}

/// Condition number of the sample covariance of the standardized data.
///
/// Constant columns are dropped; a rank-deficient standardized covariance
/// reports `f64::INFINITY`.
pub fn standardized_condition_number(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("standardized condition number needs n >= 2"));
    }
    let mut cols = Vec::new();
    for col in x.column_iter() {
        let mean = col.mean();
        let centered = col.map(|v| v - mean);
        let sd = (centered.norm_squared() / (n - 1) as f64).sqrt();
        let magnitude = col.amax().max(f64::MIN_POSITIVE);
        if sd > 1e-14 * magnitude {
            cols.push(centered / sd);
        }
    }
    if cols.is_empty() {
        return Err(Error::AllColumnsConstant);
    }
    let z = DMatrix::from_columns(&cols);
    let corr = PsdMatrix::gram(&z, 1.0 / (n - 1) as f64);
    let eig = sym_eigen(&corr)?;
    let lmax = eig.max_eigenvalue();
    let lmin = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if lmin <= 1e-12 * lmax {
        return Ok(f64::INFINITY);
    }
    Ok(lmax / lmin)
}

/// Modified Gram-Schmidt with one full re-orthogonalization pass.
///
/// Columns whose residual falls to `1e-12` of their input norm are dropped,
/// so the output may have fewer columns than the input.
pub fn orthonormalize(v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(v.ncols());
    for col in v.column_iter() {
        let input_norm = col.norm();
        if input_norm == 0.0 {
            continue;
        }
        let mut w = col.clone_owned();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= 1e-12 * input_norm {
            continue;
        }
        basis.push(w / norm);
    }
    if basis.is_empty() {
        return DMatrix::zeros(p, 0);
    }
    DMatrix::from_columns(&basis)
}

/// Largest absolute entry of `QᵀQ − I`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.tr_mul(q);
    let k = g.nrows();
    (g - DMatrix::identity(k, k)).amax()
}

/// Operator (spectral) norm of a general matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Canonical angles between the spans of two orthonormal `p×m` matrices,
/// sorted non-decreasing in `[0, π/2]`.
///
/// Cosines come from the singular values of `B₁ᵀB₂` and sines from those of
/// `(I − B₁B₁ᵀ)B₂`; each angle uses whichever is better conditioned, so tiny
/// angles are resolved to roundoff rather than to `√ε`.
pub fn principal_angles(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<Vec<f64>> {
    if b1.nrows() != b2.nrows() || b1.ncols() != b2.ncols() {
        return Err(Error::dims(format!(
            "principal angles need equal shapes, got {}x{} and {}x{}",
            b1.nrows(),
            b1.ncols(),
            b2.nrows(),
            b2.ncols()
        )));
    }
    for b in [b1, b2] {
        let deviation = orthonormality_defect(b);
        if deviation > 1e-10 {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    let m = b1.ncols();
    if m == 0 {
        return Ok(Vec::new());
    }
    let cross = b1.tr_mul(b2);
    let residual = b2 - b1 * &cross;
    let mut cos: Vec<f64> = cross.singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    let mut sin: Vec<f64> = residual.singular_values().iter().copied().collect();
    sin.sort_by(|a, b| a.total_cmp(b));
    // A p×m residual with p < m has only p singular values; pad with ones.
    sin.resize(m, 1.0);
    let mut angles: Vec<f64> = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let s = s.clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                s.asin()
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}
