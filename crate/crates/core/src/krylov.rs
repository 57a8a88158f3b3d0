//! Krylov spaces, natural orthonormal bases and the Krylov condition number.
//!
//! Bases are built by the symmetric Lanczos recurrence with full
//! re-orthogonalization. The first basis vector is always `b/‖b‖` and every
//! off-diagonal coefficient `β_j` is positive, which fixes the sign of each
//! column. With that convention `K_sᵀb = ‖b‖e₁` exactly and the basis varies
//! continuously with `(A, b)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{principal_angles, spectral_norm, PsdMatrix};

/// Default relative breakdown tolerance of the Lanczos recurrence.
pub const DEFAULT_BREAKDOWN_TOL: f64 = 1e-10;

/// A symmetric linear operator that can be applied to vectors.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Cheap upper bound on the operator norm, used to scale the breakdown
    /// test.
    fn norm_bound(&self) -> f64;
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }

    fn norm_bound(&self) -> f64 {
        self.norm()
    }
}

impl SymmetricOperator for PsdMatrix {
    fn dim(&self) -> usize {
        PsdMatrix::dim(self)
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.mul_vec(v)
    }

    fn norm_bound(&self) -> f64 {
        self.as_matrix().norm()
    }
}

/// The sample covariance `scale · XᵀX` applied without forming it.
#[derive(Debug, Clone, Copy)]
pub struct GramOperator<'a> {
    pub x: &'a DMatrix<f64>,
    pub scale: f64,
}

impl<'a> GramOperator<'a> {
    pub fn new(x: &'a DMatrix<f64>, scale: f64) -> Self {
        GramOperator { x, scale }
    }
}

impl SymmetricOperator for GramOperator<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(&(self.x * v)) * self.scale
    }

    fn norm_bound(&self) -> f64 {
        // The trace bounds the largest eigenvalue of a PSD matrix.
        self.x.norm_squared() * self.scale
    }
}

/// Natural orthonormal basis of `𝒦_s(A, b)` and its tridiagonal projection.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovBasis {
    /// `p × effective_dim`, orthonormal, Lanczos order.
    pub basis: DMatrix<f64>,
    /// `T = KᵀAK`, symmetric tridiagonal.
    pub tridiag: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub effective_dim: usize,
    pub breakdown: bool,
    pub seed_norm: f64,
}

impl KrylovBasis {
    /// The basis of the leading `s`-dimensional subspace.
    pub fn leading(&self, s: usize) -> KrylovBasis {
        let s = s.min(self.effective_dim);
        let alpha = self.alpha[..s].to_vec();
        let beta = self.beta[..s.saturating_sub(1)].to_vec();
        KrylovBasis {
            basis: self.basis.columns(0, s).into_owned(),
            tridiag: tridiagonal(&alpha, &beta),
            alpha,
            beta,
            effective_dim: s,
            breakdown: self.breakdown && s == self.effective_dim,
            seed_norm: self.seed_norm,
        }
    }

    /// Orthogonal projector onto the Krylov space.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

pub(crate) fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let s = alpha.len();
    let mut t = DMatrix::zeros(s, s);
    for i in 0..s {
        t[(i, i)] = alpha[i];
        if i + 1 < s {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Incremental Lanczos factorization, grown one vector at a time.
pub struct Lanczos<'a, A: SymmetricOperator + ?Sized> {
    op: &'a A,
    q: Vec<DVector<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    residual: DVector<f64>,
    threshold: f64,
    seed_norm: f64,
    breakdown: bool,
}

impl<'a, A: SymmetricOperator + ?Sized> Lanczos<'a, A> {
    /// Starts the factorization with `q₁ = b/‖b‖`.
    pub fn new(op: &'a A, b: &DVector<f64>, breakdown_tol: f64) -> Result<Self> {
        if b.len() != op.dim() {
            return Err(Error::dims(format!("seed has length {}, operator has dimension {}", b.len(), op.dim())));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Krylov seed has non-finite entries"));
        }
        let seed_norm = b.norm();
        if seed_norm == 0.0 {
            return Err(Error::EmptyKrylovSeed);
        }
        let mut lanczos = Lanczos {
            op,
            q: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            residual: DVector::zeros(0),
            threshold: breakdown_tol * op.norm_bound(),
            seed_norm,
            breakdown: false,
        };
        lanczos.push(b / seed_norm);
        Ok(lanczos)
    }

    fn push(&mut self, q: DVector<f64>) {
        let mut w = self.op.apply(&q);
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if let (Some(prev), Some(&b)) = (self.q.last(), self.beta.last()) {
            w.axpy(-b, prev, 1.0);
        }
        self.q.push(q);
        for _ in 0..2 {
            for v in &self.q {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        self.alpha.push(a);
        self.residual = w;
    }

    /// Appends one basis vector. Returns `false` on breakdown or once the
    /// basis spans the whole space.
    pub fn extend(&mut self) -> bool {
        if self.breakdown || self.q.len() == self.op.dim() {
            return false;
        }
        let b = self.residual.norm();
        if b <= self.threshold {
            self.breakdown = true;
            return false;
        }
        let q = &self.residual / b;
        self.beta.push(b);
        self.push(q);
        true
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn breakdown(&self) -> bool {
        self.breakdown
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn seed_norm(&self) -> f64 {
        self.seed_norm
    }

    /// The first `s` basis vectors.
    pub fn basis(&self, s: usize) -> DMatrix<f64> {
        DMatrix::from_columns(&self.q[..s.min(self.q.len())])
    }

    /// Snapshot of the current factorization.
    pub fn to_basis(&self) -> KrylovBasis {
        let s = self.q.len();
        KrylovBasis {
            basis: self.basis(s),
            tridiag: tridiagonal(&self.alpha, &self.beta),
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            effective_dim: s,
            breakdown: self.breakdown,
            seed_norm: self.seed_norm,
        }
    }
}

/// Natural orthonormal basis of `𝒦_s(A, b)`.
///
/// Stops early with `breakdown = true` when the next Lanczos residual is
/// below `breakdown_tol · ‖A‖`.
pub fn build_krylov<A: SymmetricOperator + ?Sized>(
    a: &A,
    b: &DVector<f64>,
    s: usize,
    breakdown_tol: Option<f64>,
) -> Result<KrylovBasis> {
    if s == 0 || s > a.dim() {
        return Err(Error::invalid(format!("Krylov dimension {s} outside 1..={}", a.dim())));
    }
    let mut lanczos = Lanczos::new(a, b, breakdown_tol.unwrap_or(DEFAULT_BREAKDOWN_TOL))?;
    while lanczos.len() < s {
        if !lanczos.extend() {
            break;
        }
    }
    Ok(lanczos.to_basis())
}

/// Dimension of the full Krylov space `𝒦(A, b)`.
pub fn krylov_dimension<A: SymmetricOperator + ?Sized>(
    a: &A,
    b: &DVector<f64>,
    breakdown_tol: Option<f64>,
) -> Result<usize> {
    Ok(build_krylov(a, b, a.dim(), breakdown_tol)?.effective_dim)
}

/// The projected pair `(KᵀAK, Kᵀb)`.
pub fn projected_system<A: SymmetricOperator + ?Sized>(
    a: &A,
    b: &DVector<f64>,
    kb: &KrylovBasis,
) -> Result<(PsdMatrix, DVector<f64>)> {
    if kb.basis.nrows() != a.dim() || b.len() != a.dim() {
        return Err(Error::dims(format!(
            "basis has {} rows, operator dimension {}, seed length {}",
            kb.basis.nrows(),
            a.dim(),
            b.len()
        )));
    }
    Ok((PsdMatrix::new(kb.tridiag.clone())?, kb.basis.tr_mul(b)))
}

/// Largest canonical angle between two equal-dimension spans.
pub fn subspace_distance(b1: &DMatrix<f64>, b2: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(b1, b2)?.last().copied().unwrap_or(0.0))
}

/// Distance between two natural bases, `2·asin(‖K̃ − K‖/2)`.
///
/// This is the rotation angle needed to carry one basis onto the other and,
/// unlike the canonical angle, it does not vanish when both bases span the
/// same space. To first order it equals `‖K̃ − K‖_op`.
pub fn natural_basis_distance(k: &DMatrix<f64>, k_tilde: &DMatrix<f64>) -> Result<f64> {
    if k.shape() != k_tilde.shape() {
        return Err(Error::dims(format!("bases have shapes {:?} and {:?}", k.shape(), k_tilde.shape())));
    }
    let diff = spectral_norm(&(k_tilde - k));
    Ok(2.0 * (diff / 2.0).min(1.0).asin())
}

/// Empirical Krylov condition number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaBEstimate {
    pub value: f64,
    pub epsilons: Vec<f64>,
    /// `None` where fewer than half the draws kept the Krylov dimension.
    pub max_ratio_per_epsilon: Vec<Option<f64>>,
    pub admissible_per_epsilon: Vec<usize>,
    pub trials: usize,
    pub converged: bool,
}

/// Perturbation sizes used when the caller does not supply a grid.
pub fn default_eps_grid() -> Vec<f64> {
    vec![1e-3, 1e-4, 1e-5, 1e-6]
}

/// Draws a symmetric Gaussian matrix scaled to operator norm `target`.
pub(crate) fn symmetric_direction(p: usize, target: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let g: DMatrix<f64> = (&g + g.transpose()) * 0.5;
    let norm = spectral_norm(&g);
    if norm == 0.0 {
        return g;
    }
    g * (target / norm)
}

/// Draws a Gaussian vector scaled to Euclidean norm `target`.
pub(crate) fn vector_direction(p: usize, target: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    v * (target / norm)
}

/// Monte-Carlo estimate of `κ_b(K_m)`.
///
/// For every `ε` in the grid, `trials` symmetric perturbations with
/// `‖ΔA‖ = ε‖A‖` and `‖Δb‖ = ε‖b‖` are drawn, the perturbed natural basis is
/// built and the ratio of [`natural_basis_distance`] to `ε` recorded. Draws
/// that change the Krylov dimension are discarded. The estimate is the
/// largest ratio over all levels with at least half their draws admissible.
/// Trial `t` at level `e` uses seed `seed + t` on stream `e`.
pub fn estimate_kappa_b(
    a: &PsdMatrix,
    b: &DVector<f64>,
    m: usize,
    eps_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<KappaBEstimate> {
    if trials == 0 {
        return Err(Error::invalid("kappa_b needs at least one trial"));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("epsilon grid must be non-empty and positive"));
    }
    let reference = build_krylov(a, b, m, None)?;
    if reference.effective_dim != m {
        return Err(Error::invalid(format!(
            "Krylov dimension is {}, smaller than m = {m}",
            reference.effective_dim
        )));
    }
    let p = a.dim();
    let a_norm = spectral_norm(a.as_matrix());
    let b_norm = b.norm();

    let mut max_ratio = Vec::with_capacity(eps_grid.len());
    let mut admissible = Vec::with_capacity(eps_grid.len());
    for (level, &eps) in eps_grid.iter().enumerate() {
        let ratios: Vec<Option<f64>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                rng.set_stream(level as u64);
                let da = symmetric_direction(p, eps * a_norm, &mut rng);
                let db = vector_direction(p, eps * b_norm, &mut rng);
                let a_tilde = a.as_matrix() + da;
                let b_tilde = b + db;
                let kb = build_krylov(&a_tilde, &b_tilde, m, None).ok()?;
                if kb.effective_dim != m {
                    return None;
                }
                natural_basis_distance(&reference.basis, &kb.basis).ok().map(|d| d / eps)
            })
            .collect();
        let kept: Vec<f64> = ratios.into_iter().flatten().collect();
        admissible.push(kept.len());
        max_ratio.push(if 2 * kept.len() >= trials { kept.into_iter().reduce(f64::max) } else { None });
    }

    let value = max_ratio.iter().flatten().copied().reduce(f64::max).ok_or(Error::PerturbationGridTooCoarse)?;

    // Compare the two smallest admissible levels.
    let mut by_eps: Vec<(f64, f64)> = eps_grid
        .iter()
        .zip(&max_ratio)
        .filter_map(|(&e, r)| r.map(|r| (e, r)))
        .collect();
    by_eps.sort_by(|x, y| x.0.total_cmp(&y.0));
    let converged = match by_eps.as_slice() {
        [(_, r1), (_, r2), ..] => (r1 - r2).abs() <= 0.2 * r1.max(*r2),
        _ => false,
    };

    Ok(KappaBEstimate {
        value,
        epsilons: eps_grid.to_vec(),
        max_ratio_per_epsilon: max_ratio,
        admissible_per_epsilon: admissible,
        trials,
        converged,
    })
}
