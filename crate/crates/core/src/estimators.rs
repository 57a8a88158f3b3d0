//! Competing linear estimators and their evaluation metrics.
//!
//! Every estimator has a covariance form taking a [`CovariancePair`]. The
//! simulation harness also uses data forms that avoid building `p × p`
//! matrices when `p > n`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{build_krylov, GramOperator, KrylovBasis, SymmetricOperator};
use crate::linalg::{condition_from_eigen, default_rank_tol, pseudo_inverse, sym_eigen, symmetric_eigen, PsdMatrix};

/// Feature covariance, feature-response covariance and response second
/// moment of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_x: PsdMatrix,
    pub sigma_xy: DVector<f64>,
    /// `n⁻¹‖y‖²` for sample pairs, `E[y²]` for population pairs.
    pub sigma_yy: f64,
    /// Sample size, 0 for population pairs.
    pub n: usize,
}

impl CovariancePair {
    pub fn new(sigma_x: PsdMatrix, sigma_xy: DVector<f64>, sigma_yy: f64, n: usize) -> Result<Self> {
        if sigma_xy.len() != sigma_x.dim() {
            return Err(Error::dims(format!(
                "sigma_xy has length {}, sigma_x has dimension {}",
                sigma_xy.len(),
                sigma_x.dim()
            )));
        }
        Ok(CovariancePair { sigma_x, sigma_xy, sigma_yy, n })
    }

    pub fn dim(&self) -> usize {
        self.sigma_x.dim()
    }

    /// `‖(I − ΣΣ⁺)Σ_xy‖ / ‖Σ_xy‖`, zero when `Σ_xy = 0`.
    pub fn range_defect(&self) -> Result<f64> {
        let norm = self.sigma_xy.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let pinv = pseudo_inverse(&self.sigma_x, None)?;
        let projected = self.sigma_x.as_matrix() * (pinv.as_matrix() * &self.sigma_xy);
        Ok((&self.sigma_xy - projected).norm() / norm)
    }

    /// In-sample risk `σ_yy − 2βᵀΣ_xy + βᵀΣβ`, i.e. `n⁻¹‖y − Xβ‖²` for
    /// sample pairs.
    pub fn risk(&self, beta: &DVector<f64>) -> f64 {
        self.sigma_yy - 2.0 * beta.dot(&self.sigma_xy) + beta.dot(&self.sigma_x.mul_vec(beta))
    }
}

/// `Σ̂_x = n⁻¹XᵀX`, `Σ̂_xy = n⁻¹Xᵀy` with no centering.
pub fn sample_covariances(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<CovariancePair> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("design matrix has no rows"));
    }
    if y.len() != n {
        return Err(Error::dims(format!("X has {n} rows, y has length {}", y.len())));
    }
    let scale = 1.0 / n as f64;
    CovariancePair::new(PsdMatrix::gram(x, scale), x.tr_mul(y) * scale, y.norm_squared() * scale, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ls,
    Pls,
    Pcr,
    Ridge,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ls, Method::Pls, Method::Pcr, Method::Ridge, Method::Lasso];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::Pls => "pls",
            Method::Pcr => "pcr",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Output of a single fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub beta: DVector<f64>,
    pub method: Method,
    /// Number of latent components, active coefficients or effective degrees
    /// of freedom (rounded) depending on the method.
    pub dof: usize,
    /// Penalty for ridge and LASSO fits.
    pub lambda: Option<f64>,
    /// Condition number of the reduced covariance actually inverted.
    pub kappa_reduced: f64,
    pub metrics: BTreeMap<String, f64>,
    pub warning: Option<String>,
}

impl FitReport {
    pub fn new(beta: DVector<f64>, method: Method, dof: usize, kappa_reduced: f64) -> Self {
        FitReport { beta, method, dof, lambda: None, kappa_reduced, metrics: BTreeMap::new(), warning: None }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn in_sample_risk(&self) -> Option<f64> {
        self.metric("in_sample_risk")
    }

    pub fn with_risk(mut self, risk: f64) -> Self {
        self.metrics.insert("in_sample_risk".into(), risk);
        self
    }
}

/// `β̂_ls = Σ⁺Σ_xy`.
pub fn fit_min_norm_ls(cov: &CovariancePair) -> Result<FitReport> {
    SpectralCovariance::from_covariance(cov)?.ls(cov)
}

/// PLS with `s` latent components: least squares restricted to `𝒦_s(Σ, Σ_xy)`.
///
/// If the Krylov space has dimension below `s` the fit uses the full space
/// and `dof` reports the dimension actually used.
pub fn fit_pls(cov: &CovariancePair, s: usize) -> Result<FitReport> {
    let s = s.min(cov.dim());
    let (beta, kb, kappa) = pls_from_operator(&cov.sigma_x, &cov.sigma_xy, s)?;
    let risk = cov.risk(&beta);
    Ok(FitReport::new(beta, Method::Pls, kb.effective_dim, kappa).with_risk(risk))
}

/// PLS straight from data, applying `n⁻¹XᵀX` without forming it.
pub fn fit_pls_data(x: &DMatrix<f64>, y: &DVector<f64>, s: usize) -> Result<FitReport> {
    check_data(x, y)?;
    let n = x.nrows() as f64;
    let op = GramOperator::new(x, 1.0 / n);
    let b = x.tr_mul(y) / n;
    let (beta, kb, kappa) = pls_from_operator(&op, &b, s.clamp(1, x.ncols()))?;
    let risk = (y - x * &beta).norm_squared() / n;
    Ok(FitReport::new(beta, Method::Pls, kb.effective_dim, kappa).with_risk(risk))
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("design matrix is empty"));
    }
    if y.len() != x.nrows() {
        return Err(Error::dims(format!("X has {} rows, y has length {}", x.nrows(), y.len())));
    }
    Ok(())
}

fn pls_from_operator<A: SymmetricOperator + ?Sized>(
    a: &A,
    b: &DVector<f64>,
    s: usize,
) -> Result<(DVector<f64>, KrylovBasis, f64)> {
    let kb = build_krylov(a, b, s.max(1), None)?;
    let coef = solve_projected(&kb)?;
    let kappa = tridiag_condition(&kb)?;
    Ok((&kb.basis * coef, kb, kappa))
}

/// Minimizer of `‖Aζ − b‖₂` over `ζ ∈ 𝒦_s(A, b)`.
///
/// Coincides with the PLS fit once `s` reaches the Krylov dimension. Below
/// that it is the minimal-residual solution of the normal equations, not the
/// risk minimizer returned by [`fit_pls`].
pub fn minimal_residual_pls(a: &PsdMatrix, b: &DVector<f64>, s: usize) -> Result<DVector<f64>> {
    let kb = build_krylov(a, b, s.clamp(1, a.dim()), None)?;
    let ak = a.as_matrix() * &kb.basis;
    let eps = f64::EPSILON * ak.amax();
    let coef = ak
        .svd(true, true)
        .solve(b, eps)
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok(&kb.basis * coef)
}

/// Solves `T α = ‖b‖e₁` for the projected system of a natural basis.
///
/// Uses the tridiagonal `LDLᵀ` factorization and falls back to the
/// pseudoinverse when a pivot is negligible.
pub fn solve_projected(kb: &KrylovBasis) -> Result<DVector<f64>> {
    let s = kb.effective_dim;
    let mut rhs = DVector::zeros(s);
    rhs[0] = kb.seed_norm;
    let scale = kb.tridiag.amax();
    let tiny = 1e-13 * scale;
    let (alpha, beta) = (&kb.alpha, &kb.beta);

    let mut d = vec![0.0; s];
    let mut l = vec![0.0; s.saturating_sub(1)];
    let mut stable = true;
    for i in 0..s {
        d[i] = alpha[i] - if i > 0 { l[i - 1] * beta[i - 1] } else { 0.0 };
        if d[i].abs() <= tiny || !d[i].is_finite() {
            stable = false;
            break;
        }
        if i + 1 < s {
            l[i] = beta[i] / d[i];
        }
    }
    if !stable {
        let t = PsdMatrix::new(kb.tridiag.clone())?;
        return Ok(pseudo_inverse(&t, None)?.mul_vec(&rhs));
    }
    let mut z = rhs;
    for i in 1..s {
        z[i] -= l[i - 1] * z[i - 1];
    }
    let mut x = DVector::zeros(s);
    for i in (0..s).rev() {
        x[i] = z[i] / d[i] - if i + 1 < s { l[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}

/// `κ₂(T_s)` of the projected tridiagonal matrix.
pub fn tridiag_condition(kb: &KrylovBasis) -> Result<f64> {
    let eig = symmetric_eigen(&kb.tridiag)?;
    let lmax = eig.max_eigenvalue();
    let lmin = eig.eigenvalues[eig.eigenvalues.len() - 1];
    if lmax <= 0.0 {
        return Err(Error::UndefinedConditionNumber);
    }
    if lmin <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(lmax / lmin)
}

/// Eigenpairs of a covariance restricted to its numerical range.
///
/// Serves least squares, PCR and ridge from a single decomposition. For wide
/// data (`p > n`) the eigenpairs come from the `n × n` Gram matrix.
#[derive(Debug, Clone)]
pub struct SpectralCovariance {
    /// Positive eigenvalues above the rank cutoff, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `p × rank`.
    pub eigenvectors: DMatrix<f64>,
    pub dim: usize,
}

impl SpectralCovariance {
    pub fn from_covariance(cov: &CovariancePair) -> Result<Self> {
        Self::from_psd(&cov.sigma_x)
    }

    pub fn from_psd(a: &PsdMatrix) -> Result<Self> {
        let p = a.dim();
        let eig = sym_eigen(a)?;
        let r = eig.rank(default_rank_tol(p));
        Ok(SpectralCovariance {
            eigenvalues: eig.eigenvalues.as_slice()[..r].to_vec(),
            eigenvectors: eig.eigenvectors.columns(0, r).into_owned(),
            dim: p,
        })
    }

    /// Spectrum of `n⁻¹XᵀX`.
    pub fn from_data(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput("design matrix is empty"));
        }
        let scale = 1.0 / n as f64;
        if p <= n {
            return Self::from_psd(&PsdMatrix::gram(x, scale));
        }
        let gram = PsdMatrix::new(x * x.transpose() * scale)?;
        let eig = sym_eigen(&gram)?;
        let r = eig.rank(default_rank_tol(p));
        let mut vectors = x.tr_mul(&eig.eigenvectors.columns(0, r));
        for (j, mut col) in vectors.column_iter_mut().enumerate() {
            col /= (eig.eigenvalues[j] / scale).sqrt();
        }
        Ok(SpectralCovariance { eigenvalues: eig.eigenvalues.as_slice()[..r].to_vec(), eigenvectors: vectors, dim: p })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_i f(λ_i) v_i v_iᵀ b` over the leading `k` eigenpairs.
    fn filter(&self, b: &DVector<f64>, k: usize, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let v = self.eigenvectors.columns(0, k);
        let mut coef = v.tr_mul(b);
        for (i, c) in coef.iter_mut().enumerate() {
            *c *= f(self.eigenvalues[i]);
        }
        v * coef
    }

    fn kappa(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(&hi), Some(&lo)) => hi / lo,
            _ => f64::NAN,
        }
    }

    pub fn ls(&self, cov: &CovariancePair) -> Result<FitReport> {
        let beta = self.ls_beta(&cov.sigma_xy)?;
        let risk = cov.risk(&beta);
        Ok(FitReport::new(beta, Method::Ls, self.rank(), self.kappa()).with_risk(risk))
    }

    pub fn ls_beta(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(b)?;
        Ok(self.filter(b, self.rank(), |l| 1.0 / l))
    }

    /// PCR on the top `s` eigenvectors: `β = Σ_{i≤s} λ_i⁻¹ v_i v_iᵀ b`.
    pub fn pcr_beta(&self, b: &DVector<f64>, s: usize) -> Result<(DVector<f64>, f64)> {
        self.check_len(b)?;
        if s == 0 || s > self.dim {
            return Err(Error::invalid(format!("PCR dimension {s} outside 1..={}", self.dim)));
        }
        if s > self.rank() {
            return Err(Error::PcrRankExceeded { requested: s, rank: self.rank() });
        }
        Ok((self.filter(b, s, |l| 1.0 / l), self.eigenvalues[0] / self.eigenvalues[s - 1]))
    }

    /// Ridge on the numerical range: `β = Σ_i (λ_i + λ)⁻¹ v_i v_iᵀ b`.
    /// Exact whenever `b` lies in the range, as sample covariances do.
    pub fn ridge_beta(&self, b: &DVector<f64>, lambda: f64) -> Result<(DVector<f64>, f64)> {
        self.check_len(b)?;
        let beta = self.filter(b, self.rank(), |l| 1.0 / (l + lambda));
        let lo = if self.rank() < self.dim { 0.0 } else { *self.eigenvalues.last().unwrap_or(&0.0) };
        let hi = self.eigenvalues.first().copied().unwrap_or(0.0);
        Ok((beta, (hi + lambda) / (lo + lambda)))
    }

    /// Effective degrees of freedom `Σ_i λ_i/(λ_i + λ)`.
    pub fn ridge_dof(&self, lambda: f64) -> f64 {
        self.eigenvalues.iter().map(|&l| l / (l + lambda)).sum()
    }

    /// Penalty with `ridge_dof(λ) = dof`, by bisection in `log λ`.
    pub fn ridge_lambda_for_dof(&self, dof: f64) -> Result<f64> {
        let r = self.rank() as f64;
        if !(dof > 0.0 && dof < r) {
            return Err(Error::invalid(format!("ridge dof {dof} must lie in (0, {r})")));
        }
        let top = self.eigenvalues[0];
        let (mut lo, mut hi) = ((top * 1e-16).ln(), (top * 1e16).ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.ridge_dof(mid.exp()) > dof {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    fn check_len(&self, b: &DVector<f64>) -> Result<()> {
        if b.len() != self.dim {
            return Err(Error::dims(format!("vector has length {}, covariance dimension {}", b.len(), self.dim)));
        }
        Ok(())
    }
}

/// PCR with `s` principal components.
pub fn fit_pcr(cov: &CovariancePair, s: usize) -> Result<FitReport> {
    let spectral = SpectralCovariance::from_covariance(cov)?;
    let (beta, kappa) = spectral.pcr_beta(&cov.sigma_xy, s)?;
    let risk = cov.risk(&beta);
    Ok(FitReport::new(beta, Method::Pcr, s, kappa).with_risk(risk))
}

/// `β̂ = (Σ + λI)⁻¹Σ_xy`, by Cholesky factorization of the shifted matrix.
pub fn fit_ridge(cov: &CovariancePair, lambda: f64) -> Result<FitReport> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("ridge penalty must be positive and finite"));
    }
    let p = cov.dim();
    let shifted = cov.sigma_x.as_matrix() + DMatrix::identity(p, p) * lambda;
    let beta = shifted
        .cholesky()
        .ok_or_else(|| Error::invalid("shifted covariance is not positive definite"))?
        .solve(&cov.sigma_xy);
    let eig = sym_eigen(&cov.sigma_x)?;
    let hi = eig.max_eigenvalue() + lambda;
    let lo = eig.eigenvalues[p - 1] + lambda;
    let effective: f64 = eig.eigenvalues.iter().map(|&l| l / (l + lambda)).sum();
    let risk = cov.risk(&beta);
    let mut report = FitReport::new(beta, Method::Ridge, effective.round() as usize, hi / lo).with_risk(risk);
    report.lambda = Some(lambda);
    report.metrics.insert("effective_dof".into(), effective);
    Ok(report)
}

/// Condition number of a PSD covariance, `NaN` for the zero matrix.
pub(crate) fn kappa_or_nan(a: &PsdMatrix) -> Result<f64> {
    let eig = sym_eigen(a)?;
    Ok(condition_from_eigen(&eig, default_rank_tol(a.dim())).unwrap_or(f64::NAN))
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Fills `rel_approx_error`, `correlation` and, given `beta0`,
/// `rel_estimation_error`.
pub fn evaluate(
    mut report: FitReport,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta0: Option<&DVector<f64>>,
) -> Result<FitReport> {
    check_data(x, y)?;
    if x.ncols() != report.beta.len() {
        return Err(Error::dims(format!("X has {} columns, beta has length {}", x.ncols(), report.beta.len())));
    }
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Err(Error::ZeroResponse);
    }
    let fitted = x * &report.beta;
    report.metrics.insert("rel_approx_error".into(), (&fitted - y).norm() / y_norm);
    report.metrics.insert("correlation".into(), pearson(&fitted, y));
    if let Some(b0) = beta0 {
        if b0.len() != report.beta.len() {
            return Err(Error::dims("beta0 and beta differ in length"));
        }
        let b0_norm = b0.norm();
        if b0_norm > 0.0 {
            report.metrics.insert("rel_estimation_error".into(), (&report.beta - b0).norm() / b0_norm);
        }
    }
    Ok(report)
}

/// Fills `rel_prediction_error` and `correlation` on held-out data.
pub fn evaluate_prediction(mut report: FitReport, x_test: &DMatrix<f64>, y_test: &DVector<f64>) -> Result<FitReport> {
    check_data(x_test, y_test)?;
    if x_test.ncols() != report.beta.len() {
        return Err(Error::dims(format!(
            "test design has {} columns, beta has length {}",
            x_test.ncols(),
            report.beta.len()
        )));
    }
    let y_norm = y_test.norm();
    if y_norm == 0.0 {
        return Err(Error::ZeroResponse);
    }
    let predicted = x_test * &report.beta;
    report.metrics.insert("rel_prediction_error".into(), (&predicted - y_test).norm() / y_norm);
    report.metrics.insert("correlation".into(), pearson(&predicted, y_test));
    Ok(report)
}
