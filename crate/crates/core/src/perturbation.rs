//! Monte-Carlo audits of the perturbation bounds for least squares, Krylov
//! bases and PLS.
//!
//! Every audit draws perturbed problems `(Ã, b̃)` with relative size `ε`,
//! measures the change in the quantity of interest and compares it to the
//! bound. Inadmissible draws (assumptions violated) are reported without a
//! verdict.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{fit_pls, solve_projected};
use crate::krylov::{
    build_krylov, default_eps_grid, estimate_kappa_b, subspace_distance, symmetric_direction, vector_direction,
    KappaBEstimate, KrylovBasis, Lanczos, DEFAULT_BREAKDOWN_TOL,
};
use crate::linalg::{pseudo_inverse_rank, spectral_norm, sym_eigen, symmetric_eigen, EigenDecomposition, PsdMatrix};
use crate::simulation::GeneratedModel;

pub const MAX_PERTURB_ATTEMPTS: usize = 32;
/// Largest tolerated change of the perturbation scale caused by PSD projection.
pub const MAX_PSD_DRIFT: f64 = 0.05;
/// Relative eigenvalue cutoff for ranks and ranges in the audits.
pub const AUDIT_RANK_TOL: f64 = 1e-10;
/// Absolute slack allowed when comparing an observation with its bound.
pub const VERDICT_SLACK: f64 = 1e-10;
/// Sign patterns are searched exhaustively up to this basis size.
pub const EXHAUSTIVE_SIGN_MAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremTag {
    LsPert,
    PlsPert,
    KrylovPert,
    /// Projected right-hand side, `‖b̃_m − b_m‖ ≤ 2ε‖b_m‖`.
    KrylovProjB,
    /// Projected matrix, `‖Ã_m − A_m‖ ≤ 24κ_b‖A‖ε`.
    KrylovProjA,
    CgneStop,
    PopPlsBias,
    PopKrylovDistance,
}

impl TheoremTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TheoremTag::LsPert => "ls_pert",
            TheoremTag::PlsPert => "pls_pert",
            TheoremTag::KrylovPert => "krylov_pert",
            TheoremTag::KrylovProjB => "krylov_proj_b",
            TheoremTag::KrylovProjA => "krylov_proj_a",
            TheoremTag::CgneStop => "cgne_stop",
            TheoremTag::PopPlsBias => "pop_pls_bias",
            TheoremTag::PopKrylovDistance => "pop_krylov_distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub theorem: TheoremTag,
    pub trial: usize,
    pub epsilon: f64,
    pub admissible: bool,
    /// The bounded quantity, e.g. the relative change of the solution.
    pub observed: f64,
    /// `observed / ε` (0 when both vanish).
    pub observed_ratio: f64,
    pub bound: f64,
    /// `None` for inadmissible draws.
    pub satisfied: Option<bool>,
    pub details: BTreeMap<String, f64>,
    pub warning: Option<String>,
}

impl PerturbationReport {
    fn new(theorem: TheoremTag, trial: usize, epsilon: f64, admissible: bool, observed: f64, bound: f64) -> Self {
        let observed_ratio = if epsilon > 0.0 {
            observed / epsilon
        } else if observed == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        PerturbationReport {
            theorem,
            trial,
            epsilon,
            admissible,
            observed,
            observed_ratio,
            bound,
            satisfied: admissible.then(|| observed <= bound + VERDICT_SLACK),
            details: BTreeMap::new(),
            warning: None,
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    fn with_details(mut self, details: &BTreeMap<String, f64>) -> Self {
        self.details.extend(details.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    fn inadmissible(theorem: TheoremTag, trial: usize, epsilon: f64, bound: f64, warning: String) -> Self {
        let mut r = PerturbationReport::new(theorem, trial, epsilon, false, f64::NAN, bound);
        r.warning = Some(warning);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub total: usize,
    pub admissible: usize,
    pub satisfied: usize,
    /// `satisfied / admissible`, NaN when nothing was admissible.
    pub rate: f64,
}

pub fn summarize(reports: &[PerturbationReport]) -> AuditSummary {
    let admissible = reports.iter().filter(|r| r.admissible).count();
    let satisfied = reports.iter().filter(|r| r.satisfied == Some(true)).count();
    let rate = if admissible == 0 { f64::NAN } else { satisfied as f64 / admissible as f64 };
    AuditSummary { total: reports.len(), admissible, satisfied, rate }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PreserveFlags {
    /// Keep `rank(Ã) = rank(A)`.
    pub rank: bool,
    /// Put `b̃` in the range of `Ã`.
    pub range: bool,
}

/// Draws `(Ã, b̃)` with `‖Ã − A‖ = ε‖A‖` and `‖b̃ − b‖ = ε‖b‖`.
///
/// Without rank preservation `Ã` is the PSD projection of `A + tG` for a
/// symmetric Gaussian `G`, with `t` bisected so that the projected
/// difference has the target norm; a draw is rejected when projection moved
/// `t` by more than 5%. Rank preservation uses an additive draw when `A` is
/// definite enough to stay definite, and the congruence
/// `(I + tE)A(I + tE)ᵀ` otherwise. With `preserve.range`, `b̃` is drawn
/// inside the range of `Ã`.
pub fn perturb_problem(
    a: &PsdMatrix,
    b: &DVector<f64>,
    epsilon: f64,
    seed: u64,
    preserve: PreserveFlags,
) -> Result<(PsdMatrix, DVector<f64>)> {
    let p = a.dim();
    if b.len() != p {
        return Err(Error::dims(format!("A is {p}x{p}, b has length {}", b.len())));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok((a.clone(), b.clone()));
    }
    let eig = sym_eigen(a)?;
    let a_norm = eig.max_eigenvalue();
    let rank = eig.rank(AUDIT_RANK_TOL);
    let lambda_min = if rank > 0 { eig.eigenvalues[rank - 1] } else { 0.0 };
    let target_a = epsilon * a_norm;
    let target_b = epsilon * b.norm();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_drift = 0.0f64;
    for attempt in 1..=MAX_PERTURB_ATTEMPTS {
        let a_tilde = if target_a == 0.0 {
            Some(a.clone())
        } else if preserve.rank && !(rank == p && target_a < lambda_min) {
            congruence_perturbation(a, target_a, &mut rng)
        } else {
            let (candidate, drift) = projected_perturbation(a, target_a, &mut rng)?;
            worst_drift = worst_drift.max(drift);
            (drift <= MAX_PSD_DRIFT).then_some(candidate)
        };
        let Some(a_tilde) = a_tilde else { continue };
        let b_tilde = if preserve.range {
            let r = if preserve.rank { rank } else { sym_eigen(&a_tilde)?.rank(AUDIT_RANK_TOL) };
            range_perturbation(&a_tilde, r, b, target_b, &mut rng)?
        } else {
            Some(b + vector_direction(p, target_b, &mut rng))
        };
        if let Some(b_tilde) = b_tilde {
            if attempt > 1 {
                log::debug!("perturbation accepted after {attempt} attempts");
            }
            return Ok((a_tilde, b_tilde));
        }
    }
    Err(Error::PsdProjectionFailed { attempts: MAX_PERTURB_ATTEMPTS, drift: worst_drift })
}

/// Finds `t ∈ (0, hi]` with `f(t) = target` for an increasing-on-average
/// `f` with `f(0) = 0`.
fn bisect_scale(f: impl Fn(f64) -> f64, target: f64, mut hi: f64, max_hi: f64) -> Option<f64> {
    while f(hi) < target {
        hi *= 2.0;
        if hi > max_hi {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn congruence(a: &DMatrix<f64>, e: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let m = DMatrix::identity(a.nrows(), a.nrows()) + e * t;
    &m * a * m.transpose()
}

fn congruence_perturbation(a: &PsdMatrix, target: f64, rng: &mut ChaCha8Rng) -> Option<PsdMatrix> {
    let am = a.as_matrix();
    let e = symmetric_direction(a.dim(), 1.0, rng);
    let dist = |t: f64| spectral_norm(&(congruence(am, &e, t) - am));
    let guess = target / (2.0 * spectral_norm(&(&e * am)).max(f64::MIN_POSITIVE));
    // Keep I + tE invertible.
    let t = bisect_scale(dist, target, guess.min(0.25), 0.5)?;
    PsdMatrix::new(congruence(am, &e, t)).ok()
}

/// Returns the candidate and the relative drift of its scale from `target`.
fn projected_perturbation(a: &PsdMatrix, target: f64, rng: &mut ChaCha8Rng) -> Result<(PsdMatrix, f64)> {
    let am = a.as_matrix();
    let g = symmetric_direction(a.dim(), 1.0, rng);
    let project = |t: f64| -> DMatrix<f64> {
        let m = am + &g * t;
        match symmetric_eigen(&m) {
            Ok(eig) => clamp_negative(eig),
            Err(_) => m,
        }
    };
    let direct = am + &g * target;
    let eig = symmetric_eigen(&direct)?;
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return Ok((PsdMatrix::new(direct)?, 0.0));
    }
    let dist = |t: f64| spectral_norm(&(project(t) - am));
    match bisect_scale(dist, target, target, 64.0 * target) {
        Some(t) => Ok((PsdMatrix::new(project(t))?, (t / target - 1.0).abs())),
        None => Ok((PsdMatrix::new(project(target))?, f64::INFINITY)),
    }
}

fn clamp_negative(mut eig: EigenDecomposition) -> DMatrix<f64> {
    for l in eig.eigenvalues.iter_mut() {
        *l = l.max(0.0);
    }
    eig.reconstruct()
}

/// `b̃ = Π(b + t v)` with `Π` the projector onto the leading `rank`
/// eigenvectors of `Ã` and `t` solving `‖b̃ − b‖ = target`. `None` when no
/// such `t` exists for this draw.
fn range_perturbation(
    a_tilde: &PsdMatrix,
    rank: usize,
    b: &DVector<f64>,
    target: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<DVector<f64>>> {
    let p = a_tilde.dim();
    let basis = if rank == p {
        None
    } else {
        Some(sym_eigen(a_tilde)?.eigenvectors.columns(0, rank).into_owned())
    };
    let project = |v: &DVector<f64>| match &basis {
        None => v.clone(),
        Some(q) => q * q.tr_mul(v),
    };
    let c = project(b) - b;
    let w = project(&vector_direction(p, 1.0, rng));
    let (ww, cw, cc) = (w.norm_squared(), c.dot(&w), c.norm_squared());
    if ww == 0.0 {
        return Ok(None);
    }
    let disc = cw * cw - ww * (cc - target * target);
    if disc < 0.0 {
        return Ok(None);
    }
    let t = (-cw + disc.sqrt()) / ww;
    Ok(Some(b + c + w * t))
}

/// Rejects right-hand sides that are not in the range of `A`.
fn check_range(a: &PsdMatrix, b: &DVector<f64>) -> Result<(EigenDecomposition, usize)> {
    if b.len() != a.dim() {
        return Err(Error::dims(format!("A is {0}x{0}, b has length {1}", a.dim(), b.len())));
    }
    let eig = sym_eigen(a)?;
    let rank = eig.rank(AUDIT_RANK_TOL);
    if rank == 0 {
        return Err(Error::invalid("A is zero"));
    }
    let q = eig.eigenvectors.columns(0, rank);
    let defect = (b - q * q.tr_mul(b)).norm();
    if defect > 1e-8 * b.norm() {
        return Err(Error::invalid(format!("b is not in the range of A (residual {defect:e})")));
    }
    Ok((eig, rank))
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let base = old.norm();
    if base == 0.0 {
        return if new == old { 0.0 } else { f64::INFINITY };
    }
    (new - old).norm() / base
}

/// Relative sizes `(‖Ã − A‖/‖A‖, ‖b̃ − b‖/‖b‖)` of a drawn perturbation.
fn realized_sizes(a: &PsdMatrix, a_tilde: &PsdMatrix, b: &DVector<f64>, b_tilde: &DVector<f64>, a_norm: f64) -> (f64, f64) {
    let ea = spectral_norm(&(a_tilde.as_matrix() - a.as_matrix())) / a_norm;
    let eb = (b_tilde - b).norm() / b.norm();
    (ea, eb)
}

fn run_trials<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..trials).into_par_iter().map(f).collect()
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

/// Audits `‖ζ̃_ls − ζ_ls‖/‖ζ_ls‖ ≤ 5κ₂(A)ε` under rank- and
/// range-preserving perturbations. Admissible iff `ε ≤ 1/(2κ₂(A))`.
pub fn audit_ls_bound(
    a: &PsdMatrix,
    b: &DVector<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<PerturbationReport>> {
    let (eig, rank) = check_range(a, b)?;
    let a_norm = eig.max_eigenvalue();
    let kappa = a_norm / eig.eigenvalues[rank - 1];
    let zeta = pseudo_inverse_rank(a, rank)?.mul_vec(b);
    let admissible = epsilon <= 1.0 / (2.0 * kappa);
    let bound = 5.0 * kappa * epsilon;
    let preserve = PreserveFlags { rank: true, range: true };

    let reports = run_trials(trials, |t| {
        let (a_t, b_t) = match perturb_problem(a, b, epsilon, trial_seed(seed, t), preserve) {
            Ok(x) => x,
            Err(e) => return PerturbationReport::inadmissible(TheoremTag::LsPert, t, epsilon, bound, e.to_string()),
        };
        let zeta_t = match pseudo_inverse_rank(&a_t, rank) {
            Ok(pinv) => pinv.mul_vec(&b_t),
            Err(e) => return PerturbationReport::inadmissible(TheoremTag::LsPert, t, epsilon, bound, e.to_string()),
        };
        let (ea, eb) = realized_sizes(a, &a_t, b, &b_t, a_norm);
        PerturbationReport::new(TheoremTag::LsPert, t, epsilon, admissible, relative_change(&zeta_t, &zeta), bound)
            .detail("kappa2", kappa)
            .detail("rank", rank as f64)
            .detail("eps_a", ea)
            .detail("eps_b", eb)
    });
    Ok(reports)
}

/// Galerkin PLS solution and its basis.
fn pls_solution(a: &DMatrix<f64>, b: &DVector<f64>, m: usize) -> Result<(DVector<f64>, KrylovBasis)> {
    let kb = build_krylov(a, b, m, None)?;
    let coef = solve_projected(&kb)?;
    Ok((&kb.basis * coef, kb))
}

/// Constants shared by the Krylov-space audits.
struct KrylovSetup {
    basis: KrylovBasis,
    a_norm: f64,
    am_norm: f64,
    am_inv_norm: f64,
    kappa_b: f64,
    warning: Option<String>,
}

fn krylov_setup(a: &PsdMatrix, b: &DVector<f64>, m: usize, kappa_b: &KappaBEstimate) -> Result<KrylovSetup> {
    let (eig, _) = check_range(a, b)?;
    let basis = build_krylov(a, b, m, None)?;
    if basis.effective_dim != m {
        return Err(Error::invalid(format!("Krylov dimension is {}, not m = {m}", basis.effective_dim)));
    }
    let t_eig = symmetric_eigen(&basis.tridiag)?;
    let lmin = t_eig.eigenvalues[m - 1];
    let warning = (!kappa_b.converged).then(|| "kappa_b estimate has not converged".to_string());
    Ok(KrylovSetup {
        a_norm: eig.max_eigenvalue(),
        am_norm: t_eig.max_eigenvalue(),
        am_inv_norm: if lmin > 0.0 { 1.0 / lmin } else { f64::INFINITY },
        kappa_b: kappa_b.value,
        basis,
        warning,
    })
}

/// Audits `‖ζ̃_pls − ζ_pls‖/‖ζ_pls‖ ≤ 120κ_b(‖A‖/‖A_m‖ + 1)ε`.
///
/// Admissible iff `ε ≤ 1/(C_m ∨ D_m)` and the perturbed Krylov space keeps
/// dimension `m`. `details` also carries the bound with `‖A_m⁻¹‖` in place
/// of `‖A_m‖⁻¹`.
pub fn audit_pls_bound(
    a: &PsdMatrix,
    b: &DVector<f64>,
    m: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
    kappa_b: &KappaBEstimate,
) -> Result<Vec<PerturbationReport>> {
    let setup = krylov_setup(a, b, m, kappa_b)?;
    let k = setup.kappa_b;
    let c_m = 64.0 * k * (k + 1.0);
    let d_m = 48.0 * k * setup.a_norm * setup.am_inv_norm;
    let bound = 120.0 * k * (setup.a_norm / setup.am_norm + 1.0) * epsilon;
    let bound_inverse = 120.0 * k * (setup.a_norm * setup.am_inv_norm + 1.0) * epsilon;
    let eps_ok = epsilon <= 1.0 / c_m.max(d_m);
    let zeta = &setup.basis.basis * solve_projected(&setup.basis)?;
    let preserve = PreserveFlags { rank: false, range: true };
    let mut common = BTreeMap::new();
    common.insert("kappa_b".to_string(), k);
    common.insert("c_m".to_string(), c_m);
    common.insert("d_m".to_string(), d_m);
    common.insert("bound_with_inverse_norm".to_string(), bound_inverse);

    let reports = run_trials(trials, |t| {
        let tag = TheoremTag::PlsPert;
        let (a_t, b_t) = match perturb_problem(a, b, epsilon, trial_seed(seed, t), preserve) {
            Ok(x) => x,
            Err(e) => return PerturbationReport::inadmissible(tag, t, epsilon, bound, e.to_string()),
        };
        let (zeta_t, kb_t) = match pls_solution(a_t.as_matrix(), &b_t, m) {
            Ok(x) => x,
            Err(e) => return PerturbationReport::inadmissible(tag, t, epsilon, bound, e.to_string()),
        };
        let same_dim = kb_t.effective_dim == m;
        let mut r = PerturbationReport::new(tag, t, epsilon, eps_ok && same_dim, relative_change(&zeta_t, &zeta), bound)
            .with_details(&common)
            .detail("perturbed_dim", kb_t.effective_dim as f64);
        r.warning = setup.warning.clone();
        r
    });
    Ok(reports)
}

/// Signs `S` minimizing `‖K̃S − K‖_op`, and that minimum.
///
/// Exhaustive over all `2^m` patterns up to [`EXHAUSTIVE_SIGN_MAX`] columns,
/// otherwise column-wise matching.
pub fn match_signs(k: &DMatrix<f64>, k_tilde: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    if k.shape() != k_tilde.shape() {
        return Err(Error::dims(format!("bases have shapes {:?} and {:?}", k.shape(), k_tilde.shape())));
    }
    let m = k.ncols();
    let greedy: Vec<f64> = (0..m)
        .map(|j| if k_tilde.column(j).dot(&k.column(j)) < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let signs = if m <= EXHAUSTIVE_SIGN_MAX && m > 0 {
        // ‖K̃S − K‖² is the top eigenvalue of 2I − SM − MᵀS with M = K̃ᵀK.
        let g = k_tilde.tr_mul(k);
        let mut best = (f64::INFINITY, greedy.clone());
        for mask in 0u32..(1 << m) {
            let s: Vec<f64> = (0..m).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let n = DMatrix::from_fn(m, m, |i, j| {
                let id = if i == j { 2.0 } else { 0.0 };
                id - s[i] * g[(i, j)] - g[(j, i)] * s[j]
            });
            let top = symmetric_eigen(&n)?.max_eigenvalue();
            if top < best.0 - 1e-14 {
                best = (top, s);
            }
        }
        best.1
    } else {
        greedy
    };
    let mut signed = k_tilde.clone();
    for (j, mut col) in signed.column_iter_mut().enumerate() {
        col *= signs[j];
    }
    Ok((signs, spectral_norm(&(signed - k))))
}

/// Audits the natural-basis bound `‖K̃_m − K_m‖ ≤ 11κ_b ε` and both
/// projected-system bounds. Each trial yields three reports, tagged
/// `krylov_pert`, `krylov_proj_b` and `krylov_proj_a`.
pub fn audit_krylov_basis_bound(
    a: &PsdMatrix,
    b: &DVector<f64>,
    m: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
    kappa_b: &KappaBEstimate,
) -> Result<Vec<PerturbationReport>> {
    let setup = krylov_setup(a, b, m, kappa_b)?;
    let k = setup.kappa_b;
    let eps_ok = epsilon <= 1.0 / (64.0 * k * (k + 1.0));
    let basis_bound = 11.0 * k * epsilon;
    let b_bound = 2.0 * epsilon;
    let a_bound = 24.0 * k * setup.a_norm / setup.am_norm * epsilon;
    let km = &setup.basis.basis;
    let b_m = km.tr_mul(b);
    let a_m = &setup.basis.tridiag;
    let preserve = PreserveFlags { rank: false, range: true };

    let per_trial = run_trials(trials, |t| {
        let fail = |e: Error| {
            [
                (TheoremTag::KrylovPert, basis_bound),
                (TheoremTag::KrylovProjB, b_bound),
                (TheoremTag::KrylovProjA, a_bound),
            ]
            .map(|(tag, bound)| PerturbationReport::inadmissible(tag, t, epsilon, bound, e.to_string()))
            .to_vec()
        };
        let (a_t, b_t) = match perturb_problem(a, b, epsilon, trial_seed(seed, t), preserve) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let kb_t = match build_krylov(&a_t, &b_t, m, None) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let admissible = eps_ok && kb_t.effective_dim == m;
        if kb_t.effective_dim != m {
            return fail(Error::invalid(format!("perturbed Krylov dimension {}", kb_t.effective_dim)));
        }
        let (signs, basis_diff) = match match_signs(km, &kb_t.basis) {
            Ok(x) => x,
            Err(e) => return fail(e),
        };
        let mut signed = kb_t.basis.clone();
        for (j, mut col) in signed.column_iter_mut().enumerate() {
            col *= signs[j];
        }
        let b_m_t = signed.tr_mul(&b_t);
        let a_m_t = signed.transpose() * a_t.as_matrix() * &signed;
        let b_change = relative_change(&b_m_t, &b_m);
        let a_change = spectral_norm(&(a_m_t - a_m)) / setup.am_norm;
        let flips = signs.iter().filter(|&&s| s < 0.0).count() as f64;
        let mut out = vec![
            PerturbationReport::new(TheoremTag::KrylovPert, t, epsilon, admissible, basis_diff, basis_bound)
                .detail("kappa_b", k)
                .detail("sign_flips", flips),
            PerturbationReport::new(TheoremTag::KrylovProjB, t, epsilon, admissible, b_change, b_bound),
            PerturbationReport::new(TheoremTag::KrylovProjA, t, epsilon, admissible, a_change, a_bound)
                .detail("kappa_b", k),
        ];
        for r in &mut out {
            r.warning = setup.warning.clone();
        }
        out
    });
    Ok(per_trial.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgneStop {
    /// First `s` meeting the residual criterion, or the last `s` tried.
    pub index: usize,
    pub met: bool,
    pub residual: f64,
    pub threshold: f64,
}

/// First `s` with `‖Ãζ̃_s − b̃‖ ≤ 2(‖ζ_ls‖Mε + δ)`, where `ζ̃_s` minimizes the
/// residual over `𝒦_s(Ã, b̃)`.
///
/// Stops at the Krylov dimension of `(Ã, b̃)` with `met = false` if the
/// criterion is never reached.
pub fn cgne_stopping_index(
    a_tilde: &PsdMatrix,
    b_tilde: &DVector<f64>,
    zeta_ls_norm: f64,
    m_bound: f64,
    delta: f64,
    epsilon_op: f64,
) -> Result<CgneStop> {
    for (name, v) in [("zeta_ls_norm", zeta_ls_norm), ("m_bound", m_bound), ("delta", delta), ("epsilon_op", epsilon_op)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let threshold = 2.0 * (zeta_ls_norm * m_bound * epsilon_op + delta);
    let a = a_tilde.as_matrix();
    let mut lanczos = Lanczos::new(a, b_tilde, DEFAULT_BREAKDOWN_TOL)?;
    loop {
        let k = lanczos.basis(lanczos.len());
        let ak = a * &k;
        let svd = ak.clone().svd(true, true);
        let coef = svd
            .solve(b_tilde, f64::EPSILON * ak.amax())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let residual = (&ak * coef - b_tilde).norm();
        if residual <= threshold {
            return Ok(CgneStop { index: lanczos.len(), met: true, residual, threshold });
        }
        if !lanczos.extend() {
            return Ok(CgneStop { index: lanczos.len(), met: false, residual, threshold });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationAudit {
    pub bias: PerturbationReport,
    pub distance: PerturbationReport,
    pub c_qy: KappaBEstimate,
    /// Largest `σ₀²` allowed by the noise-level assumption.
    pub sigma0_sq_boundary: f64,
}

/// Audits the population PLS bias `‖β_pls,m − β₀‖ ≤ 210 C_{q,y} σ₀² ‖β₀‖` and
/// the Krylov-to-oracle distance `d(𝒦_m, ℬ₀) ≤ C_{q,y} σ₀²`.
///
/// `C_{q,y}` is the estimated `κ_b` of `𝒦_m(Σ_q, Σ_q α₀)`. The audit is
/// admissible when `σ₀² ≤ ‖Σ_q‖·min(1/(64C(C+1)), 1/(42κ₂(Σ_q)C))`.
pub fn audit_population_bias(model: &GeneratedModel, kappa_trials: usize, seed: u64) -> Result<PopulationAudit> {
    let m = model.m;
    let (sigma_q, sigma_qy) = model.latent_covariance();
    let c_qy = estimate_kappa_b(&sigma_q, &sigma_qy, m, &default_eps_grid(), kappa_trials, seed)?;
    let c = c_qy.value;
    let var_q: Vec<f64> = model.sigma_q.iter().map(|s| s * s).collect();
    let q_norm = var_q.iter().copied().fold(0.0, f64::max);
    let q_kappa = q_norm / var_q.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma0_sq = model.sigma_0.iter().map(|s| s * s).fold(0.0, f64::max);
    let boundary = q_norm * (1.0 / (64.0 * c * (c + 1.0))).min(1.0 / (42.0 * q_kappa * c));
    let admissible = sigma0_sq <= boundary;
    let epsilon = sigma0_sq / q_norm;

    let pop = model.population_cov()?;
    let fit = fit_pls(&pop, m)?;
    let bias = relative_change(&fit.beta, &model.beta0);
    let kb = build_krylov(&pop.sigma_x, &pop.sigma_xy, m, None)?;
    let distance = if kb.effective_dim == m { subspace_distance(&kb.basis, &model.p())? } else { f64::NAN };

    let mut bias_report = PerturbationReport::new(TheoremTag::PopPlsBias, 0, epsilon, admissible, bias, 210.0 * c * sigma0_sq)
        .detail("c_qy", c)
        .detail("sigma0_sq", sigma0_sq)
        .detail("sigma0_sq_boundary", boundary)
        .detail("kappa2_sigma_q", q_kappa);
    let mut distance_report =
        PerturbationReport::new(TheoremTag::PopKrylovDistance, 0, epsilon, admissible, distance, c * sigma0_sq)
            .detail("c_qy", c)
            .detail("krylov_dim", kb.effective_dim as f64);
    if !c_qy.converged {
        bias_report.warning = Some("C_{q,y} estimate has not converged".into());
        distance_report.warning = bias_report.warning.clone();
    }
    Ok(PopulationAudit { bias: bias_report, distance: distance_report, c_qy, sigma0_sq_boundary: boundary })
}
