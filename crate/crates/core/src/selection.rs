//! Model selection by thresholding the reduced condition number.
//!
//! Among the fits whose reduced covariance has `κ̂ < κ₀`, pick the one with
//! the smallest in-sample risk.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{solve_projected, tridiag_condition, CovariancePair, FitReport, Method};
use crate::krylov::Lanczos;
use crate::krylov::DEFAULT_BREAKDOWN_TOL;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofSummary {
    pub dof: usize,
    pub kappa: f64,
    pub in_sample_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionOutcome {
    pub chosen_dof: usize,
    /// Dofs with `κ̂ < κ₀`, ascending.
    pub admissible_set: Vec<usize>,
    /// One row per input fit, sorted by dof.
    pub per_dof: Vec<DofSummary>,
    pub threshold: f64,
    /// Set when no fit is admissible and the best-conditioned one is returned.
    pub warning: Option<String>,
}

impl SelectionOutcome {
    pub fn chosen(&self) -> &DofSummary {
        self.per_dof
            .iter()
            .find(|row| row.dof == self.chosen_dof)
            .expect("chosen dof is always one of the inputs")
    }
}

/// Orders rows by the key and falls back on dof for ties.
fn best_by(rows: &[DofSummary], key: impl Fn(&DofSummary) -> f64) -> &DofSummary {
    rows.iter()
        .min_by(|a, b| key(a).total_cmp(&key(b)).then(a.dof.cmp(&b.dof)))
        .expect("rows are non-empty")
}

/// Chooses the admissible fit with minimal in-sample risk, breaking ties by
/// smaller dof. With no admissible fit the smallest `κ̂` wins and a warning
/// is attached.
pub fn select_by_conditioning(fits: &[FitReport], kappa0: f64) -> Result<SelectionOutcome> {
    if fits.is_empty() {
        return Err(Error::EmptyInput("no fits to select from"));
    }
    if kappa0.is_nan() {
        return Err(Error::invalid("threshold must not be NaN"));
    }
    let mut per_dof = fits
        .iter()
        .map(|f| {
            let risk = f
                .in_sample_risk()
                .ok_or_else(|| Error::invalid(format!("{} fit at dof {} has no in-sample risk", f.method, f.dof)))?;
            Ok(DofSummary { dof: f.dof, kappa: f.kappa_reduced, in_sample_risk: risk })
        })
        .collect::<Result<Vec<_>>>()?;
    per_dof.sort_by(|a, b| {
        a.dof
            .cmp(&b.dof)
            .then(a.kappa.total_cmp(&b.kappa))
            .then(a.in_sample_risk.total_cmp(&b.in_sample_risk))
    });

    let admissible: Vec<DofSummary> = per_dof.iter().filter(|r| r.kappa < kappa0).cloned().collect();
    let (chosen_dof, warning) = if admissible.is_empty() {
        let fallback = best_by(&per_dof, |r| if r.kappa.is_nan() { f64::INFINITY } else { r.kappa });
        (fallback.dof, Some(format!("no fit has reduced condition number below {kappa0}; using the best-conditioned one")))
    } else {
        (best_by(&admissible, |r| r.in_sample_risk).dof, None)
    };
    let mut admissible_set: Vec<usize> = admissible.iter().map(|r| r.dof).collect();
    admissible_set.dedup();
    Ok(SelectionOutcome { chosen_dof, admissible_set, per_dof, threshold: kappa0, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStop {
    Threshold,
    MaxDof,
    Breakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOutcome {
    pub selection: SelectionOutcome,
    pub fits: Vec<FitReport>,
    pub stopped_at: usize,
    pub stop: ScanStop,
}

/// PLS fits for `s = 1, 2, …` on one growing Lanczos factorization, stopping
/// at the first `s` with `κ₂(T_s) > κ₀`, at `s_max`, or on breakdown.
pub fn early_stop_scan(cov: &CovariancePair, kappa0: f64, s_max: usize) -> Result<ScanOutcome> {
    if s_max == 0 {
        return Err(Error::invalid("s_max must be at least 1"));
    }
    let mut lanczos = Lanczos::new(&cov.sigma_x, &cov.sigma_xy, DEFAULT_BREAKDOWN_TOL)?;
    let mut fits = Vec::new();
    let stop = loop {
        let kb = lanczos.to_basis();
        let beta = &kb.basis * solve_projected(&kb)?;
        let kappa = tridiag_condition(&kb)?;
        let risk = cov.risk(&beta);
        fits.push(FitReport::new(beta, Method::Pls, kb.effective_dim, kappa).with_risk(risk));
        if kappa > kappa0 {
            break ScanStop::Threshold;
        }
        if kb.effective_dim >= s_max {
            break ScanStop::MaxDof;
        }
        if !lanczos.extend() {
            break ScanStop::Breakdown;
        }
    };
    let selection = select_by_conditioning(&fits, kappa0)?;
    Ok(ScanOutcome { selection, stopped_at: fits.len(), fits, stop })
}
