//! LASSO by pathwise cyclic coordinate descent.
//!
//! Minimizes `(2n)⁻¹‖y − Xβ‖² + λ‖β‖₁` down a decreasing grid of penalties,
//! warm-starting each fit from the previous one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{kappa_or_nan, FitReport, Method};
use crate::linalg::PsdMatrix;

const MAX_SWEEPS: usize = 10_000;
/// Consecutive over-budget penalties tolerated before the path is cut.
const OVER_BUDGET_PATIENCE: usize = 5;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `‖n⁻¹Xᵀy‖_∞`, the smallest penalty with an empty solution.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (x.tr_mul(y) / x.nrows() as f64).amax()
}

/// Geometric grid from `λ_max` down `decades` orders of magnitude.
pub fn default_path(lambda_max: f64, points: usize, decades: f64) -> Vec<f64> {
    if points <= 1 {
        return vec![lambda_max];
    }
    (0..points)
        .map(|i| lambda_max * 10f64.powf(-decades * i as f64 / (points - 1) as f64))
        .collect()
}

/// Coordinate-descent state shared along a path.
pub struct CoordinateDescent<'a> {
    x: &'a DMatrix<f64>,
    col_sq: Vec<f64>,
    n: f64,
    tol: f64,
    pub beta: DVector<f64>,
    residual: DVector<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = x.nrows() as f64;
        CoordinateDescent {
            x,
            col_sq: x.column_iter().map(|c| c.norm_squared() / n).collect(),
            n,
            tol: 1e-8 * y.amax(),
            beta: DVector::zeros(x.ncols()),
            residual: y.clone(),
        }
    }

    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        let c = self.col_sq[j];
        if c == 0.0 {
            return 0.0;
        }
        let col = self.x.column(j);
        let old = self.beta[j];
        let rho = col.dot(&self.residual) / self.n + c * old;
        let new = soft_threshold(rho, lambda) / c;
        let delta = new - old;
        if delta != 0.0 {
            self.residual.axpy(-delta, &col, 1.0);
            self.beta[j] = new;
        }
        delta.abs()
    }

    fn sweep(&mut self, indices: &[usize], lambda: f64) -> f64 {
        indices.iter().map(|&j| self.update(j, lambda)).fold(0.0, f64::max)
    }

    fn active(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    /// Runs to convergence at `lambda`: iterate on the active set, then
    /// confirm with a full sweep.
    pub fn solve(&mut self, lambda: f64) {
        let all: Vec<usize> = (0..self.beta.len()).collect();
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            let change = self.sweep(&all, lambda);
            sweeps += 1;
            if change <= self.tol {
                return;
            }
            loop {
                let active = self.active();
                let change = self.sweep(&active, lambda);
                sweeps += 1;
                if change <= self.tol || sweeps >= MAX_SWEEPS {
                    break;
                }
            }
        }
        log::warn!("coordinate descent hit the sweep cap at lambda = {lambda:e}");
    }

    pub fn active_count(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

/// LASSO fit with at most `target_dof` active coefficients.
///
/// Walks the path (default: `λ_max` down 4 decades over 100 points) and
/// keeps the densest fit within the budget, preferring the smaller penalty on
/// ties, i.e. the least-shrunk end of the segment of the path with that
/// active set size. If no penalty meets the budget the empty model at
/// `λ_max` is returned with a warning.
pub fn fit_lasso(x: &DMatrix<f64>, y: &DVector<f64>, target_dof: usize, path: Option<&[f64]>) -> Result<FitReport> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("design matrix is empty"));
    }
    if y.len() != n {
        return Err(Error::dims(format!("X has {n} rows, y has length {}", y.len())));
    }
    if target_dof == 0 {
        return Err(Error::invalid("LASSO dof budget must be at least 1"));
    }
    let lmax = lambda_max(x, y);
    let grid = match path {
        Some(p) => {
            if p.is_empty() || p.iter().any(|&l| !(l > 0.0)) || p.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::invalid("LASSO path must be positive and strictly decreasing"));
            }
            p.to_vec()
        }
        None if lmax == 0.0 => vec![0.0],
        None => default_path(lmax, 100, 4.0),
    };

    let mut cd = CoordinateDescent::new(x, y);
    let mut best: Option<(DVector<f64>, f64, usize)> = None;
    let mut over = 0;
    for &lambda in &grid {
        cd.solve(lambda);
        let k = cd.active_count();
        if k <= target_dof {
            over = 0;
            if best.as_ref().is_none_or(|b| k >= b.2) {
                best = Some((cd.beta.clone(), lambda, k));
            }
        } else {
            over += 1;
            if over >= OVER_BUDGET_PATIENCE {
                break;
            }
        }
    }

    let (beta, lambda, k, warning) = match best {
        Some((b, l, k)) => (b, l, k, None),
        None => (
            DVector::zeros(p),
            lmax,
            0,
            Some(format!("no penalty on the path keeps at most {target_dof} active coefficients")),
        ),
    };
    let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let kappa = if active.is_empty() {
        1.0
    } else {
        let sub = x.select_columns(&active);
        kappa_or_nan(&PsdMatrix::gram(&sub, 1.0 / n as f64))?
    };
    let risk = (y - x * &beta).norm_squared() / n as f64;
    let mut report = FitReport {
        beta,
        method: Method::Lasso,
        dof: k,
        lambda: Some(lambda),
        kappa_reduced: kappa,
        metrics: Default::default(),
        warning,
    };
    report.metrics.insert("in_sample_risk".into(), risk);
    Ok(report)
}

/// Solves the LASSO at a single penalty from a cold start.
pub fn lasso_at(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut cd = CoordinateDescent::new(x, y);
    cd.solve(lambda);
    cd.beta
}
