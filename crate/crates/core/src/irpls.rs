//! Iteratively reweighted PLS for canonical-link generalized linear models.
//!
//! Each iteration forms the weighted design `W^{1/2}X` and working residual
//! `W^{-1/2}(y − μ)` at the current linear predictor and adds the PLS
//! solution with `s` components of the weighted problem to the coefficients.
//! With `s = p` this is Newton's method (IRLS).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::fit_pls_data;

/// Lower clamp on the working weights before `W^{-1/2}` is formed.
pub const WEIGHT_FLOOR: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 25;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Gaussian,
    Binomial,
    Poisson,
}

/// `ln(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `a·ln(a/b)` given `ln b`, with `0·ln 0 = 0`.
fn xlogx_over(a: f64, ln_b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * (a.ln() - ln_b)
    }
}

impl GlmFamily {
    pub const ALL: [GlmFamily; 3] = [GlmFamily::Gaussian, GlmFamily::Binomial, GlmFamily::Poisson];

    pub fn as_str(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Binomial => "binomial",
            GlmFamily::Poisson => "poisson",
        }
    }

    /// Cumulant `κ(η)`.
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 0.5 * eta * eta,
            GlmFamily::Binomial => softplus(eta),
            GlmFamily::Poisson => eta.exp(),
        }
    }

    /// Mean `κ′(η)`.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => eta,
            GlmFamily::Binomial => sigmoid(eta),
            GlmFamily::Poisson => eta.exp(),
        }
    }

    /// Variance `κ″(η)`.
    pub fn variance(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 1.0,
            GlmFamily::Binomial => {
                let mu = sigmoid(eta);
                mu * (1.0 - mu)
            }
            GlmFamily::Poisson => eta.exp(),
        }
    }

    pub fn check_response(self, y: &DVector<f64>) -> Result<()> {
        let bad = |detail: String| Err(Error::DomainViolation { family: self.as_str(), detail });
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return bad(format!("y[{i}] = {v} is not finite"));
            }
            match self {
                GlmFamily::Binomial if !(0.0..=1.0).contains(&v) => return bad(format!("y[{i}] = {v} outside [0, 1]")),
                GlmFamily::Poisson if v < 0.0 => return bad(format!("y[{i}] = {v} is negative")),
                _ => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GlmFamily::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown family '{s}' (expected gaussian, binomial or poisson)")))
    }
}

fn check_eta(family: GlmFamily, y: &DVector<f64>, eta: &DVector<f64>) -> Result<()> {
    if y.len() != eta.len() {
        return Err(Error::dims(format!("y has length {}, eta has length {}", y.len(), eta.len())));
    }
    if let Some(i) = eta.iter().position(|v| !v.is_finite()) {
        return Err(Error::DomainViolation { family: family.as_str(), detail: format!("eta[{i}] is not finite") });
    }
    family.check_response(y)
}

/// Negative mean log-likelihood `n⁻¹ Σ (κ(ηᵢ) − yᵢηᵢ)`, up to terms free of `η`.
pub fn neg_log_likelihood(family: GlmFamily, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let n = y.len().max(1) as f64;
    y.iter().zip(eta.iter()).map(|(&yi, &e)| family.cumulant(e) - yi * e).sum::<f64>() / n
}

/// Deviance `2(ℓ_saturated − ℓ(η))`. The Gaussian case is the residual sum
/// of squares.
pub fn deviance(family: GlmFamily, y: &DVector<f64>, eta: &DVector<f64>) -> Result<f64> {
    check_eta(family, y, eta)?;
    let terms = y.iter().zip(eta.iter()).map(|(&yi, &e)| match family {
        GlmFamily::Gaussian => (yi - e) * (yi - e),
        // ln μ = −softplus(−η), ln(1 − μ) = −softplus(η).
        GlmFamily::Binomial => 2.0 * (xlogx_over(yi, -softplus(-e)) + xlogx_over(1.0 - yi, -softplus(e))),
        GlmFamily::Poisson => 2.0 * (xlogx_over(yi, e) - (yi - e.exp())),
    });
    Ok(terms.sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IrplsStop {
    Epsilon,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrplsTrace {
    /// `β⁽⁰⁾ = 0, β⁽¹⁾, …`.
    pub iterates: Vec<DVector<f64>>,
    /// `D⁽ʲ⁾ = ℓ̂(β⁽ʲ⁾) − ℓ̂(β⁽ʲ⁺¹⁾)` for every completed step.
    pub deviance_drops: Vec<f64>,
    /// `κ₂` of the projected weighted covariance at each step.
    pub kappa_reduced: Vec<f64>,
    pub stopped_by: IrplsStop,
    pub warnings: Vec<String>,
}

impl IrplsTrace {
    pub fn coefficients(&self) -> &DVector<f64> {
        self.iterates.last().expect("the initial iterate is always present")
    }

    pub fn iterations(&self) -> usize {
        self.deviance_drops.len()
    }
}

/// Runs IRPLS from `β = 0` until `D⁽ʲ⁾ ≤ eps` or `max_iter` steps.
pub fn irpls_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: GlmFamily,
    s: usize,
    max_iter: usize,
    eps: f64,
) -> Result<IrplsTrace> {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("design matrix is empty"));
    }
    if y.len() != n {
        return Err(Error::dims(format!("X has {n} rows, y has length {}", y.len())));
    }
    if s == 0 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if eps.is_nan() {
        return Err(Error::invalid("eps must not be NaN"));
    }
    family.check_response(y)?;

    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut loss = neg_log_likelihood(family, y, &eta);
    let mut trace = IrplsTrace {
        iterates: vec![beta.clone()],
        deviance_drops: Vec::new(),
        kappa_reduced: Vec::new(),
        stopped_by: IrplsStop::MaxIter,
        warnings: Vec::new(),
    };
    for j in 0..max_iter {
        let mut xw = x.clone();
        let mut r = DVector::zeros(n);
        for i in 0..n {
            let w = family.variance(eta[i]).max(WEIGHT_FLOOR);
            let sw = w.sqrt();
            xw.row_mut(i).scale_mut(sw);
            r[i] = (y[i] - family.mean(eta[i])) / sw;
        }
        let (step, kappa) = match fit_pls_data(&xw, &r, s) {
            Ok(fit) => (fit.beta, fit.kappa_reduced),
            Err(Error::EmptyKrylovSeed) => (DVector::zeros(p), f64::NAN),
            Err(e) => return Err(e),
        };
        beta += step;
        eta = x * &beta;
        if eta.iter().any(|v| !v.is_finite()) || eta.iter().any(|&e| !family.cumulant(e).is_finite()) {
            return Err(Error::NonFiniteLinearPredictor { iteration: j + 1 });
        }
        let next = neg_log_likelihood(family, y, &eta);
        let drop = loss - next;
        loss = next;
        if drop < 0.0 {
            let msg = format!("deviance increased at iteration {} (drop {drop:e})", j + 1);
            log::warn!("{msg}");
            trace.warnings.push(msg);
        }
        trace.iterates.push(beta.clone());
        trace.deviance_drops.push(drop);
        trace.kappa_reduced.push(kappa);
        if drop <= eps {
            trace.stopped_by = IrplsStop::Epsilon;
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::sample_covariances;
    use crate::estimators::fit_pls;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Textbook Newton-Raphson for the canonical link.
    fn irls(x: &DMatrix<f64>, y: &DVector<f64>, family: GlmFamily, iters: usize) -> Vec<DVector<f64>> {
        let mut beta = DVector::zeros(x.ncols());
        let mut out = vec![beta.clone()];
        for _ in 0..iters {
            let eta = x * &beta;
            let w = eta.map(|e| family.variance(e));
            let mu = eta.map(|e| family.mean(e));
            let mut xtwx = DMatrix::zeros(x.ncols(), x.ncols());
            for i in 0..x.nrows() {
                let row = x.row(i);
                xtwx += row.transpose() * row * w[i];
            }
            let grad = x.tr_mul(&(y - mu));
            beta += xtwx.cholesky().unwrap().solve(&grad);
            out.push(beta.clone());
        }
        out
    }

    #[test]
    fn family_names_round_trip() {
        for f in GlmFamily::ALL {
            assert_eq!(f.as_str().parse::<GlmFamily>().unwrap(), f);
        }
        assert!("gamma".parse::<GlmFamily>().is_err());
    }

    #[test]
    fn cumulant_derivatives_agree() {
        for f in GlmFamily::ALL {
            for eta in [-3.0, -0.5, 0.0, 0.7, 2.5] {
                let h = 1e-5;
                let d1 = (f.cumulant(eta + h) - f.cumulant(eta - h)) / (2.0 * h);
                let d2 = (f.mean(eta + h) - f.mean(eta - h)) / (2.0 * h);
                assert!((d1 - f.mean(eta)).abs() < 1e-7, "{f} {eta}");
                assert!((d2 - f.variance(eta)).abs() < 1e-7, "{f} {eta}");
            }
        }
    }

    #[test]
    fn deviance_examples() {
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        assert_eq!(deviance(GlmFamily::Gaussian, &y, &y).unwrap(), 0.0);
        let yb = DVector::from_vec(vec![1.0, 0.0]);
        let eta = DVector::from_vec(vec![30.0, -30.0]);
        assert!(deviance(GlmFamily::Binomial, &yb, &eta).unwrap() < 1e-12);
        let yp = DVector::from_vec(vec![0.0, 1.0, 3.0]);
        let mu = [0.5f64, 2.0, 2.5];
        let etap = DVector::from_iterator(3, mu.iter().map(|m| m.ln()));
        let hand = 2.0 * ((0.0 - (0.0 - 0.5)) + (1.0 * (1.0f64 / 2.0).ln() - (1.0 - 2.0)) + (3.0 * (3.0f64 / 2.5).ln() - (3.0 - 2.5)));
        assert!((deviance(GlmFamily::Poisson, &yp, &etap).unwrap() - hand).abs() < 1e-12);
    }

    #[test]
    fn deviance_domain_errors() {
        let eta = DVector::zeros(1);
        let err = deviance(GlmFamily::Binomial, &DVector::from_vec(vec![1.5]), &eta).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { family: "binomial", .. }));
        assert!(deviance(GlmFamily::Poisson, &DVector::from_vec(vec![-1.0]), &eta).is_err());
        assert!(deviance(GlmFamily::Gaussian, &DVector::zeros(2), &eta).is_err());
    }

    #[test]
    fn gaussian_first_step_is_pls() {
        let x = design(30, 6, 1);
        let y = design(30, 1, 2).column(0).into_owned();
        let trace = irpls_fit(&x, &y, GlmFamily::Gaussian, 2, 25, 1e-8).unwrap();
        let pls = fit_pls(&sample_covariances(&x, &y).unwrap(), 2).unwrap();
        assert!((&trace.iterates[1] - &pls.beta).amax() < 1e-12);
    }

    #[test]
    fn gaussian_full_dimension_stops_after_one_step() {
        let x = design(30, 4, 3);
        let y = design(30, 1, 4).column(0).into_owned();
        let trace = irpls_fit(&x, &y, GlmFamily::Gaussian, 4, 25, 1e-8).unwrap();
        assert_eq!(trace.stopped_by, IrplsStop::Epsilon);
        assert_eq!(trace.iterations(), 2);
        assert!(trace.deviance_drops[1].abs() < 1e-12);
    }

    #[test]
    fn full_dimension_matches_irls() {
        let x = design(20, 5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let truth = DVector::from_vec(vec![0.8, -0.5, 0.3, 0.0, 0.4]);
        let y = (&x * &truth).map(|e| (sigmoid(e) + 0.3 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0));
        let trace = irpls_fit(&x, &y, GlmFamily::Binomial, 5, 10, f64::NEG_INFINITY).unwrap();
        let oracle = irls(&x, &y, GlmFamily::Binomial, 10);
        assert_eq!(trace.iterates.len(), 11);
        for (a, b) in trace.iterates.iter().zip(&oracle) {
            assert!((a - b).amax() < 1e-6);
        }
        assert!(trace.deviance_drops.iter().all(|&d| d >= -1e-14));
    }

    #[test]
    fn poisson_overflow_is_reported() {
        // First Newton step gives β ≈ 1, so η₂ ≈ 1000 and e^η overflows.
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 1000.0]);
        let y = DVector::from_vec(vec![1e6, 0.0]);
        let err = irpls_fit(&x, &y, GlmFamily::Poisson, 1, 5, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLinearPredictor { iteration: 1 }), "{err:?}");
    }

    #[test]
    fn stopping_contract() {
        let x = design(40, 3, 7);
        let y = (&x * DVector::from_vec(vec![0.3, 0.2, -0.1])).map(|e| e.exp().round());
        let trace = irpls_fit(&x, &y, GlmFamily::Poisson, 2, 3, 1e-8).unwrap();
        match trace.stopped_by {
            IrplsStop::Epsilon => assert!(*trace.deviance_drops.last().unwrap() <= 1e-8),
            IrplsStop::MaxIter => assert_eq!(trace.iterations(), 3),
        }
        assert!(trace.iterates.len() <= 4);
    }
}
