//! Latent-factor data generator and Monte-Carlo experiment runner.
//!
//! In the coordinates of the rotation `U` the features split into a relevant
//! block of size `d`, whose first `m` coordinates carry the latent factors
//! plus noise, and an irrelevant block of size `p − d`:
//!
//! ```text
//! X = [Q + E₀ | E | Z] Uᵀ,   y = Qα₀ + ε,   β₀ = U[:, :m] α₀
//! ```
//!
//! All covariances are diagonal in those coordinates, which gives the exact
//! population pair without sampling.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    evaluate, fit_pls_data, CovariancePair, FitReport, Method, SpectralCovariance,
};
use crate::lasso::fit_lasso;
use crate::linalg::PsdMatrix;

/// Smallest residual standard deviation of the relevant block.
pub const SIGMA0_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub m: usize,
    pub sigma0: f64,
    pub sigma_yperp_max: f64,
    pub rank_yperp: usize,
    pub sparse: bool,
    pub seed: u64,
    pub reps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n: 1000,
            p: 200,
            d: 100,
            m: 25,
            sigma0: 0.1,
            sigma_yperp_max: 0.1,
            rank_yperp: 100,
            sparse: false,
            seed: 0,
            reps: 50,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if !(1 <= self.m && self.m <= self.d && self.d <= self.p) {
            return fail(format!("need 1 <= m <= d <= p, got m={}, d={}, p={}", self.m, self.d, self.p));
        }
        if self.rank_yperp > self.p - self.d {
            return fail(format!("rank_yperp {} exceeds p - d = {}", self.rank_yperp, self.p - self.d));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return fail(format!("sigma0 must be finite and >= 0, got {}", self.sigma0));
        }
        if !(self.sigma_yperp_max >= 0.0 && self.sigma_yperp_max.is_finite()) {
            return fail(format!("sigma_yperp_max must be finite and >= 0, got {}", self.sigma_yperp_max));
        }
        Ok(())
    }

    /// `(σ_q)_m² / σ₀²`, infinite when `σ₀ = 0`.
    pub fn snr(&self) -> f64 {
        let last = *latent_sds(self.m).last().expect("m >= 1");
        (last * last) / (self.sigma0 * self.sigma0)
    }
}

/// Linearly spaced from 5 down to 1.
pub fn latent_sds(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    (0..m).map(|i| 5.0 - 4.0 * i as f64 / (m - 1) as f64).collect()
}

/// Geometrically spaced from `hi` down to `lo` over `k` points.
fn geometric(hi: f64, lo: f64, k: usize) -> Vec<f64> {
    match k {
        0 => vec![],
        1 => vec![hi],
        _ => (0..k).map(|i| hi * (lo / hi).powf(i as f64 / (k - 1) as f64)).collect(),
    }
}

/// Residual sds of the relevant block, from `σ₀` down to `10⁻³`. Noise levels
/// at or below the floor are used as a constant.
pub fn residual_sds(sigma0: f64, d: usize) -> Vec<f64> {
    if sigma0 <= SIGMA0_FLOOR {
        return vec![sigma0; d];
    }
    geometric(sigma0, SIGMA0_FLOOR, d)
}

/// Irrelevant-block sds: geometric from `max` to `max/100` over the first
/// `rank` coordinates, zero afterwards.
pub fn irrelevant_sds(max: f64, rank: usize, len: usize) -> Vec<f64> {
    let mut sds = geometric(max, max / 100.0, rank);
    sds.resize(len, 0.0);
    sds
}

/// Identity when `sparse`, otherwise the orthogonal QR factor of a seeded
/// Gaussian matrix with columns flipped so that `R` has a positive diagonal.
pub fn make_rotation(p: usize, sparse: bool, seed: u64) -> DMatrix<f64> {
    if sparse {
        return DMatrix::identity(p, p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r_diag[j] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// One draw of the latent-factor model.
#[derive(Debug, Clone)]
pub struct GeneratedModel {
    pub u: Arc<DMatrix<f64>>,
    pub m: usize,
    pub d: usize,
    pub alpha0: DVector<f64>,
    pub beta0: DVector<f64>,
    pub sigma_q: Vec<f64>,
    pub sigma_0: Vec<f64>,
    pub sigma_yperp: Vec<f64>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub q: DMatrix<f64>,
}

impl GeneratedModel {
    pub fn p_dim(&self) -> usize {
        self.u.nrows()
    }

    /// `P = U·I_{d,p}·I_{m,d}`, the oracle directions.
    pub fn p(&self) -> DMatrix<f64> {
        self.u.columns(0, self.m).into_owned()
    }

    /// Relevant directions `P_y`.
    pub fn p_y(&self) -> DMatrix<f64> {
        self.u.columns(0, self.d).into_owned()
    }

    /// Latent loading `P₀ = I_{m,d}` inside the relevant block.
    pub fn p0(&self) -> DMatrix<f64> {
        DMatrix::identity(self.d, self.m)
    }

    /// Relevant directions orthogonal to the oracle subspace.
    pub fn r_y(&self) -> DMatrix<f64> {
        self.u.columns(self.m, self.d - self.m).into_owned()
    }

    /// Irrelevant directions `P_{y⊥}`.
    pub fn p_yperp(&self) -> DMatrix<f64> {
        let p = self.p_dim();
        self.u.columns(self.d, p - self.d).into_owned()
    }

    /// Feature variances in rotated coordinates.
    pub fn rotated_variances(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.sigma_0.iter().map(|s| s * s).collect();
        for (i, s) in self.sigma_q.iter().enumerate() {
            v[i] += s * s;
        }
        v.extend(self.sigma_yperp.iter().map(|s| s * s));
        v
    }

    /// Exact `(Σ_x, Σ_xy, E[y²])` of the generating distribution.
    pub fn population_cov(&self) -> Result<CovariancePair> {
        let variances = DVector::from_vec(self.rotated_variances());
        let mut scaled = (*self.u).clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= variances[j];
        }
        let sigma_x = PsdMatrix::new(&scaled * self.u.transpose())?;
        let (_, sigma_qy) = self.latent_covariance();
        let sigma_xy = self.p() * &sigma_qy;
        let sigma_yy = self.alpha0.dot(&sigma_qy) + 1.0;
        CovariancePair::new(sigma_x, sigma_xy, sigma_yy, 0)
    }

    /// `(Σ_q, Σ_{q,y} = Σ_q α₀)`.
    pub fn latent_covariance(&self) -> (PsdMatrix, DVector<f64>) {
        let var: Vec<f64> = self.sigma_q.iter().map(|s| s * s).collect();
        let sigma_qy = DVector::from_iterator(self.m, var.iter().zip(self.alpha0.iter()).map(|(v, a)| v * a));
        (PsdMatrix::from_diagonal(&var).expect("variances are non-negative"), sigma_qy)
    }
}

/// Generator with the rotation `U` built once per configuration.
pub struct Simulator {
    cfg: SimulationConfig,
    u: Arc<DMatrix<f64>>,
}

impl Simulator {
    pub fn new(cfg: SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let u = Arc::new(make_rotation(cfg.p, cfg.sparse, cfg.seed));
        Ok(Simulator { cfg, u })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Repetition `rep` draws from stream `rep + 1` of a ChaCha8 generator
    /// seeded with the config seed. Stream 0 is reserved for `U`.
    pub fn generate(&self, rep: usize) -> GeneratedModel {
        let SimulationConfig { n, p, d, m, .. } = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(rep as u64 + 1);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

        let sigma_q = latent_sds(m);
        let sigma_0 = residual_sds(self.cfg.sigma0, d);
        let sigma_yperp = irrelevant_sds(self.cfg.sigma_yperp_max, self.cfg.rank_yperp, p - d);

        let q = DMatrix::from_fn(n, m, |_, j| sigma_q[j] * normal());
        let mut rotated = DMatrix::zeros(n, p);
        for j in 0..d {
            for i in 0..n {
                rotated[(i, j)] = sigma_0[j] * normal();
            }
        }
        let mut head = rotated.columns_mut(0, m);
        head += &q;
        for j in 0..self.cfg.rank_yperp {
            for i in 0..n {
                rotated[(i, d + j)] = sigma_yperp[j] * normal();
            }
        }
        let alpha0 = DVector::from_fn(m, |i, _| (i + 1) as f64);
        let noise = DVector::from_fn(n, |_, _| normal());
        let y = &q * &alpha0 + noise;

        let x = if self.cfg.sparse { rotated } else { rotated * self.u.transpose() };
        let beta0 = self.u.columns(0, m) * &alpha0;
        GeneratedModel { u: Arc::clone(&self.u), m, d, alpha0, beta0, sigma_q, sigma_0, sigma_yperp, x, y, q }
    }
}

/// Builds the generator for `cfg` and draws repetition `rep`.
pub fn generate_dataset(cfg: &SimulationConfig, rep: usize) -> Result<GeneratedModel> {
    Ok(Simulator::new(cfg.clone())?.generate(rep))
}

/// One (repetition, method) row of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRow {
    pub rep: usize,
    pub method: Method,
    pub dof: usize,
    pub rel_approx_error: f64,
    pub rel_estimation_error: f64,
    pub kappa_reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub count: usize,
    pub rel_approx_error: Quartiles,
    pub rel_estimation_error: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<RepRow>,
    pub summary: Vec<MethodSummary>,
    pub failures: Vec<RepFailure>,
}

impl ExperimentResult {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartiles(mut values: Vec<f64>) -> Quartiles {
    values.sort_by(f64::total_cmp);
    Quartiles { q1: quantile(&values, 0.25), median: quantile(&values, 0.5), q3: quantile(&values, 0.75) }
}

/// Fits `method` with `dof` degrees of freedom on one dataset.
pub fn fit_method(
    method: Method,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    dof: usize,
    spectral: Option<&SpectralCovariance>,
) -> Result<FitReport> {
    let n = x.nrows() as f64;
    let owned;
    let spectral = match spectral {
        Some(s) => s,
        None if matches!(method, Method::Ls | Method::Pcr | Method::Ridge) => {
            owned = SpectralCovariance::from_data(x)?;
            &owned
        }
        None => return fit_non_spectral(method, x, y, dof),
    };
    let b = x.tr_mul(y) / n;
    let risk = |beta: &DVector<f64>| (y - x * beta).norm_squared() / n;
    match method {
        Method::Ls => {
            let beta = spectral.ls_beta(&b)?;
            let kappa = spectral.eigenvalues.first().unwrap_or(&f64::NAN) / spectral.eigenvalues.last().unwrap_or(&f64::NAN);
            let r = risk(&beta);
            Ok(FitReport::new(beta, Method::Ls, spectral.rank(), kappa).with_risk(r))
        }
        Method::Pcr => {
            let (beta, kappa) = spectral.pcr_beta(&b, dof)?;
            let r = risk(&beta);
            Ok(FitReport::new(beta, Method::Pcr, dof, kappa).with_risk(r))
        }
        Method::Ridge => {
            let lambda = spectral.ridge_lambda_for_dof(dof as f64)?;
            let (beta, kappa) = spectral.ridge_beta(&b, lambda)?;
            let r = risk(&beta);
            let mut report = FitReport::new(beta, Method::Ridge, dof, kappa).with_risk(r);
            report.lambda = Some(lambda);
            Ok(report)
        }
        _ => fit_non_spectral(method, x, y, dof),
    }
}

fn fit_non_spectral(method: Method, x: &DMatrix<f64>, y: &DVector<f64>, dof: usize) -> Result<FitReport> {
    match method {
        Method::Pls => fit_pls_data(x, y, dof),
        Method::Lasso => fit_lasso(x, y, dof, None),
        other => Err(Error::invalid(format!("{other} needs a spectral decomposition"))),
    }
}

/// Runs `cfg.reps` repetitions, fitting every method at `dof` (default `m`).
///
/// Repetitions run in parallel; rows come back ordered by repetition and
/// then by the order of `methods`. A failed fit is recorded and skipped.
pub fn run_experiment(cfg: &SimulationConfig, methods: &[Method], dof: Option<usize>) -> Result<ExperimentResult> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    let simulator = Simulator::new(cfg.clone())?;
    let dof = dof.unwrap_or(cfg.m);
    if dof == 0 {
        return Err(Error::invalid("dof must be at least 1"));
    }
    let needs_spectral = methods.iter().any(|m| matches!(m, Method::Ls | Method::Pcr | Method::Ridge));

    let per_rep: Vec<(Vec<RepRow>, Vec<RepFailure>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let model = simulator.generate(rep);
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let spectral = if needs_spectral {
                match SpectralCovariance::from_data(&model.x) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        for &method in methods.iter().filter(|m| matches!(m, Method::Ls | Method::Pcr | Method::Ridge)) {
                            failures.push(RepFailure { rep, method, error: e.to_string() });
                        }
                        None
                    }
                }
            } else {
                None
            };
            for &method in methods {
                let spectral_method = matches!(method, Method::Ls | Method::Pcr | Method::Ridge);
                if spectral_method && spectral.is_none() {
                    continue;
                }
                let outcome = fit_method(method, &model.x, &model.y, dof, spectral.as_ref())
                    .and_then(|fit| evaluate(fit, &model.x, &model.y, Some(&model.beta0)));
                match outcome {
                    Ok(fit) => rows.push(RepRow {
                        rep,
                        method,
                        dof: fit.dof,
                        rel_approx_error: fit.metric("rel_approx_error").unwrap_or(f64::NAN),
                        rel_estimation_error: fit.metric("rel_estimation_error").unwrap_or(f64::NAN),
                        kappa_reduced: fit.kappa_reduced,
                    }),
                    Err(e) => failures.push(RepFailure { rep, method, error: e.to_string() }),
                }
            }
            (rows, failures)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_rep {
        rows.extend(r);
        failures.extend(f);
    }
    let mut grouped: BTreeMap<Method, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in &rows {
        let entry = grouped.entry(row.method).or_default();
        entry.0.push(row.rel_approx_error);
        entry.1.push(row.rel_estimation_error);
    }
    let summary = methods
        .iter()
        .filter_map(|m| {
            grouped.remove(m).map(|(approx, est)| MethodSummary {
                method: *m,
                count: approx.len(),
                rel_approx_error: quartiles(approx),
                rel_estimation_error: quartiles(est),
            })
        })
        .collect();
    Ok(ExperimentResult { rows, summary, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_pls, sample_covariances};
    use crate::linalg::{orthonormality_defect, spectral_norm};

    fn small(sparse: bool) -> SimulationConfig {
        SimulationConfig { n: 60, p: 12, d: 6, m: 3, sigma0: 0.1, sigma_yperp_max: 1.0, rank_yperp: 4, sparse, seed: 7, reps: 3 }
    }

    #[test]
    fn sds_follow_the_scheme() {
        let q = latent_sds(25);
        assert_eq!(q[0], 5.0);
        assert_eq!(q[24], 1.0);
        assert!(q.windows(2).all(|w| w[0] > w[1]));
        let r = residual_sds(0.1, 100);
        assert!((r[0] - 0.1).abs() < 1e-15 && (r[99] - 1e-3).abs() < 1e-15);
        let z = irrelevant_sds(1.0, 3, 5);
        assert_eq!(z.len(), 5);
        assert_eq!(&z[3..], &[0.0, 0.0]);
        assert!((z[2] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(make_rotation(4, true, 1), DMatrix::<f64>::identity(4, 4));
        let a = make_rotation(5, false, 3);
        assert_eq!(a, make_rotation(5, false, 3));
        assert!(orthonormality_defect(&a) < 1e-10);
        let two = make_rotation(2, false, 9);
        assert!((two.determinant().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small(false);
        cfg.m = 7;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        let mut cfg = small(false);
        cfg.rank_yperp = 7;
        assert!(cfg.validate().is_err());
        let mut cfg = small(false);
        cfg.sigma0 = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn snr_uses_formula_value() {
        let cfg = SimulationConfig::default();
        assert!((cfg.snr() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn generation_is_reproducible() {
        let sim = Simulator::new(small(false)).unwrap();
        let a = sim.generate(2);
        let b = generate_dataset(&small(false), 2).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_ne!(sim.generate(1).y, a.y);
    }

    #[test]
    fn sparse_support_and_oracle() {
        let model = generate_dataset(&small(true), 0).unwrap();
        let expected: Vec<f64> = vec![1.0, 2.0, 3.0].into_iter().chain(std::iter::repeat_n(0.0, 9)).collect();
        assert_eq!(model.beta0.as_slice(), expected.as_slice());
    }

    #[test]
    fn noiseless_relevant_columns_vanish() {
        let mut cfg = small(true);
        cfg.sigma0 = 0.0;
        let model = generate_dataset(&cfg, 0).unwrap();
        for j in cfg.m..cfg.d {
            assert!(model.x.column(j).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn factor_matrices_are_orthonormal() {
        let model = generate_dataset(&small(false), 0).unwrap();
        assert!(orthonormality_defect(&model.p()) < 1e-10);
        assert!(orthonormality_defect(&model.p_y()) < 1e-10);
        assert!(((model.p_y() * model.p0()) - model.p()).amax() < 1e-15);
        assert!((&model.beta0 - model.p() * &model.alpha0).amax() < 1e-12);
    }

    #[test]
    fn population_block_structure() {
        let model = generate_dataset(&small(false), 0).unwrap();
        let cov = model.population_cov().unwrap();
        let cross = model.p().transpose() * cov.sigma_x.as_matrix() * model.p_yperp();
        assert!(cross.amax() < 1e-12);
        let (sq, sqy) = model.latent_covariance();
        assert!((&cov.sigma_xy - model.p() * &sqy).amax() < 1e-12);
        assert_eq!(sq.dim(), 3);
    }

    #[test]
    fn noiseless_population_pls_recovers_oracle() {
        let mut cfg = small(false);
        cfg.sigma0 = 0.0;
        cfg.sigma_yperp_max = 10.0;
        let model = generate_dataset(&cfg, 0).unwrap();
        let fit = fit_pls(&model.population_cov().unwrap(), cfg.m).unwrap();
        assert!((&fit.beta - &model.beta0).norm() <= 1e-8 * model.beta0.norm());
    }

    #[test]
    fn sample_covariance_approaches_population() {
        let cfg = SimulationConfig { n: 20_000, p: 10, d: 6, m: 3, sigma0: 0.1, sigma_yperp_max: 1.0, rank_yperp: 4, sparse: false, seed: 0, reps: 1 };
        let mut hits = 0;
        for seed in 0..20 {
            let cfg = SimulationConfig { seed, ..cfg.clone() };
            let model = generate_dataset(&cfg, 0).unwrap();
            let pop = model.population_cov().unwrap();
            let sample = sample_covariances(&model.x, &model.y).unwrap();
            let dev = spectral_norm(&(sample.sigma_x.as_matrix() - pop.sigma_x.as_matrix()));
            let bound = 5.0 * spectral_norm(pop.sigma_x.as_matrix()) * (10.0f64 / 20_000.0).sqrt();
            if dev <= bound {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}");
    }

    #[test]
    fn noiseless_response_depends_on_oracle_directions_only() {
        // With σ₀ = 0 the population coefficient of X on directions outside
        // span(P) is zero: the least-squares fit of y on XP⊥ after removing XP
        // vanishes in the population covariance.
        let mut cfg = small(false);
        cfg.sigma0 = 0.0;
        let model = generate_dataset(&cfg, 0).unwrap();
        let cov = model.population_cov().unwrap();
        let outside = model.u.columns(cfg.m, cfg.p - cfg.m).into_owned();
        assert!((outside.transpose() * &cov.sigma_xy).amax() < 1e-12);
    }

    #[test]
    fn experiment_rows_are_ordered_and_complete() {
        let cfg = small(false);
        let methods = [Method::Pls, Method::Pcr, Method::Lasso, Method::Ridge, Method::Ls];
        let out = run_experiment(&cfg, &methods, None).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.rows.len(), 15);
        for (i, row) in out.rows.iter().enumerate() {
            assert_eq!(row.rep, i / 5);
            assert_eq!(row.method, methods[i % 5]);
        }
        assert_eq!(out.summary.len(), 5);
        let again = run_experiment(&cfg, &methods, None).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
