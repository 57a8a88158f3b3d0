//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use krylov_pls::estimators::{fit_min_norm_ls, fit_pls, sample_covariances, CovariancePair, FitReport, Method};
use krylov_pls::irpls::{irpls_fit, GlmFamily};
use krylov_pls::krylov::{build_krylov, default_eps_grid, estimate_kappa_b, krylov_dimension, subspace_distance};
use krylov_pls::linalg::{pseudo_inverse, PsdMatrix};
use krylov_pls::perturbation::{
    audit_krylov_basis_bound, audit_ls_bound, audit_pls_bound, audit_population_bias, summarize, PerturbationReport,
    TheoremTag,
};
use krylov_pls::selection::{early_stop_scan, select_by_conditioning, ScanStop};
use krylov_pls::simulation::{generate_dataset, run_experiment, SimulationConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// First `cols` columns of a Haar-like orthogonal matrix.
fn orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian(rows, cols, rng).qr().q().columns(0, cols).into_owned()
}

/// `QΛQᵀ` with the given eigenvalues and a random eigenbasis.
fn psd_with_spectrum(eigs: &[f64], rng: &mut ChaCha8Rng) -> PsdMatrix {
    let q = orthonormal(eigs.len(), eigs.len(), rng);
    PsdMatrix::new(&q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose()).unwrap()
}

/// Orthonormal basis of the Krylov space from a QR of the power basis,
/// independent of the Lanczos implementation.
fn qr_krylov(a: &DMatrix<f64>, b: &DVector<f64>, s: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(b.len(), s);
    let mut v = b.normalize();
    for j in 0..s {
        k.set_column(j, &v);
        v = (a * v).normalize();
    }
    k.qr().q().columns(0, s).into_owned()
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = b.norm();
    if scale == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / scale
    }
}

// 1. PLS at the Krylov dimension equals minimum-norm least squares.
fn pls_ls_coincidence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = rng.random_range(1..=20);
        let rank = rng.random_range(1..=p);
        let mut eigs: Vec<f64> = (0..rank).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
        eigs.resize(p, 0.0);
        let a = psd_with_spectrum(&eigs, &mut rng);
        let b = a.mul_vec(&DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng)));
        let cov = CovariancePair::new(a, b, 1.0, 0).unwrap();
        let s = krylov_dimension(&cov.sigma_x, &cov.sigma_xy, None).unwrap();
        let pls = fit_pls(&cov, s).unwrap();
        let ls = fit_min_norm_ls(&cov).unwrap();
        worst = worst.max(rel(&pls.beta, &ls.beta));
    }
    outcome(worst <= 1e-8, format!("200 problems, max relative error {worst:.2e} (tol 1e-8)"))
}

// 2. Noiseless population PLS recovers the oracle.
fn noiseless_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_beta, mut worst_dist): (f64, f64) = (0.0, 0.0);
    let mut max_yperp: f64 = 0.0;
    for i in 0..50 {
        let m = rng.random_range(1..=6);
        let d = rng.random_range(m..=m + 10);
        let p = rng.random_range(d..=d + 30);
        let sigma_yperp_max = if i % 5 == 0 { 10.0 } else { 10f64.powf(rng.random_range(-1.0..1.0)) };
        max_yperp = max_yperp.max(sigma_yperp_max);
        let cfg = SimulationConfig {
            n: 5,
            p,
            d,
            m,
            sigma0: 0.0,
            sigma_yperp_max,
            rank_yperp: rng.random_range(0..=p - d),
            sparse: rng.random_bool(0.3),
            seed: rng.random(),
            reps: 1,
        };
        let model = generate_dataset(&cfg, 0).unwrap();
        let pop = model.population_cov().unwrap();
        let fit = fit_pls(&pop, m).unwrap();
        worst_beta = worst_beta.max(rel(&fit.beta, &model.beta0));
        let kb = build_krylov(&pop.sigma_x, &pop.sigma_xy, m, None).unwrap();
        let dist = if kb.effective_dim == m { subspace_distance(&kb.basis, &model.p()).unwrap() } else { f64::INFINITY };
        worst_dist = worst_dist.max(dist);
    }
    outcome(
        worst_beta <= 1e-8 && worst_dist <= 1e-8,
        format!(
            "50 configs (sigma_yperp up to {max_yperp}), max beta error {worst_beta:.2e}, max distance {worst_dist:.2e} (tol 1e-8)"
        ),
    )
}

// 3. Population bias and distance bounds under the noise-level assumption.
fn population_bias() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut admissible, mut bias_ok, mut dist_ok) = (0, 0, 0);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(2..=4);
        let d = rng.random_range(m..=m + 6);
        let p = rng.random_range(d..=d + 8);
        let mut cfg = SimulationConfig {
            n: 5,
            p,
            d,
            m,
            sigma0: 0.0,
            sigma_yperp_max: 10f64.powf(rng.random_range(-1.0..1.0)),
            rank_yperp: rng.random_range(0..=p - d),
            sparse: rng.random_bool(0.3),
            seed: rng.random(),
            reps: 1,
        };
        let kappa_seed = rng.random();
        let boundary = audit_population_bias(&generate_dataset(&cfg, 0).unwrap(), 100, kappa_seed).unwrap().sigma0_sq_boundary;
        cfg.sigma0 = (rng.random_range(0.05..0.999) * boundary).sqrt();
        let audit = audit_population_bias(&generate_dataset(&cfg, 0).unwrap(), 100, kappa_seed).unwrap();
        if !audit.bias.admissible {
            continue;
        }
        admissible += 1;
        bias_ok += usize::from(audit.bias.satisfied == Some(true));
        dist_ok += usize::from(audit.distance.satisfied == Some(true));
        worst_ratio = worst_ratio.max(audit.bias.observed / audit.bias.bound);
    }
    outcome(
        admissible == 50 && bias_ok == admissible && dist_ok == admissible,
        format!(
            "{admissible}/50 admissible, bias bound held {bias_ok}, distance bound held {dist_ok}, max observed/bound {worst_ratio:.2e}"
        ),
    )
}

// 4. Perturbation audits.
struct Problem {
    a: PsdMatrix,
    b: DVector<f64>,
    m: usize,
    trials: usize,
}

fn audit_problems() -> Vec<Problem> {
    let mut out = Vec::new();
    for m in [2, 3] {
        out.push(Problem {
            a: PsdMatrix::from_diagonal(&[4.0, 2.0, 1.0]).unwrap(),
            b: DVector::from_element(3, 1.0),
            m,
            trials: 90,
        });
    }
    for _ in 0..2 {
        out.push(Problem {
            a: PsdMatrix::from_diagonal(&[400.0, 1.0, 1.0, 1.0, 1.0]).unwrap(),
            b: DVector::from_element(5, 1.0),
            m: 2,
            trials: 90,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    while out.len() < 24 {
        let p = rng.random_range(3..=10);
        let rank = rng.random_range(2..=p);
        let mut eigs: Vec<f64> = (0..rank).map(|_| rng.random_range(0.2..5.0)).collect();
        eigs.resize(p, 0.0);
        let a = psd_with_spectrum(&eigs, &mut rng);
        let b = a.mul_vec(&DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng)));
        let m = rng.random_range(2..=rank.min(4));
        out.push(Problem { a, b, m, trials: 8 });
    }
    out
}

fn audit_line(name: &str, reports: &[PerturbationReport], tag: TheoremTag) -> (bool, String) {
    let subset: Vec<PerturbationReport> = reports.iter().filter(|r| r.theorem == tag).cloned().collect();
    let s = summarize(&subset);
    let pass = s.admissible >= 500 && s.rate >= 0.99;
    (pass, format!("{name} {}/{} ({:.1}%)", s.satisfied, s.admissible, 100.0 * s.rate))
}

fn perturbation_audits() -> Outcome {
    let problems = audit_problems();
    let fractions = [0.9, 0.5, 0.1];
    let (mut ls, mut pls, mut kry) = (Vec::new(), Vec::new(), Vec::new());
    for (i, pr) in problems.iter().enumerate() {
        let frac = fractions[i % fractions.len()];
        let seed = 1000 * i as u64;
        let eig = pr.a.as_matrix().clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.iter().copied().filter(|&v| v > 1e-10 * lmax).fold(f64::INFINITY, f64::min);
        let kappa2 = lmax / lmin;
        ls.extend(audit_ls_bound(&pr.a, &pr.b, frac / (2.0 * kappa2), pr.trials, seed).unwrap());

        let kb = estimate_kappa_b(&pr.a, &pr.b, pr.m, &default_eps_grid(), 200, seed).unwrap();
        let probe = audit_pls_bound(&pr.a, &pr.b, pr.m, 0.0, 1, seed, &kb).unwrap();
        let limit = 1.0 / probe[0].details["c_m"].max(probe[0].details["d_m"]);
        pls.extend(audit_pls_bound(&pr.a, &pr.b, pr.m, frac * limit, pr.trials, seed, &kb).unwrap());
        let k = kb.value;
        let limit = 1.0 / (64.0 * k * (k + 1.0));
        kry.extend(audit_krylov_basis_bound(&pr.a, &pr.b, pr.m, frac * limit, pr.trials, seed, &kb).unwrap());
    }
    let lines = [
        audit_line("ls", &ls, TheoremTag::LsPert),
        audit_line("pls", &pls, TheoremTag::PlsPert),
        audit_line("krylov basis", &kry, TheoremTag::KrylovPert),
        audit_line("krylov b_m", &kry, TheoremTag::KrylovProjB),
        audit_line("krylov A_m", &kry, TheoremTag::KrylovProjA),
    ];
    outcome(lines.iter().all(|l| l.0), lines.map(|l| l.1).join("; "))
}

// 5. Monte-Carlo trends at K = 50.
fn trend_config(case: char, seed: u64) -> SimulationConfig {
    let base = SimulationConfig { sigma0: 0.1, sigma_yperp_max: 1.0, seed, reps: 50, ..SimulationConfig::default() };
    match case {
        'a' => SimulationConfig { sparse: false, ..base },
        'b' => SimulationConfig { sparse: true, ..base },
        'c' => SimulationConfig { n: 200, p: 1000, rank_yperp: 900, ..base },
        _ => SimulationConfig { n: 200, p: 1000, rank_yperp: 100, ..base },
    }
}

fn simulation_trends() -> Outcome {
    let methods = [Method::Pls, Method::Pcr, Method::Lasso];
    let mut parts = Vec::new();
    let mut pass = true;
    for case in ['a', 'b', 'c', 'd'] {
        let mut held = 0;
        let mut medians = Vec::new();
        for seed in 1..=5 {
            let res = run_experiment(&trend_config(case, seed), &methods, None).unwrap();
            let med = |m: Method| res.summary_for(m).map_or(f64::NAN, |s| s.rel_estimation_error.median);
            let (pls, pcr, lasso) = (med(Method::Pls), med(Method::Pcr), med(Method::Lasso));
            let ok = match case {
                'a' => pls < pcr,
                'b' => lasso < pcr,
                'c' => pls > pcr && pls > lasso,
                _ => pls <= pcr,
            };
            held += usize::from(ok);
            medians.push(format!("{pls:.3}/{pcr:.3}/{lasso:.3}"));
        }
        pass &= held >= 4;
        parts.push(format!("({case}) {held}/5 [pls/pcr/lasso {}]", medians.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

// 6. Lemma property suites.
fn projection_invariance(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(1..=6);
    let d = rng.random_range(m..=m + 8);
    let eigs: Vec<f64> = (0..m).map(|j| 1.0 + j as f64 + rng.random_range(0.0..0.5)).collect();
    let a = psd_with_spectrum(&eigs, rng);
    let b = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
    let p = orthonormal(d, m, rng);
    let a_t = PsdMatrix::new(&p * a.as_matrix() * p.transpose()).unwrap();
    let b_t = &p * &b;
    let k = build_krylov(&a, &b, m, None).unwrap();
    let k_t = build_krylov(&a_t, &b_t, d, None).unwrap();
    if k.effective_dim != k_t.effective_dim {
        return f64::INFINITY;
    }
    let dist = subspace_distance(&k_t.basis, &(&p * &k.basis)).unwrap();
    let zeta = a.as_matrix().clone().try_inverse().unwrap() * &b;
    let zeta_t = pseudo_inverse(&a_t, None).unwrap().mul_vec(&b_t);
    dist.max(rel(&zeta_t, &(&p * zeta)))
}

fn shift_invariance(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.random_range(3..=12);
    let rank = rng.random_range(1..d);
    let q = orthonormal(d, d, rng);
    let range = q.columns(0, rank).into_owned();
    let null = q.columns(rank, d - rank).into_owned();
    // Separated eigenvalues and a seed touching every eigenvector keep the
    // Krylov dimension numerically well defined.
    let eigs = DVector::from_fn(rank, |j, _| 1.0 + j as f64 + rng.random_range(0.0..0.5));
    let a = &range * DMatrix::from_diagonal(&eigs) * range.transpose();
    // Roundoff in the null space grows like (‖Ψ‖/β)ˢ, so Ψ stays below λ_min(A).
    let s = gaussian(d - rank, d - rank, rng);
    let gram = &s * s.transpose();
    let psi = &null * (gram.scale(rng.random_range(0.1..1.0) / gram.norm())) * null.transpose();
    let coef = DVector::from_fn(rank, |_, _| rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let b = &range * coef;
    let shifted = &a + &psi;
    let m = krylov_dimension(&a, &b, None).unwrap();
    let mut worst: f64 = 0.0;
    for s in 1..=d {
        let lhs = build_krylov(&shifted, &b, s, None).unwrap();
        let rhs = build_krylov(&a, &b, s.min(m), None).unwrap();
        if lhs.effective_dim != s.min(m) || rhs.effective_dim != s.min(m) {
            return f64::INFINITY;
        }
        worst = worst.max(subspace_distance(&lhs.basis, &rhs.basis).unwrap());
    }
    worst
}

fn range_membership(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.random_range(2..=30);
    let p = rng.random_range(2..=30);
    let rank = rng.random_range(1..=n.min(p));
    let x = gaussian(n, rank, rng) * gaussian(rank, p, rng);
    let y = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let cov = sample_covariances(&x, &y).unwrap();
    // Rows of X lie in the range of the sample covariance as well.
    let proj = {
        let pinv = pseudo_inverse(&cov.sigma_x, None).unwrap();
        cov.sigma_x.as_matrix() * pinv.as_matrix()
    };
    let row_defect = (0..n)
        .map(|i| {
            let r = x.row(i).transpose();
            let norm = r.norm();
            if norm == 0.0 { 0.0 } else { (&r - &proj * &r).norm() / norm }
        })
        .fold(0.0, f64::max);
    cov.range_defect().unwrap().max(row_defect)
}

fn orthogonal_distance(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(1..=5);
    let p = rng.random_range(2 * m..=2 * m + 10);
    let q = orthonormal(p, 2 * m, rng);
    let b1 = q.columns(0, m).into_owned();
    let b2 = q.columns(m, m).into_owned();
    (subspace_distance(&b1, &b2).unwrap() - std::f64::consts::FRAC_PI_2).abs()
}

fn lemma_suites() -> Outcome {
    let suites: [(&str, fn(&mut ChaCha8Rng) -> f64); 4] = [
        ("projection", projection_invariance),
        ("shift", shift_invariance),
        ("range", range_membership),
        ("orthogonal distance", orthogonal_distance),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, case)) in suites.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + i as u64);
        let start = Instant::now();
        let worst = (0..100).map(|_| case(&mut rng)).fold(0.0, f64::max);
        let elapsed = start.elapsed();
        let ok = worst <= 1e-8 && elapsed <= Duration::from_secs(10);
        pass &= ok;
        parts.push(format!("{name} max {worst:.2e} in {:.2}s", elapsed.as_secs_f64()));
    }
    outcome(pass, parts.join("; "))
}

// 7. IRPLS against a dense IRLS oracle.
fn irls_oracle(x: &DMatrix<f64>, y: &DVector<f64>, iters: usize) -> Vec<DVector<f64>> {
    let mut beta = DVector::zeros(x.ncols());
    let mut out = vec![beta.clone()];
    for _ in 0..iters {
        let eta = x * &beta;
        let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let w = mu.map(|m| m * (1.0 - m));
        let mut xtwx = DMatrix::zeros(x.ncols(), x.ncols());
        for i in 0..x.nrows() {
            let row = x.row(i);
            xtwx += row.transpose() * row * w[i];
        }
        beta += xtwx.cholesky().expect("weighted Gram is definite").solve(&x.tr_mul(&(y - mu)));
        out.push(beta.clone());
    }
    out
}

fn irpls_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let x = gaussian(20, 5, &mut rng);
    let truth = DVector::from_vec(vec![0.8, -0.5, 0.3, 0.0, 0.4]);
    let y = (&x * &truth).map(|e| if rng.random_bool(1.0 / (1.0 + (-e).exp())) { 1.0 } else { 0.0 });
    let trace = irpls_fit(&x, &y, GlmFamily::Binomial, 5, 10, f64::NEG_INFINITY).unwrap();
    let oracle = irls_oracle(&x, &y, 10);
    let logistic_gap = trace
        .iterates
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).norm() / b.norm().max(1.0))
        .fold(0.0, f64::max);
    let full = trace.iterations() == 10;

    let cov = sample_covariances(&x, &y).unwrap();
    let mut gaussian_gap: f64 = 0.0;
    for s in 1..=5 {
        let first = irpls_fit(&x, &y, GlmFamily::Gaussian, s, 1, 0.0).unwrap();
        gaussian_gap = gaussian_gap.max(rel(&first.iterates[1], &fit_pls(&cov, s).unwrap().beta));
    }
    outcome(
        full && logistic_gap <= 1e-6 && gaussian_gap <= 1e-10,
        format!(
            "{} logistic iterations, max gap to IRLS {logistic_gap:.2e} (tol 1e-6); gaussian vs PLS max gap {gaussian_gap:.2e}",
            trace.iterations()
        ),
    )
}

// 8. Model-selection contract.
fn selection_contract() -> Outcome {
    // Five well-separated eigenvalues carry the seed; the sixth, 0.05, is
    // barely excited, so only the full Krylov space sees it and κ₂(T_6) = 200.
    let diag = [10.0, 8.0, 6.0, 4.0, 2.0, 0.05, 3.0];
    let b = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1e-3, 0.0]);
    let a = PsdMatrix::from_diagonal(&diag).unwrap();
    let a_dense = a.as_matrix().clone();
    let expected = (1..=6)
        .find(|&s| {
            let k = qr_krylov(&a_dense, &b, s);
            let t = k.transpose() * &a_dense * &k;
            let e = t.symmetric_eigen().eigenvalues;
            e.max() / e.min() > 100.0
        })
        .unwrap_or(0);
    let cov = CovariancePair::new(a, b, 1.0, 0).unwrap();
    let scan = early_stop_scan(&cov, 100.0, 7).unwrap();
    let stop_ok = expected == 6 && scan.stopped_at == expected && scan.stop == ScanStop::Threshold;

    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut monotone = 0;
    for _ in 0..200 {
        let len = rng.random_range(1..=12);
        let fits: Vec<FitReport> = (1..=len)
            .map(|dof| {
                FitReport::new(DVector::zeros(1), Method::Pls, dof, 10f64.powf(rng.random_range(0.0..4.0)))
                    .with_risk(rng.random_range(0.0..1.0))
            })
            .collect();
        let k1: f64 = 10f64.powf(rng.random_range(0.0..4.0));
        let k2: f64 = 10f64.powf(rng.random_range(0.0..4.0));
        let (lo, hi) = (k1.min(k2), k1.max(k2));
        let a = select_by_conditioning(&fits, lo).unwrap();
        let b = select_by_conditioning(&fits, hi).unwrap();
        let nested = a.admissible_set.iter().all(|d| b.admissible_set.contains(d));
        let better = b.admissible_set.is_empty() || b.chosen().in_sample_risk <= a.chosen().in_sample_risk || a.admissible_set.is_empty();
        monotone += usize::from(nested && better);
    }
    outcome(
        stop_ok && monotone == 200,
        format!(
            "scan stopped at s = {} (oracle {expected}, {:?}); monotone on {monotone}/200 random fit sets",
            scan.stopped_at, scan.stop
        ),
    )
}

// 9. Byte-identical simulation output.
fn determinism() -> Outcome {
    let args = ["simulate", "--reps", "5", "--seed", "2024", "--methods", "pls,pcr,lasso"];
    let run = || Command::new(env!("CARGO_BIN_EXE_kpls")).args(args).output().expect("kpls runs");
    let (a, b) = (run(), run());
    let ok = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(ok, format!("two runs of {} bytes each, identical: {}", a.stdout.len(), a.stdout == b.stdout))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 9] = [
        ("1 PLS-LS coincidence", pls_ls_coincidence, 5),
        ("2 noiseless oracle exactness", noiseless_oracle, 10),
        ("3 population bias bound", population_bias, 60),
        ("4 perturbation audits", perturbation_audits, 120),
        ("5 simulation trends", simulation_trends, 900),
        ("6 lemma property suites", lemma_suites, 40),
        ("7 IRPLS equivalence", irpls_equivalence, 2),
        ("8 model-selection contract", selection_contract, 2),
        ("9 determinism", determinism, 60),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = result.pass && secs <= budget as f64;
        failed += usize::from(!pass);
        println!(
            "criterion {name}: {} ({:.1}s of {budget}s) {}",
            if pass { "PASS" } else { "FAIL" },
            secs,
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
