use krylov_pls::krylov::{default_eps_grid, estimate_kappa_b, krylov_dimension, KappaBEstimate};
use krylov_pls::perturbation::{
    audit_krylov_basis_bound, audit_ls_bound, audit_pls_bound, summarize, AuditSummary, PerturbationReport, TheoremTag,
};
use krylov_pls::PsdMatrix;
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{read_problem, Sink};
use crate::manifest::RunManifest;
use crate::{PerturbArgs, TheoremArg};

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    theorem: &'static str,
    trial: usize,
    epsilon: f64,
    admissible: bool,
    observed: f64,
    observed_ratio: f64,
    bound: f64,
    satisfied: Option<bool>,
    warning: Option<&'a str>,
}

impl<'a> From<&'a PerturbationReport> for ReportRow<'a> {
    fn from(r: &'a PerturbationReport) -> Self {
        ReportRow {
            theorem: r.theorem.as_str(),
            trial: r.trial,
            epsilon: r.epsilon,
            admissible: r.admissible,
            observed: r.observed,
            observed_ratio: r.observed_ratio,
            bound: r.bound,
            satisfied: r.satisfied,
            warning: r.warning.as_deref(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TheoremSummary {
    theorem: TheoremTag,
    #[serde(flatten)]
    summary: AuditSummary,
}

/// Parses `diag:v1,v2,...`. The seed vector is 1 on the support and 0 off it.
fn synthetic(problem: &str) -> CliResult<(PsdMatrix, DVector<f64>)> {
    let Some(values) = problem.strip_prefix("diag:") else {
        return Err(CliError::Usage(format!("unknown synthetic problem '{problem}' (expected diag:v1,v2,...)")));
    };
    let diag = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad diagonal entry '{v}'"))))
        .collect::<CliResult<Vec<f64>>>()?;
    let a = PsdMatrix::from_diagonal(&diag)?;
    let b = DVector::from_iterator(diag.len(), diag.iter().map(|&d| if d > 0.0 { 1.0 } else { 0.0 }));
    Ok((a, b))
}

pub fn perturb(args: PerturbArgs) -> CliResult<()> {
    if !(args.epsilon >= 0.0 && args.epsilon.is_finite()) {
        return Err(CliError::Usage(format!("--epsilon must be finite and >= 0, got {}", args.epsilon)));
    }
    let (a, b, source) = match (&args.matrix, &args.synthetic) {
        (Some(path), _) => {
            let (m, b) = read_problem(path)?;
            let a = PsdMatrix::new(m)?;
            // Without a seed column, A·1 lies in the range of A.
            let b = b.unwrap_or_else(|| a.mul_vec(&DVector::from_element(a.dim(), 1.0)));
            (a, b, path.display().to_string())
        }
        (None, Some(problem)) => {
            let (a, b) = synthetic(problem)?;
            (a, b, problem.clone())
        }
        (None, None) => unreachable!("clap requires one problem source"),
    };

    let mut kappa_b: Option<KappaBEstimate> = None;
    let mut m_used = None;
    let reports = match args.theorem {
        TheoremArg::Ls => audit_ls_bound(&a, &b, args.epsilon, args.trials, args.seed)?,
        TheoremArg::Pls | TheoremArg::Krylov => {
            let m = match args.m {
                Some(m) => m,
                None => krylov_dimension(&a, &b, None)?,
            };
            let k = estimate_kappa_b(&a, &b, m, &default_eps_grid(), args.kappa_trials, args.seed)?;
            let reports = if args.theorem == TheoremArg::Pls {
                audit_pls_bound(&a, &b, m, args.epsilon, args.trials, args.seed, &k)?
            } else {
                audit_krylov_basis_bound(&a, &b, m, args.epsilon, args.trials, args.seed, &k)?
            };
            kappa_b = Some(k);
            m_used = Some(m);
            reports
        }
    };

    let mut tags: Vec<TheoremTag> = Vec::new();
    for r in &reports {
        if !tags.contains(&r.theorem) {
            tags.push(r.theorem);
        }
    }
    let summaries: Vec<TheoremSummary> = tags
        .iter()
        .map(|&t| {
            let subset: Vec<PerturbationReport> = reports.iter().filter(|r| r.theorem == t).cloned().collect();
            TheoremSummary { theorem: t, summary: summarize(&subset) }
        })
        .collect();
    for s in &summaries {
        eprintln!(
            "{}: {}/{} admissible trials satisfied the bound ({} trials)",
            s.theorem.as_str(),
            s.summary.satisfied,
            s.summary.admissible,
            s.summary.total
        );
    }

    let sink = Sink::new(args.out.clone())?;
    let mut manifest = RunManifest::new(
        "perturb",
        json!({
            "problem": source,
            "theorem": format!("{:?}", args.theorem).to_lowercase(),
            "epsilon": args.epsilon,
            "trials": args.trials,
            "m": m_used,
            "kappa_trials": args.kappa_trials,
        }),
        Some(args.seed),
    );
    if args.matrix.is_some() {
        manifest.inputs.push(source);
    }
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    manifest.output(sink.table("reports.csv", &rows)?);
    manifest.output(sink.json("reports.json", &reports)?);
    manifest.output(sink.json("summary.json", &json!({ "summaries": summaries, "kappa_b": kappa_b }))?);
    sink.json("manifest.json", &manifest)?;
    Ok(())
}
