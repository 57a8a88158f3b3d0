use krylov_pls::estimators::{evaluate_prediction, FitReport, Method, SpectralCovariance};
use krylov_pls::selection::{select_by_conditioning, SelectionOutcome};
use krylov_pls::simulation::fit_method;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{read_dataset, Sink};
use crate::manifest::RunManifest;
use crate::FitArgs;

/// One fit evaluated on the test set.
#[derive(Debug, Clone, Serialize)]
struct DofRow {
    method: Method,
    dof: usize,
    lambda: Option<f64>,
    kappa_reduced: f64,
    in_sample_risk: f64,
    correlation: f64,
    rel_prediction_error: f64,
}

#[derive(Debug, Serialize)]
struct MethodChoice {
    method: Method,
    selection: SelectionOutcome,
    chosen: DofRow,
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let train = read_dataset(&args.train)?;
    let test = read_dataset(&args.test)?;
    if train.features != test.features {
        return Err(CliError::Data(format!(
            "train has columns [{}], test has [{}]",
            train.features.join(","),
            test.features.join(",")
        )));
    }
    if let Some(k) = args.kappa0 {
        if !(k > 0.0) {
            return Err(CliError::Usage(format!("--kappa0 must be positive, got {k}")));
        }
    }
    let (train, test) = if args.center {
        let (mx, my) = train.means();
        (train.shifted(&mx, my), test.shifted(&mx, my))
    } else {
        (train, test)
    };

    let (lo, hi) = args.dof_range;
    let spectral = SpectralCovariance::from_data(&train.x)?;
    let mut rows = Vec::new();
    let mut choices = Vec::new();
    for &method in &args.method {
        // LS has no tuning parameter.
        let dofs: Vec<usize> = if method == Method::Ls { vec![lo] } else { (lo..=hi).collect() };
        let mut fits: Vec<FitReport> = Vec::new();
        for dof in dofs {
            match fit_method(method, &train.x, &train.y, dof, Some(&spectral)) {
                Ok(report) => {
                    if let Some(w) = &report.warning {
                        log::warn!("{method} at dof {dof}: {w}");
                    }
                    fits.push(evaluate_prediction(report, &test.x, &test.y)?);
                }
                Err(e) => log::warn!("{method} at dof {dof} skipped: {e}"),
            }
        }
        if fits.is_empty() {
            return Err(CliError::Usage(format!("{method}: no dof in {lo}..{hi} could be fitted")));
        }
        let method_rows: Vec<DofRow> = fits.iter().map(row).collect();
        if let Some(kappa0) = args.kappa0 {
            let selection = select_by_conditioning(&fits, kappa0)?;
            if let Some(w) = &selection.warning {
                log::warn!("{method}: {w}");
            }
            let chosen = method_rows.iter().find(|r| r.dof == selection.chosen_dof).cloned().expect("chosen dof was fitted");
            if matches!(&args.out, None) {
                eprintln!("{method}: chosen dof {} (kappa {:.3e})", chosen.dof, chosen.kappa_reduced);
            }
            choices.push(MethodChoice { method, selection, chosen });
        }
        rows.extend(method_rows);
    }

    let sink = Sink::new(args.out.clone())?;
    let mut manifest = RunManifest::new(
        "fit",
        json!({
            "methods": args.method,
            "dof_range": [lo, hi],
            "kappa0": args.kappa0,
            "center": args.center,
        }),
        None,
    );
    manifest.inputs = vec![args.train.display().to_string(), args.test.display().to_string()];
    manifest.output(sink.table("per_dof.csv", &rows)?);
    if args.kappa0.is_some() {
        manifest.output(sink.json("chosen.json", &json!({ "kappa0": args.kappa0, "methods": choices }))?);
    }
    sink.json("manifest.json", &manifest)?;
    Ok(())
}

fn row(f: &FitReport) -> DofRow {
    DofRow {
        method: f.method,
        dof: f.dof,
        lambda: f.lambda,
        kappa_reduced: f.kappa_reduced,
        in_sample_risk: f.in_sample_risk().unwrap_or(f64::NAN),
        correlation: f.metric("correlation").unwrap_or(f64::NAN),
        rel_prediction_error: f.metric("rel_prediction_error").unwrap_or(f64::NAN),
    }
}
