use krylov_pls::irpls::irpls_fit;
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io::{read_dataset, Sink};
use crate::manifest::RunManifest;
use crate::IrplsArgs;

#[derive(Debug, Serialize)]
struct IterationRow {
    iteration: usize,
    deviance_drop: f64,
    coef_norm: f64,
    kappa_reduced: f64,
}

pub fn irpls(args: IrplsArgs) -> CliResult<()> {
    if args.dof == 0 {
        return Err(CliError::Usage("--dof must be at least 1".into()));
    }
    let data = read_dataset(&args.data)?;
    let trace = irpls_fit(&data.x, &data.y, args.family, args.dof, args.max_iter, args.eps)?;
    for w in &trace.warnings {
        log::warn!("{w}");
    }
    let rows: Vec<IterationRow> = (0..trace.iterations())
        .map(|j| IterationRow {
            iteration: j + 1,
            deviance_drop: trace.deviance_drops[j],
            coef_norm: trace.iterates[j + 1].norm(),
            kappa_reduced: trace.kappa_reduced.get(j).copied().unwrap_or(f64::NAN),
        })
        .collect();

    let sink = Sink::new(args.out.clone())?;
    let mut manifest = RunManifest::new(
        "irpls",
        json!({
            "family": args.family,
            "dof": args.dof,
            "max_iter": args.max_iter,
            "eps": args.eps,
            "features": data.features,
        }),
        None,
    );
    manifest.inputs.push(args.data.display().to_string());
    manifest.output(sink.table("trace.csv", &rows)?);
    manifest.output(sink.json("trace.json", &trace)?);
    sink.json("manifest.json", &manifest)?;
    Ok(())
}
