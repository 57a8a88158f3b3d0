use std::fs::File;
use std::io::BufWriter;

use krylov_pls::simulation::{run_experiment, SimulationConfig, Simulator};
use serde_json::json;

use super::to_value;
use crate::error::{CliError, CliResult};
use crate::io::{write_dataset, Sink};
use crate::manifest::RunManifest;
use crate::SimulateArgs;

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    if args.p < args.d {
        return Err(CliError::Usage(format!("--d {} exceeds --p {}", args.d, args.p)));
    }
    if args.methods.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    let cfg = SimulationConfig {
        n: args.n,
        p: args.p,
        d: args.d,
        m: args.m,
        sigma0: args.sigma0,
        sigma_yperp_max: args.sigma_yperp,
        rank_yperp: args.rank_yperp.unwrap_or(args.p - args.d),
        sparse: args.sparse,
        seed: args.seed,
        reps: args.reps,
    };
    cfg.validate()?;
    let sink = Sink::new(args.out.clone())?;
    let result = run_experiment(&cfg, &args.methods, args.dof)?;
    for f in &result.failures {
        log::warn!("repetition {} ({}): {}", f.rep, f.method, f.error);
    }

    let mut manifest = RunManifest::new(
        "simulate",
        json!({ "simulation": to_value(&cfg)?, "methods": args.methods, "dof": args.dof.unwrap_or(cfg.m), "snr": cfg.snr() }),
        Some(cfg.seed),
    );
    manifest.output(sink.table("reps.csv", &result.rows)?);
    manifest.output(sink.json("summary.json", &json!({ "summary": result.summary, "failures": result.failures }))?);
    if let (true, Some(dir)) = (args.dump_data, &args.out) {
        let simulator = Simulator::new(cfg.clone())?;
        for rep in 0..cfg.reps {
            let model = simulator.generate(rep);
            let name = format!("data_rep{rep}.csv");
            let path = dir.join(&name);
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            write_dataset(BufWriter::new(file), &model.x, &model.y)?;
            manifest.output(Some(name));
        }
    }
    sink.json("manifest.json", &manifest)?;
    Ok(())
}
