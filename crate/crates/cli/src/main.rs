//! `kpls`: simulation, fitting, perturbation audits and IRPLS from the
//! command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use krylov_pls::estimators::Method;
use krylov_pls::irpls::GlmFamily;

use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "kpls", version, about = "Krylov-subspace PLS toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo comparison of estimators on the latent-factor model.
    Simulate(SimulateArgs),
    /// Fit estimators over a range of dofs on a train/test split.
    Fit(FitArgs),
    /// Audit a perturbation bound on a covariance problem.
    Perturb(PerturbArgs),
    /// Iteratively reweighted PLS for a GLM.
    Irpls(IrplsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 25)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma0: f64,
    /// Largest standard deviation of the irrelevant block.
    #[arg(long = "sigma-yperp", default_value_t = 0.1)]
    pub sigma_yperp: f64,
    /// Rank of the irrelevant block; defaults to p - d.
    #[arg(long = "rank-yperp")]
    pub rank_yperp: Option<usize>,
    #[arg(long)]
    pub sparse: bool,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "pls,pcr,lasso")]
    pub methods: Vec<Method>,
    /// Degrees of freedom for every method; defaults to m.
    #[arg(long)]
    pub dof: Option<usize>,
    /// Output directory; the per-repetition CSV goes to stdout without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write every generated dataset as `data_rep<k>.csv` (needs --out).
    #[arg(long, requires = "out")]
    pub dump_data: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "pls")]
    pub method: Vec<Method>,
    /// Inclusive range `a..b`, or a single dof.
    #[arg(long = "dof-range", default_value = "1..15", value_parser = parse_dof_range)]
    pub dof_range: (usize, usize),
    /// Select by reduced condition number below this threshold.
    #[arg(long)]
    pub kappa0: Option<f64>,
    /// Center features and response with the training means.
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TheoremArg {
    Ls,
    Pls,
    Krylov,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("problem").required(true).args(["matrix", "synthetic"])))]
pub struct PerturbArgs {
    /// Square matrix as CSV with a header; an optional column `b` is the seed vector.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Built-in problem, e.g. `diag:4,2,1`.
    #[arg(long)]
    pub synthetic: Option<String>,
    #[arg(long, value_enum)]
    pub theorem: TheoremArg,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Krylov dimension for the pls and krylov audits; defaults to the full Krylov dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Draws per level for the κ_b estimate.
    #[arg(long = "kappa-trials", default_value_t = 200)]
    pub kappa_trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IrplsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_family)]
    pub family: GlmFamily,
    #[arg(long)]
    pub dof: usize,
    #[arg(long = "max-iter", default_value_t = krylov_pls::irpls::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = krylov_pls::irpls::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_dof_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a dof"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if lo == 0 || hi < lo {
        return Err(format!("dof range '{s}' must satisfy 1 <= a <= b"));
    }
    Ok((lo, hi))
}

fn parse_family(s: &str) -> Result<GlmFamily, String> {
    s.parse::<GlmFamily>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let outcome: Result<(), CliError> = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Perturb(args) => commands::perturb(args),
        Command::Irpls(args) => commands::irpls(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_range_forms() {
        assert_eq!(parse_dof_range("1..15"), Ok((1, 15)));
        assert_eq!(parse_dof_range("2..=4"), Ok((2, 4)));
        assert_eq!(parse_dof_range("7"), Ok((7, 7)));
        assert!(parse_dof_range("0..3").is_err());
        assert!(parse_dof_range("5..2").is_err());
        assert!(parse_dof_range("a..2").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
