//! Run configuration: a flat TOML document merged with command-line flags.
//!
//! Precedence is flag, then file, then built-in default. The fully resolved
//! [`RunConfig`] serializes back to TOML that can be fed to `--config`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dshrink::hyper::UreOptions;
use dshrink::Method;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dshrink", version, about = "Double-shrinkage estimates, robust intervals and simulations")]
pub struct Cli {
    /// Flat TOML file with default values for any of the options below.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the fully resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    pub config_dump: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Estimate,
    Simulate,
    Coverage,
    Bootstrap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates and intervals from a stratum-summary CSV.
    Estimate(Opts),
    /// Monte-Carlo risk of each method under the hierarchical model.
    Simulate(Opts),
    /// Monte-Carlo coverage and length of the interval procedures.
    Coverage(Opts),
    /// Bootstrap evaluation from a unit-level CSV.
    Bootstrap(Opts),
}

impl Command {
    pub fn split(self) -> (CommandKind, Opts) {
        match self {
            Command::Estimate(o) => (CommandKind::Estimate, o),
            Command::Simulate(o) => (CommandKind::Simulate, o),
            Command::Coverage(o) => (CommandKind::Coverage, o),
            Command::Bootstrap(o) => (CommandKind::Bootstrap, o),
        }
    }
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected 'low,high', got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    Ok([p(lo)?, p(hi)?])
}

#[derive(Debug, Default, Args)]
pub struct Opts {
    /// Input CSV (stratum summaries for `estimate`, unit records for `bootstrap`).
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Output CSV; a JSON sidecar is written next to it. Defaults to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Estimator to run; repeat for several.
    #[arg(long = "method", value_name = "NAME")]
    pub methods: Vec<Method>,
    /// Interval level (non-coverage probability).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Master seed for the random number streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Interval truncation: eta2 is raised to at least this fraction of median var_u.
    #[arg(long)]
    pub floor_frac: Option<f64>,
    /// Monte-Carlo replications.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Number of strata; repeat for one table row per value.
    #[arg(long = "K", value_name = "K")]
    pub k: Vec<usize>,
    /// Prior effect variance (also the `fixed` method's eta2).
    #[arg(long)]
    pub eta2: Option<f64>,
    /// Prior bias variance (also the `fixed` method's gamma2).
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Range for the unbiased-estimate variances, drawn log-uniformly.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range)]
    pub var_u: Option<[f64; 2]>,
    /// Range for the biased-estimate variances, drawn log-uniformly.
    #[arg(long, value_name = "LO,HI", value_parser = parse_range)]
    pub var_b: Option<[f64; 2]>,
    /// Hold the latent effects fixed across replications.
    #[arg(long)]
    pub fixed_latents: bool,
    /// Write the first simulated data set as a stratum-summary CSV.
    #[arg(long, value_name = "FILE")]
    pub emit_data: Option<PathBuf>,
    /// Bootstrap replications.
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// RCT units kept per bootstrap replicate (without replacement).
    #[arg(long)]
    pub rct_subsample: Option<usize>,
    /// Floor applied to zero-variance cells when aggregating unit records.
    #[arg(long)]
    pub variance_floor: Option<f64>,
    /// URE search: stop when the simplex diameter falls below this.
    #[arg(long)]
    pub simplex_tol: Option<f64>,
    /// URE search: simplex iterations per start.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// URE search: restarts from each local optimum.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Likelihood fit: tolerance on the score.
    #[arg(long)]
    pub mle_tol: Option<f64>,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    /// Accepted so that a dumped configuration reloads; the subcommand wins.
    #[allow(dead_code)]
    command: Option<CommandKind>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    methods: Option<Vec<Method>>,
    alpha: Option<f64>,
    seed: Option<u64>,
    floor_frac: Option<f64>,
    reps: Option<usize>,
    #[serde(rename = "K")]
    k: Option<Vec<usize>>,
    eta2: Option<f64>,
    gamma2: Option<f64>,
    var_u: Option<[f64; 2]>,
    var_b: Option<[f64; 2]>,
    redraw_latents: Option<bool>,
    emit_data: Option<PathBuf>,
    n_boot: Option<usize>,
    rct_subsample: Option<usize>,
    variance_floor: Option<f64>,
    simplex_tol: Option<f64>,
    max_iter: Option<usize>,
    restarts: Option<usize>,
    mle_tol: Option<f64>,
    mle_max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub methods: Vec<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub seed: u64,
    pub floor_frac: f64,
    pub reps: usize,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    pub eta2: f64,
    pub gamma2: f64,
    pub var_u: [f64; 2],
    pub var_b: [f64; 2],
    pub redraw_latents: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit_data: Option<PathBuf>,
    pub n_boot: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rct_subsample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_floor: Option<f64>,
    pub simplex_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub mle_tol: f64,
    pub mle_max_iter: usize,
}

fn default_methods(command: CommandKind) -> Vec<Method> {
    match command {
        CommandKind::Coverage => vec![Method::RawU, Method::Mm1, Method::Mm2, Method::Mle, Method::Ure],
        _ => Method::ALL.iter().copied().filter(|m| *m != Method::Fixed).collect(),
    }
}

fn default_alpha(command: CommandKind) -> Option<f64> {
    match command {
        CommandKind::Simulate => None,
        _ => Some(0.05),
    }
}

fn read_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(command: CommandKind, opts: Opts, file: Option<&Path>) -> CliResult<Self> {
        let f = file.map(read_file).transpose()?.unwrap_or_default();
        let ure = UreOptions::default();
        let non_empty = |v: Vec<Method>| (!v.is_empty()).then_some(v);
        let non_empty_k = |v: Vec<usize>| (!v.is_empty()).then_some(v);
        Ok(Self {
            command,
            input: opts.input.or(f.input),
            out: opts.out.or(f.out),
            methods: non_empty(opts.methods).or(f.methods).unwrap_or_else(|| default_methods(command)),
            alpha: opts.alpha.or(f.alpha).or_else(|| default_alpha(command)),
            seed: opts.seed.or(f.seed).unwrap_or(0),
            floor_frac: opts.floor_frac.or(f.floor_frac).unwrap_or(dshrink::inference::DEFAULT_FLOOR_FRAC),
            reps: opts.reps.or(f.reps).unwrap_or(1000),
            k: non_empty_k(opts.k).or(f.k).unwrap_or_else(|| vec![10]),
            eta2: opts.eta2.or(f.eta2).unwrap_or(1.0),
            gamma2: opts.gamma2.or(f.gamma2).unwrap_or(1.0),
            var_u: opts.var_u.or(f.var_u).unwrap_or([0.5, 5.0]),
            var_b: opts.var_b.or(f.var_b).unwrap_or([0.05, 0.5]),
            redraw_latents: if opts.fixed_latents { false } else { f.redraw_latents.unwrap_or(true) },
            emit_data: opts.emit_data.or(f.emit_data),
            n_boot: opts.n_boot.or(f.n_boot).unwrap_or(1000),
            rct_subsample: opts.rct_subsample.or(f.rct_subsample),
            variance_floor: opts.variance_floor.or(f.variance_floor),
            simplex_tol: opts.simplex_tol.or(f.simplex_tol).unwrap_or(ure.simplex_tol),
            max_iter: opts.max_iter.or(f.max_iter).unwrap_or(ure.max_iter),
            restarts: opts.restarts.or(f.restarts).unwrap_or(ure.restarts),
            mle_tol: opts.mle_tol.or(f.mle_tol).unwrap_or(ure.mle_tol),
            mle_max_iter: f.mle_max_iter.unwrap_or(ure.mle_max_iter),
        })
    }

    pub fn ure_options(&self) -> UreOptions {
        UreOptions {
            simplex_tol: self.simplex_tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            mle_tol: self.mle_tol,
            mle_max_iter: self.mle_max_iter,
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Input("an input file is required (--input)".into()))
    }
}
