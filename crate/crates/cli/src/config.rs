//! Command-line flags, the JSON run configuration and their merge.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coex::imrt::{GeneratorConfig, LeafModel};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "coex",
    version,
    about = "Projection-free constrained solvers and IMRT planning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic planning instance.
    Generate(GenerateArgs),
    /// Solve a planning instance or a dense problem file.
    Solve(SolveArgs),
    /// Fit power-law rates to solver traces.
    Ratefit(RatefitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Coexcg,
    Coexdurcg,
    Adaptive,
    Conex,
    ClassicFw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Trace,
    Dvh,
    Plan,
    Summary,
}

/// Sparsity budget: a positive number, or `off` to drop the constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Phi {
    Budget(f64),
    Off(PhiOff),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiOff {
    Off,
}

impl Phi {
    pub fn budget(self) -> Option<f64> {
        match self {
            Phi::Budget(b) => Some(b),
            Phi::Off(_) => None,
        }
    }
}

fn parse_phi(s: &str) -> std::result::Result<Phi, String> {
    if s.eq_ignore_ascii_case("off") || s.eq_ignore_ascii_case("none") {
        return Ok(Phi::Off(PhiOff::Off));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number or 'off', got '{s}'"))?;
    Ok(Phi::Budget(v))
}

fn parse_override(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VAL, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("bad value in '{s}'"))?;
    Ok((k.trim().to_string(), v))
}

/// Generator settings shared by `generate` and `solve`.
#[derive(Args, Debug, Default)]
pub struct GenFlags {
    /// Seed for the synthetic phantom.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-angle sparsity budget, or `off`.
    #[arg(long, value_parser = parse_phi)]
    pub phi: Option<Phi>,
    /// Beamlet rows per angle.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Beamlet columns per angle.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Evenly spaced beam angles.
    #[arg(long)]
    pub angles: Option<usize>,
    /// Half the edge of the cubic phantom.
    #[arg(long)]
    pub half_length: Option<f64>,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    /// `interior` keeps the outermost columns closed; `full` lets any run open.
    #[arg(long, value_enum)]
    pub leaf_model: Option<LeafArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LeafArg {
    Interior,
    Full,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the instance (default `instance`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenFlags,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding a saved planning instance.
    #[arg(long, conflicts_with = "problem")]
    pub instance: Option<PathBuf>,
    /// Dense problem description in JSON.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Default `coexcg`.
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Iteration count (default 1000).
    #[arg(long)]
    pub iters: Option<usize>,
    /// Output directory (default `.`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Replace a theory constant, e.g. `grad_bound.0=2.5` or `diameter=1.4`.
    #[arg(long = "override-const", value_parser = parse_override)]
    pub override_const: Vec<(String, f64)>,
    /// Comma-separated outputs to write (default all).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub emit: Vec<Emit>,
    /// Largest variable count the projection-based method will accept.
    #[arg(long)]
    pub dim_cap: Option<usize>,
    /// Write zero times so that outputs are identical across runs.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub gen: GenFlags,
}

#[derive(Args, Debug)]
pub struct RatefitArgs {
    /// Trace CSV files. With one file, records at k = 1, 2, 4, ... are used;
    /// with several, the last record of each.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Optimal value; enables the objective-gap fit.
    #[arg(long)]
    pub f_star: Option<f64>,
    /// Write the fit as JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// JSON form of the run configuration. Every field mirrors a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub phi: Option<Phi>,
    pub solver: Option<SolverKind>,
    pub iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub override_const: BTreeMap<String, f64>,
    pub emit: Option<Vec<Emit>>,
    pub instance: Option<PathBuf>,
    pub problem: Option<PathBuf>,
    pub dim_cap: Option<usize>,
    pub no_timing: Option<bool>,
    /// Generator settings; `seed` and `phi` above take precedence.
    pub generator: Option<GeneratorConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub enum Source {
    Instance(PathBuf),
    Problem(PathBuf),
    Generate(GeneratorConfig),
}

/// Fully resolved `solve` settings.
pub struct SolveConfig {
    pub source: Source,
    /// Budget override for loaded instances.
    pub phi: Option<Phi>,
    pub solver: SolverKind,
    pub iters: usize,
    pub out_dir: PathBuf,
    pub overrides: BTreeMap<String, f64>,
    pub emit: Vec<Emit>,
    pub dim_cap: usize,
    pub timing: bool,
}

fn merged_generator(file: &FileConfig, flags: &GenFlags) -> GeneratorConfig {
    let mut g = file.generator.clone().unwrap_or_default();
    if let Some(s) = flags.seed.or(file.seed) {
        g.seed = s;
    }
    if let Some(p) = flags.phi.or(file.phi) {
        g.phi = p.budget();
    }
    if let Some(v) = flags.rows {
        g.rows = v;
    }
    if let Some(v) = flags.cols {
        g.cols = v;
    }
    if let Some(v) = flags.angles {
        g.angles = v;
    }
    if let Some(v) = flags.half_length {
        g.half_length = v;
    }
    if let Some(v) = flags.voxel_size {
        g.voxel_size = v;
    }
    if let Some(m) = flags.leaf_model {
        g.leaf_model = match m {
            LeafArg::Interior => LeafModel::Interior,
            LeafArg::Full => LeafModel::Full,
        };
    }
    g
}

pub fn resolve_generate(args: &GenerateArgs) -> Result<(GeneratorConfig, PathBuf)> {
    let file = FileConfig::load(args.config.as_ref())?;
    let out = args
        .out_dir
        .clone()
        .or(file.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("instance"));
    Ok((merged_generator(&file, &args.gen), out))
}

pub fn resolve_solve(args: &SolveArgs) -> Result<SolveConfig> {
    let file = FileConfig::load(args.config.as_ref())?;
    let instance = args.instance.clone().or(file.instance.clone());
    let problem = args.problem.clone().or(file.problem.clone());
    let phi = args.gen.phi.or(file.phi);
    let source = match (instance, problem) {
        (Some(_), Some(_)) => {
            bail!("give either an instance directory or a problem file, not both")
        }
        (Some(dir), None) => Source::Instance(dir),
        (None, Some(path)) => {
            if phi.is_some() {
                bail!("the sparsity budget applies to planning instances only");
            }
            Source::Problem(path)
        }
        (None, None) => Source::Generate(merged_generator(&file, &args.gen)),
    };
    let iters = args.iters.or(file.iters).unwrap_or(1000);
    if iters == 0 {
        bail!("the iteration count must be at least 1");
    }
    let mut overrides = file.override_const.clone();
    overrides.extend(args.override_const.iter().cloned());
    let mut emit = if args.emit.is_empty() {
        file.emit
            .clone()
            .unwrap_or_else(|| vec![Emit::Trace, Emit::Dvh, Emit::Plan, Emit::Summary])
    } else {
        args.emit.clone()
    };
    emit.sort();
    emit.dedup();
    Ok(SolveConfig {
        source,
        phi,
        solver: args.solver.or(file.solver).unwrap_or(SolverKind::Coexcg),
        iters,
        out_dir: args
            .out_dir
            .clone()
            .or(file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        overrides,
        emit,
        dim_cap: args
            .dim_cap
            .or(file.dim_cap)
            .unwrap_or(coex::conex::DEFAULT_DIM_CAP),
        timing: !(args.no_timing || file.no_timing.unwrap_or(false)),
    })
}
