//! `coex` command-line front end: instance generation, solving and rate fits.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration, 3 solver abort,
//! 4 problem refused by the dimension cap.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::Parser;
use coex::conex::{run_conex, ConexOptions};
use coex::error::CoexError;
use coex::imrt::plan::{default_dose_grid, ANGLE_FLOOR};
use coex::imrt::{
    explicit_problem, export_plan, generate, write_dvh_csv, ImrtInstance, ImrtProblem, PlanPoint,
};
use coex::problem::{ConstantOverrides, DensePoint, ProblemSpec};
use coex::ratefit::{fit_loglog, RateFit};
use coex::solver::{
    run_adaptive_nonsmooth, run_classic_fw, run_coexcg, run_coexdurcg, CgProblem, CoexCgOptions,
    DurOptions, SolveOutput, Trace,
};
use serde::Serialize;

use config::{
    Cli, Command, Emit, GenerateArgs, RatefitArgs, SolveArgs, SolveConfig, SolverKind, Source,
};

/// An error paired with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

trait ExitCodeExt<T> {
    fn code(self, code: u8) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> ExitCodeExt<T> for Result<T, E> {
    fn code(self, code: u8) -> Outcome<T> {
        self.map_err(|e| Failure {
            code,
            err: e.into(),
        })
    }
}

const IO_FAILURE: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const SOLVER_ABORT: u8 = 3;
const REFUSED: u8 = 4;

/// Refusals keep their own code everywhere; other errors take `code`.
fn classify<T>(r: coex::error::Result<T>, code: u8) -> Outcome<T> {
    r.map_err(|e| Failure {
        code: if matches!(e, CoexError::Refused { .. }) {
            REFUSED
        } else {
            code
        },
        err: e.into(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Ratefit(a) => cmd_ratefit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct GenerateReport {
    out_dir: String,
    seed: u64,
    voxels: usize,
    angles: usize,
    apertures_per_angle: String,
    apertures: String,
    dose_nonzeros: usize,
    dose_rate: f64,
}

fn cmd_generate(args: &GenerateArgs) -> Outcome<()> {
    let (cfg, out) = config::resolve_generate(args).code(CONFIG_ERROR)?;
    let inst = classify(generate(&cfg), CONFIG_ERROR)?;
    inst.save(&out)
        .with_context(|| format!("writing instance to {}", out.display()))
        .code(IO_FAILURE)?;
    let g = &inst.spec.geometry;
    let report = GenerateReport {
        out_dir: out.display().to_string(),
        seed: cfg.seed,
        voxels: g.voxel_count(),
        angles: g.angles_deg.len(),
        apertures_per_angle: g.apertures_per_angle().to_string(),
        apertures: g.aperture_count().to_string(),
        dose_nonzeros: inst.dose.nnz(),
        dose_rate: g.dose_rate,
    };
    print_json(&report)
}

#[derive(Serialize)]
struct Summary {
    solver: SolverKind,
    iterations: usize,
    objective: f64,
    infeasibility: f64,
    constraints: Vec<f64>,
    affine_residual: Vec<f64>,
    wall_seconds: f64,
    /// Vertices carrying weight in the final point.
    atoms: usize,
    /// Beam angles with intensity above the selection floor (plans only).
    angles: Option<usize>,
    total_intensity: Option<f64>,
}

fn cmd_solve(args: &SolveArgs) -> Outcome<()> {
    let cfg = config::resolve_solve(args).code(CONFIG_ERROR)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))
        .code(IO_FAILURE)?;
    match &cfg.source {
        Source::Problem(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .code(CONFIG_ERROR)?;
            let mut spec = classify(ProblemSpec::from_json(&text), CONFIG_ERROR)?;
            apply_overrides(&mut spec.overrides, &cfg, spec.constraints.len())?;
            solve_dense(&spec, &cfg)
        }
        Source::Instance(dir) => {
            let mut inst =
                classify(ImrtInstance::load(dir), CONFIG_ERROR).map_err(|f| Failure {
                    err: f
                        .err
                        .context(format!("loading instance from {}", dir.display())),
                    ..f
                })?;
            if let Some(phi) = cfg.phi {
                inst.spec.phi = phi.budget();
                classify(inst.spec.validate(), CONFIG_ERROR)?;
            }
            solve_plan(inst, &cfg)
        }
        Source::Generate(g) => solve_plan(classify(generate(g), CONFIG_ERROR)?, &cfg),
    }
}

fn apply_overrides(o: &mut ConstantOverrides, cfg: &SolveConfig, n_c: usize) -> Outcome<()> {
    for (k, v) in &cfg.overrides {
        classify(o.set(k, *v, n_c), CONFIG_ERROR)?;
    }
    Ok(())
}

fn run_cg<P: CgProblem>(p: &P, cfg: &SolveConfig) -> Outcome<SolveOutput<P::Point>> {
    let cg = CoexCgOptions {
        timing: cfg.timing,
        ..Default::default()
    };
    let dur = DurOptions {
        timing: cfg.timing,
        ..Default::default()
    };
    let needs_smoothing = classify(p.constants(), CONFIG_ERROR)?.needs_smoothing();
    let out = match cfg.solver {
        SolverKind::Coexcg => run_coexcg(p, cfg.iters, &cg),
        SolverKind::ClassicFw => run_classic_fw(p, cfg.iters, &cg),
        // Nonsmooth problems need the smoothed anytime variant.
        SolverKind::Coexdurcg if !needs_smoothing => run_coexdurcg(p, cfg.iters, &dur),
        SolverKind::Coexdurcg | SolverKind::Adaptive => run_adaptive_nonsmooth(p, cfg.iters, &dur),
        SolverKind::Conex => unreachable!("handled by the dense path"),
    };
    classify(out, SOLVER_ABORT)
}

fn conex_options(cfg: &SolveConfig) -> ConexOptions {
    ConexOptions {
        dim_cap: cfg.dim_cap,
        timing: cfg.timing,
        ..Default::default()
    }
}

fn solve_dense(spec: &ProblemSpec, cfg: &SolveConfig) -> Outcome<()> {
    let started = Instant::now();
    let out = if cfg.solver == SolverKind::Conex {
        classify(
            run_conex(spec, cfg.iters, &conex_options(cfg)),
            SOLVER_ABORT,
        )?
    } else {
        run_cg(spec, cfg)?
    };
    let wall = started.elapsed().as_secs_f64();
    if cfg.emit.contains(&Emit::Dvh) {
        log::info!("dose-volume output applies to planning instances only; skipped");
    }
    if cfg.emit.contains(&Emit::Plan) {
        write_json(&cfg.out_dir.join("solution.json"), &out.x)?;
    }
    let summary = Summary {
        solver: cfg.solver,
        iterations: out.iterations,
        objective: out.report.objective,
        infeasibility: out.report.infeasibility,
        constraints: out.report.constraints.clone(),
        affine_residual: out.report.affine_residual.clone(),
        wall_seconds: seconds(wall, cfg),
        atoms: dense_atoms(&out.x),
        angles: None,
        total_intensity: None,
    };
    finish(&out.trace, &summary, cfg)
}

fn dense_atoms(x: &DensePoint) -> usize {
    if x.atoms.is_empty() {
        x.x.iter().filter(|v| **v != 0.0).count()
    } else {
        x.atoms.len()
    }
}

fn solve_plan(inst: ImrtInstance, cfg: &SolveConfig) -> Outcome<()> {
    let mut p = classify(ImrtProblem::new(inst), CONFIG_ERROR)?;
    let n_c = p.n_constraints();
    apply_overrides(&mut p.overrides, cfg, n_c)?;
    let started = Instant::now();
    let (x, report, trace, iterations) = if cfg.solver == SolverKind::Conex {
        let dense = classify(explicit_problem(&p, cfg.dim_cap), CONFIG_ERROR)?;
        let out = classify(
            run_conex(&dense.spec, cfg.iters, &conex_options(cfg)),
            SOLVER_ABORT,
        )?;
        let x = dense.plan_point(&p, &out.x.x);
        (x, out.report, out.trace, out.iterations)
    } else {
        let out = run_cg(&p, cfg)?;
        (out.x, out.report, out.trace, out.iterations)
    };
    let wall = started.elapsed().as_secs_f64();
    if cfg.emit.contains(&Emit::Plan) {
        write_json(&cfg.out_dir.join("plan.json"), &export_plan(&p, &x))?;
    }
    if cfg.emit.contains(&Emit::Dvh) {
        write_dvh(&p, &x, &cfg.out_dir.join("dvh.csv"))?;
    }
    let summary = Summary {
        solver: cfg.solver,
        iterations,
        objective: report.objective,
        infeasibility: report.infeasibility,
        constraints: report.constraints.clone(),
        affine_residual: report.affine_residual.clone(),
        wall_seconds: seconds(wall, cfg),
        atoms: x.atoms.len(),
        angles: Some(x.selected_angles(ANGLE_FLOOR)),
        total_intensity: Some(x.total_intensity()),
    };
    finish(&trace, &summary, cfg)
}

fn seconds(wall: f64, cfg: &SolveConfig) -> f64 {
    if cfg.timing {
        wall
    } else {
        0.0
    }
}

fn write_dvh(p: &ImrtProblem, x: &PlanPoint, path: &Path) -> Outcome<()> {
    let f = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .code(IO_FAILURE)?;
    classify(
        write_dvh_csv(p, x, &default_dose_grid(), BufWriter::new(f)),
        IO_FAILURE,
    )
}

fn finish(trace: &Trace, summary: &Summary, cfg: &SolveConfig) -> Outcome<()> {
    if cfg.emit.contains(&Emit::Trace) {
        let path = cfg.out_dir.join("trace.csv");
        let f = File::create(&path)
            .with_context(|| format!("creating {}", path.display()))
            .code(IO_FAILURE)?;
        classify(trace.write_csv(BufWriter::new(f)), IO_FAILURE)?;
    }
    if cfg.emit.contains(&Emit::Summary) {
        write_json(&cfg.out_dir.join("summary.json"), summary)?;
    }
    print_json(summary)
}

#[derive(Serialize)]
struct RateReport {
    points: Vec<RatePoint>,
    infeasibility: Option<RateFit>,
    objective_gap: Option<RateFit>,
}

#[derive(Serialize)]
struct RatePoint {
    n: usize,
    objective: f64,
    infeasibility: f64,
}

fn cmd_ratefit(args: &RatefitArgs) -> Outcome<()> {
    let mut traces = Vec::new();
    for path in &args.traces {
        let f = File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .code(CONFIG_ERROR)?;
        traces.push(classify(Trace::read_csv(f), CONFIG_ERROR)?);
    }
    let points: Vec<RatePoint> = if let [single] = traces.as_slice() {
        single
            .records
            .iter()
            .filter(|r| r.k.is_power_of_two())
            .map(|r| RatePoint {
                n: r.k,
                objective: r.objective,
                infeasibility: r.infeasibility,
            })
            .collect()
    } else {
        traces
            .iter()
            .filter_map(Trace::last)
            .map(|r| RatePoint {
                n: r.k,
                objective: r.objective,
                infeasibility: r.infeasibility,
            })
            .collect()
    };
    if points.len() < 3 {
        return Err(Failure {
            code: CONFIG_ERROR,
            err: anyhow!("a rate fit needs at least 3 points, got {}", points.len()),
        });
    }
    let fit = |metric: &dyn Fn(&RatePoint) -> f64| {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, metric(p))).collect();
        match fit_loglog(&pts) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("{e}");
                None
            }
        }
    };
    let report = RateReport {
        infeasibility: fit(&|p| p.infeasibility),
        objective_gap: args.f_star.and_then(|fs| fit(&|p| p.objective - fs)),
        points,
    };
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    print_json(&report)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).code(IO_FAILURE)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .code(IO_FAILURE)
}

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    println!("{}", serde_json::to_string_pretty(value).code(IO_FAILURE)?);
    Ok(())
}
