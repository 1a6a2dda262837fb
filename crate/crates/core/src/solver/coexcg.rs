//! Fixed-horizon CoexCG and the unconstrained Frank-Wolfe reference.

use std::time::Instant;

use super::schedule::{alpha, lambda, CoexCgSchedule, Schedule, StepParams};
use super::{advance, finish, init_state, record, CgProblem, DualStart, SolveOutput, Trace};
use crate::error::{CoexError, Result};

#[derive(Clone, Debug)]
pub struct CoexCgOptions {
    pub start: DualStart,
    /// Smoothing levels (objective first); defaults to the fixed-horizon rule.
    pub eta: Option<Vec<f64>>,
    pub record_trace: bool,
    /// Record wall-clock milliseconds in the trace (zero otherwise).
    pub timing: bool,
}

impl Default for CoexCgOptions {
    fn default() -> Self {
        Self {
            start: DualStart::default(),
            eta: None,
            record_trace: true,
            timing: true,
        }
    }
}

fn check_horizon(n_iters: usize) -> Result<()> {
    if n_iters == 0 {
        return Err(CoexError::Invalid(
            "iteration count must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Run `n_iters` iterations of CoexCG with the fixed-horizon schedule.
pub fn run_coexcg<P: CgProblem>(
    problem: &P,
    n_iters: usize,
    opts: &CoexCgOptions,
) -> Result<SolveOutput<P::Point>> {
    check_horizon(n_iters)?;
    let consts = problem.constants()?;
    let eta = opts
        .eta
        .clone()
        .unwrap_or_else(|| consts.fixed_eta(n_iters));
    let schedule =
        CoexCgSchedule::new(n_iters, consts.diameter, consts.m_bar(), consts.affine_norm);
    let has_duals = problem.n_affine() + problem.n_constraints() > 0;
    if has_duals && !(schedule.scale > 0.0 && schedule.scale.is_finite()) {
        return Err(CoexError::Invalid(format!(
            "dual step scale D_X·sqrt(9M² + ‖A‖²) = {} must be positive",
            schedule.scale
        )));
    }
    let started = Instant::now();
    let mut state = init_state(problem, &opts.start, &eta)?;
    let mut trace = Trace::default();
    for k in 1..=n_iters {
        advance(problem, &mut state, schedule.params(k), &eta, true)?;
        if opts.record_trace {
            trace
                .records
                .push(record(problem, &state, started, opts.timing)?);
        }
    }
    finish(problem, state, trace)
}

/// Classical Frank-Wolfe on the objective alone (constraints ignored).
pub fn run_classic_fw<P: CgProblem>(
    problem: &P,
    n_iters: usize,
    opts: &CoexCgOptions,
) -> Result<SolveOutput<P::Point>> {
    check_horizon(n_iters)?;
    let consts = problem.constants()?;
    let eta = opts
        .eta
        .clone()
        .unwrap_or_else(|| consts.fixed_eta(n_iters));
    let started = Instant::now();
    let mut state = init_state(problem, &DualStart::default(), &eta)?;
    let mut trace = Trace::default();
    for k in 1..=n_iters {
        let params = StepParams {
            alpha: alpha(k),
            lambda: lambda(k),
            tau: 1.0,
            gamma: 0.0,
        };
        advance(problem, &mut state, params, &eta, false)?;
        if opts.record_trace {
            trace
                .records
                .push(record(problem, &state, started, opts.timing)?);
        }
    }
    finish(problem, state, trace)
}
