//! Anytime CoexDurCG, its adaptively smoothed variant for structured nonsmooth
//! problems, and checkpoint/resume.

use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::schedule::{CoexDurCgSchedule, Schedule};
use super::{
    advance, finish, init_state, record, CgProblem, DualStart, ProblemConstants, SolveOutput,
    SolverState, Trace, TraceRecord,
};
use crate::error::{CoexError, Result};

/// How max-form functions are smoothed across iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurSmoothing {
    /// No smoothing: every function must already be smooth.
    Exact,
    /// Constant levels (objective first).
    Fixed(Vec<f64>),
    /// `η_i^k = ‖C_i‖ D_X / (√k D_{V_i})`; uses the nonsmooth `β`.
    Adaptive,
}

#[derive(Clone, Debug)]
pub struct DurOptions {
    pub start: DualStart,
    pub smoothing: DurSmoothing,
    pub record_trace: bool,
    pub timing: bool,
}

impl Default for DurOptions {
    fn default() -> Self {
        Self {
            start: DualStart::default(),
            smoothing: DurSmoothing::Exact,
            record_trace: true,
            timing: true,
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serializable solver snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<Pt> {
    pub version: u32,
    pub schedule: CoexDurCgSchedule,
    pub smoothing: DurSmoothing,
    pub state: SolverState<Pt>,
    /// The solvers draw no random numbers; kept for format stability.
    pub rng_state: Option<u64>,
}

impl<Pt: Serialize + DeserializeOwned> Checkpoint<Pt> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cp: Self = serde_json::from_str(s)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(CoexError::Invalid(format!(
                "unsupported checkpoint version {}",
                cp.version
            )));
        }
        Ok(cp)
    }
}

/// Stepwise anytime solver.
pub struct CoexDurCg<'a, P: CgProblem> {
    problem: &'a P,
    consts: ProblemConstants,
    schedule: CoexDurCgSchedule,
    smoothing: DurSmoothing,
    state: SolverState<P::Point>,
    trace: Trace,
    started: Instant,
    record_trace: bool,
    timing: bool,
}

impl<'a, P: CgProblem> CoexDurCg<'a, P> {
    pub fn new(problem: &'a P, opts: &DurOptions) -> Result<Self> {
        let consts = problem.constants()?;
        // Without anything to smooth the adaptive variant reduces to the smooth one.
        let schedule = if opts.smoothing == DurSmoothing::Adaptive && consts.needs_smoothing() {
            CoexDurCgSchedule::nonsmooth(consts.diameter, consts.m_bar(), consts.affine_norm)
        } else {
            CoexDurCgSchedule::smooth(consts.diameter, consts.m_bar(), consts.affine_norm)
        };
        if problem.n_affine() + problem.n_constraints() > 0
            && !(schedule.beta > 0.0 && schedule.beta.is_finite())
        {
            return Err(CoexError::Invalid(format!(
                "dual scale beta = {} must be positive",
                schedule.beta
            )));
        }
        let eta1 = eta_at(&consts, &opts.smoothing, problem.n_constraints(), 1);
        let state = init_state(problem, &opts.start, &eta1)?;
        Ok(Self {
            problem,
            consts,
            schedule,
            smoothing: opts.smoothing.clone(),
            state,
            trace: Trace::default(),
            started: Instant::now(),
            record_trace: opts.record_trace,
            timing: opts.timing,
        })
    }

    /// Continue from a checkpoint; `opts.smoothing` and `opts.start` are ignored.
    pub fn resume(problem: &'a P, cp: Checkpoint<P::Point>, opts: &DurOptions) -> Result<Self> {
        if cp.state.q.len() != problem.n_affine() || cp.state.r.len() != problem.n_constraints() {
            return Err(CoexError::Invalid(
                "checkpoint does not match the problem".into(),
            ));
        }
        Ok(Self {
            problem,
            consts: problem.constants()?,
            schedule: cp.schedule,
            smoothing: cp.smoothing,
            state: cp.state,
            trace: Trace::default(),
            started: Instant::now(),
            record_trace: opts.record_trace,
            timing: opts.timing,
        })
    }

    pub fn schedule(&self) -> &CoexDurCgSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &SolverState<P::Point> {
        &self.state
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn iterations(&self) -> usize {
        self.state.k
    }

    /// Smoothing levels used at iteration `k`.
    pub fn eta(&self, k: usize) -> Vec<f64> {
        eta_at(
            &self.consts,
            &self.smoothing,
            self.problem.n_constraints(),
            k,
        )
    }

    /// Perform one iteration; returns its trace record.
    pub fn step(&mut self) -> Result<TraceRecord> {
        let k = self.state.k + 1;
        let eta = self.eta(k);
        advance(
            self.problem,
            &mut self.state,
            self.schedule.params(k),
            &eta,
            true,
        )?;
        let rec = record(self.problem, &self.state, self.started, self.timing)?;
        if self.record_trace {
            self.trace.records.push(rec.clone());
        }
        Ok(rec)
    }

    /// Iterate until `k == n_iters`.
    pub fn run_to(&mut self, n_iters: usize) -> Result<()> {
        while self.state.k < n_iters {
            self.step()?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint<P::Point> {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            schedule: self.schedule,
            smoothing: self.smoothing.clone(),
            state: self.state.clone(),
            rng_state: None,
        }
    }

    pub fn finish(self) -> Result<SolveOutput<P::Point>> {
        finish(self.problem, self.state, self.trace)
    }
}

fn eta_at(consts: &ProblemConstants, s: &DurSmoothing, d: usize, k: usize) -> Vec<f64> {
    match s {
        DurSmoothing::Exact => vec![0.0; d + 1],
        DurSmoothing::Fixed(v) => v.clone(),
        DurSmoothing::Adaptive => consts.adaptive_eta(k),
    }
}

/// Run `n_iters` iterations of CoexDurCG.
pub fn run_coexdurcg<P: CgProblem>(
    problem: &P,
    n_iters: usize,
    opts: &DurOptions,
) -> Result<SolveOutput<P::Point>> {
    let mut s = CoexDurCg::new(problem, opts)?;
    s.run_to(n_iters)?;
    s.finish()
}

/// CoexDurCG with adaptive smoothing of every max-form function.
pub fn run_adaptive_nonsmooth<P: CgProblem>(
    problem: &P,
    n_iters: usize,
    opts: &DurOptions,
) -> Result<SolveOutput<P::Point>> {
    let opts = DurOptions {
        smoothing: DurSmoothing::Adaptive,
        ..opts.clone()
    };
    run_coexdurcg(problem, n_iters, &opts)
}
