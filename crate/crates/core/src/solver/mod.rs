//! Primal-dual conditional gradient solvers.
//!
//! All solvers share one iteration: extrapolate the affine residuals and the
//! constraint linearizations, take a proximal dual step, call the linear
//! minimization oracle on the Lagrangian linearization, and average.
//! They differ only in the step-size schedule and the smoothing levels.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CoexError, Result};
use crate::linalg;
use crate::smoothing::SmoothingInfo;

pub mod certificate;
pub mod coexcg;
pub mod coexdurcg;
pub mod schedule;
pub mod trace;

pub use coexcg::{run_classic_fw, run_coexcg, CoexCgOptions};
pub use coexdurcg::{run_adaptive_nonsmooth, run_coexdurcg, Checkpoint, CoexDurCg, DurOptions};
pub use schedule::{CoexCgSchedule, CoexDurCgSchedule, Schedule, StepParams};
pub use trace::{Trace, TraceRecord};

/// Constants the schedules depend on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// `D_X`
    pub diameter: f64,
    /// `‖A‖`
    pub affine_norm: f64,
    /// Per-constraint gradient bounds (`M_{h_i}` or the max-form bound).
    pub grad_bounds: Vec<f64>,
    /// Smoothing data for the objective (index 0) and each constraint.
    pub smoothing: Vec<Option<SmoothingInfo>>,
}

impl ProblemConstants {
    /// `M̄ = ‖(M_1, …, M_d)‖₂`
    pub fn m_bar(&self) -> f64 {
        linalg::norm(&self.grad_bounds)
    }

    /// True if some function is nonsmooth and will be smoothed.
    pub fn needs_smoothing(&self) -> bool {
        self.smoothing
            .iter()
            .flatten()
            .any(|i| i.mu == 0.0 && i.prox_diameter > 0.0 && i.map_norm > 0.0)
    }

    /// Fixed smoothing levels for a horizon of `n_iters`.
    pub fn fixed_eta(&self, n_iters: usize) -> Vec<f64> {
        self.smoothing
            .iter()
            .map(|s| {
                s.map_or(0.0, |i| {
                    crate::smoothing::fixed_eta(&i, n_iters, self.diameter)
                })
            })
            .collect()
    }

    /// Smoothing levels at iteration `k` of the anytime schedule.
    pub fn adaptive_eta(&self, k: usize) -> Vec<f64> {
        self.smoothing
            .iter()
            .map(|s| {
                s.map_or(0.0, |i| {
                    crate::smoothing::adaptive_eta(&i, k, self.diameter)
                })
            })
            .collect()
    }
}

/// Exact objective and constraint values at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub objective: f64,
    pub affine_residual: Vec<f64>,
    pub constraints: Vec<f64>,
    pub infeasibility: f64,
}

/// Operations a problem must provide to be solved by the conditional gradient methods.
///
/// `Point` is a convex combination of vertices; `Model` is the linearization of
/// the objective and constraints at a point for given smoothing levels.
pub trait CgProblem {
    type Point: Clone;
    type Vertex;
    type Model;

    fn n_affine(&self) -> usize;
    fn n_constraints(&self) -> usize;
    fn constants(&self) -> Result<ProblemConstants>;
    /// `lmo(0)`
    fn initial_vertex(&self) -> Self::Vertex;
    fn vertex_point(&self, v: &Self::Vertex) -> Self::Point;
    fn vertex_id(&self, v: &Self::Vertex) -> u64;
    /// `g(v) = Av − b`
    fn affine_residual(&self, v: &Self::Vertex) -> Vec<f64>;
    /// `x ← (1 − α)x + αv`
    fn blend(&self, x: &mut Self::Point, v: &Self::Vertex, alpha: f64);
    /// Linearize at `x`; `eta[0]` smooths the objective, `eta[i]` constraint `i − 1`.
    fn linearize(&self, x: &Self::Point, eta: &[f64]) -> Result<Self::Model>;
    /// `h(x) + ⟨∇h(x), v − x⟩` for the model built at `x`.
    fn model_constraints(&self, m: &Self::Model, v: &Self::Vertex) -> Vec<f64>;
    /// Minimize `⟨∇f + Aᵀq + Σ r_i ∇h_i, ·⟩` over the feasible set.
    fn model_argmin(&self, m: &Self::Model, q: &[f64], r: &[f64]) -> Self::Vertex;
    fn evaluate(&self, x: &Self::Point) -> Result<PointReport>;
}

/// `g₁ + λ(g₁ − g₂)`
pub fn extrapolate(latest: &[f64], previous: &[f64], lambda: f64) -> Vec<f64> {
    latest
        .iter()
        .zip(previous)
        .map(|(a, b)| a + lambda * (a - b))
        .collect()
}

/// Plain proximal dual step: `q + g̃/τ` and `[r + h̃/τ]₊`.
pub fn dual_step(q: &[f64], r: &[f64], g: &[f64], h: &[f64], tau: f64) -> (Vec<f64>, Vec<f64>) {
    let q = q.iter().zip(g).map(|(qi, gi)| qi + gi / tau).collect();
    let r = r
        .iter()
        .zip(h)
        .map(|(ri, hi)| (ri + hi / tau).max(0.0))
        .collect();
    (q, r)
}

/// Dual step regularized toward `(q0, r0)` with weight `γ`.
#[allow(clippy::too_many_arguments)]
pub fn dual_step_regularized(
    q: &[f64],
    r: &[f64],
    q0: &[f64],
    r0: &[f64],
    g: &[f64],
    h: &[f64],
    tau: f64,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let den = tau + gamma;
    let q = q
        .iter()
        .zip(q0)
        .zip(g)
        .map(|((qi, q0i), gi)| (tau * qi + gamma * q0i + gi) / den)
        .collect();
    let r = r
        .iter()
        .zip(r0)
        .zip(h)
        .map(|((ri, r0i), hi)| ((tau * ri + gamma * r0i + hi) / den).max(0.0))
        .collect();
    (q, r)
}

/// Everything needed to continue a run.
///
/// The history needed by the extrapolation is kept as cached values:
/// `g(p_k)`, `g(p_{k−1})`, `l_h(x_{k−1}, p_k)` and `l_h(x_{k−2}, p_{k−1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState<Pt> {
    pub k: usize,
    pub x: Pt,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub q0: Vec<f64>,
    pub r0: Vec<f64>,
    /// Averaged dual iterates.
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub affine_latest: Vec<f64>,
    pub affine_previous: Vec<f64>,
    pub lin_latest: Vec<f64>,
    pub lin_previous: Vec<f64>,
    pub last_vertex: u64,
}

/// Final iterate, duals and trace of a run.
#[derive(Clone, Debug)]
pub struct SolveOutput<Pt> {
    pub x: Pt,
    pub report: PointReport,
    /// Averaged duals `(y_N, z_N)`.
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Last dual iterates `(q_N, r_N)`.
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub iterations: usize,
    pub trace: Trace,
}

/// Initial dual point; defaults to zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualStart {
    pub q0: Option<Vec<f64>>,
    pub r0: Option<Vec<f64>>,
}

pub(crate) fn init_state<P: CgProblem>(
    problem: &P,
    start: &DualStart,
    eta: &[f64],
) -> Result<SolverState<P::Point>> {
    let (m, d) = (problem.n_affine(), problem.n_constraints());
    let q0 = start.q0.clone().unwrap_or_else(|| vec![0.0; m]);
    let r0 = start.r0.clone().unwrap_or_else(|| vec![0.0; d]);
    check_dim("initial affine dual", m, q0.len())?;
    check_dim("initial constraint dual", d, r0.len())?;
    if r0.iter().any(|v| *v < 0.0) {
        return Err(CoexError::Invalid(
            "initial constraint dual must be nonnegative".into(),
        ));
    }
    let p0 = problem.initial_vertex();
    let x = problem.vertex_point(&p0);
    let g0 = problem.affine_residual(&p0);
    let lin0 = if d > 0 {
        let model = problem.linearize(&x, eta)?;
        problem.model_constraints(&model, &p0)
    } else {
        Vec::new()
    };
    Ok(SolverState {
        k: 0,
        last_vertex: problem.vertex_id(&p0),
        x,
        q: q0.clone(),
        r: r0.clone(),
        y: q0.clone(),
        z: r0.clone(),
        q0,
        r0,
        affine_previous: g0.clone(),
        affine_latest: g0,
        lin_previous: lin0.clone(),
        lin_latest: lin0,
    })
}

fn check_finite(values: &[f64], k: usize, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoexError::NonFinite {
            k,
            what: what.to_string(),
        })
    }
}

/// One iteration. With `use_duals == false` the dual variables stay fixed.
pub(crate) fn advance<P: CgProblem>(
    problem: &P,
    s: &mut SolverState<P::Point>,
    params: StepParams,
    eta: &[f64],
    use_duals: bool,
) -> Result<()> {
    let k = s.k + 1;
    let has_duals = use_duals && (!s.q.is_empty() || !s.r.is_empty());
    if has_duals {
        let g = extrapolate(&s.affine_latest, &s.affine_previous, params.lambda);
        let h = extrapolate(&s.lin_latest, &s.lin_previous, params.lambda);
        let (q, r) = if params.gamma == 0.0 {
            dual_step(&s.q, &s.r, &g, &h, params.tau)
        } else {
            dual_step_regularized(&s.q, &s.r, &s.q0, &s.r0, &g, &h, params.tau, params.gamma)
        };
        check_finite(&q, k, "affine dual")?;
        check_finite(&r, k, "constraint dual")?;
        s.q = q;
        s.r = r;
    }
    let model = problem.linearize(&s.x, eta)?;
    let p = problem.model_argmin(&model, &s.q, &s.r);
    if !s.q.is_empty() {
        let g = problem.affine_residual(&p);
        s.affine_previous = std::mem::replace(&mut s.affine_latest, g);
    }
    if !s.r.is_empty() {
        let lin = problem.model_constraints(&model, &p);
        check_finite(&lin, k, "constraint linearization")?;
        s.lin_previous = std::mem::replace(&mut s.lin_latest, lin);
    }
    problem.blend(&mut s.x, &p, params.alpha);
    let a = params.alpha;
    for (yi, qi) in s.y.iter_mut().zip(&s.q) {
        *yi = (1.0 - a) * *yi + a * qi;
    }
    for (zi, ri) in s.z.iter_mut().zip(&s.r) {
        *zi = (1.0 - a) * *zi + a * ri;
    }
    s.last_vertex = problem.vertex_id(&p);
    s.k = k;
    Ok(())
}

pub(crate) fn record<P: CgProblem>(
    problem: &P,
    s: &SolverState<P::Point>,
    started: Instant,
    timing: bool,
) -> Result<TraceRecord> {
    let rep = problem.evaluate(&s.x)?;
    if !(rep.objective.is_finite() && rep.infeasibility.is_finite()) {
        return Err(CoexError::NonFinite {
            k: s.k,
            what: "objective or infeasibility".into(),
        });
    }
    Ok(TraceRecord {
        k: s.k,
        objective: rep.objective,
        infeasibility: rep.infeasibility,
        q_norm: linalg::norm(&s.q),
        r_norm: linalg::norm(&s.r),
        vertex_id: s.last_vertex,
        millis: if timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
    })
}

pub(crate) fn finish<P: CgProblem>(
    problem: &P,
    s: SolverState<P::Point>,
    trace: Trace,
) -> Result<SolveOutput<P::Point>> {
    let report = problem.evaluate(&s.x)?;
    Ok(SolveOutput {
        iterations: s.k,
        report,
        x: s.x,
        y: s.y,
        z: s.z,
        q: s.q,
        r: s.r,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_example() {
        assert_eq!(extrapolate(&[2.0, 0.0], &[0.0, 2.0], 1.0), vec![4.0, -2.0]);
    }

    #[test]
    fn plain_dual_step_examples() {
        let (q, _) = dual_step(&[1.0, -2.0], &[], &[2.0, 2.0], &[], 2.0);
        assert_eq!(q, vec![2.0, -1.0]);
        let (_, r) = dual_step(&[], &[0.5], &[], &[-3.0], 2.0);
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn regularized_dual_step_examples() {
        let (q, r) =
            dual_step_regularized(&[1.0], &[0.0], &[0.0], &[0.0], &[2.0], &[-1.0], 1.0, 1.0);
        assert_eq!(q, vec![1.5]);
        assert_eq!(r, vec![0.0]);
    }
}
