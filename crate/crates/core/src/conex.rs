//! Projection-based constraint-extrapolation method (ConEx) for dense problems.
//!
//! Each iteration takes the same extrapolated dual step as CoexCG, with the
//! linearizations anchored at the previous primal iterate, and then a
//! projected gradient step on the Lagrangian linearization. The reported
//! point is the uniform average of the primal iterates. Unsmoothed max-form
//! functions enter through subgradients.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{CoexError, Result};
use crate::linalg;
use crate::problem::{DensePoint, ProblemSpec};
use crate::solver::{dual_step, extrapolate, CgProblem, SolveOutput, Trace, TraceRecord};

/// Default refusal threshold on the number of variables.
pub const DEFAULT_DIM_CAP: usize = 1_000_000;

/// Step sizes, held constant over the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConexRule {
    /// Extrapolation weight.
    pub lambda: f64,
    /// Dual proximal weight.
    pub tau: f64,
    /// Primal proximal weight.
    pub eta: f64,
}

impl ConexRule {
    /// `τ = √N·√(9M̄² + ‖A‖²)` and `η = L_f + (‖A‖ + M̄)√N`.
    pub fn default_for(spec: &ProblemSpec, n_iters: usize) -> Result<Self> {
        let c = spec.constants()?;
        let (m, a) = (c.m_bar(), c.affine_norm);
        let sq = (n_iters as f64).sqrt();
        let lf = spec.lipschitz_f(0.0).ok_or_else(|| {
            CoexError::Invalid("ConEx needs the objective's gradient Lipschitz constant".into())
        })?;
        Ok(Self {
            lambda: 1.0,
            tau: (9.0 * m * m + a * a).sqrt() * sq,
            eta: lf + (a + m) * sq,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConexOptions {
    pub rule: Option<ConexRule>,
    pub dim_cap: usize,
    pub record_trace: bool,
    pub timing: bool,
}

impl Default for ConexOptions {
    fn default() -> Self {
        Self {
            rule: None,
            dim_cap: DEFAULT_DIM_CAP,
            record_trace: true,
            timing: true,
        }
    }
}

/// Run `n_iters` ConEx iterations on a dense problem.
pub fn run_conex(
    spec: &ProblemSpec,
    n_iters: usize,
    opts: &ConexOptions,
) -> Result<SolveOutput<DensePoint>> {
    let n = spec.dim();
    if n > opts.dim_cap {
        return Err(CoexError::Refused {
            dim: n as u128,
            cap: opts.dim_cap as u128,
        });
    }
    if n_iters == 0 {
        return Err(CoexError::Invalid(
            "iteration count must be at least 1".into(),
        ));
    }
    let rule = match opts.rule {
        Some(r) => r,
        None => ConexRule::default_for(spec, n_iters)?,
    };
    let has_duals = spec.n_affine() + spec.n_constraints() > 0;
    if !(rule.eta > 0.0) || (has_duals && !(rule.tau > 0.0)) {
        return Err(CoexError::Invalid(format!(
            "ConEx step sizes must be positive (tau = {}, eta = {})",
            rule.tau, rule.eta
        )));
    }
    let zeros = vec![0.0; n];
    let started = Instant::now();

    let mut p = spec.start_vertex().point;
    let mut q = vec![0.0; spec.n_affine()];
    let mut r = vec![0.0; spec.n_constraints()];
    let (mut y, mut z) = (q.clone(), r.clone());
    let mut avg = zeros.clone();
    let mut g_latest = spec.affine_residual_at(&p);
    let mut g_prev = g_latest.clone();
    let mut model = spec.linearize_subgradient(&p)?;
    // l_h(p_{k-2}, p_{k-1}) and l_h(p_{k-3}, p_{k-2})
    let mut lin_latest = model.h.clone();
    let mut lin_prev = lin_latest.clone();
    let mut trace = Trace::default();

    for k in 1..=n_iters {
        if has_duals {
            let lam = if k == 1 { 0.0 } else { rule.lambda };
            let g = extrapolate(&g_latest, &g_prev, lam);
            let h = extrapolate(&lin_latest, &lin_prev, lam);
            let (nq, nr) = dual_step(&q, &r, &g, &h, rule.tau);
            q = nq;
            r = nr;
        }
        // Gradient step on l_f(p, ·) + ⟨g(·), q⟩ + ⟨l_h(p, ·), r⟩ from p.
        let mut c = model.grad_f.clone();
        if let Some(a) = &spec.affine {
            a.matrix.apply_t_add(&q, 1.0, &mut c);
        }
        for (ri, gi) in r.iter().zip(&model.grads_h) {
            if *ri != 0.0 {
                linalg::axpy(*ri, gi, &mut c);
            }
        }
        let step: Vec<f64> = p
            .iter()
            .zip(&c)
            .map(|(pi, ci)| pi - ci / rule.eta)
            .collect();
        let p_new = spec.set.project(&step);
        if p_new.iter().any(|v| !v.is_finite()) {
            return Err(CoexError::NonFinite {
                k,
                what: "primal iterate".into(),
            });
        }
        let lin_new = model.constraint_linearization(&p_new);
        lin_prev = std::mem::replace(&mut lin_latest, lin_new);
        g_prev = std::mem::replace(&mut g_latest, spec.affine_residual_at(&p_new));
        p = p_new;
        model = spec.linearize_subgradient(&p)?;

        let w = 1.0 / k as f64;
        for (ai, pi) in avg.iter_mut().zip(&p) {
            *ai += w * (pi - *ai);
        }
        for (yi, qi) in y.iter_mut().zip(&q) {
            *yi += w * (qi - *yi);
        }
        for (zi, ri) in z.iter_mut().zip(&r) {
            *zi += w * (ri - *zi);
        }
        if opts.record_trace {
            let rep = spec.report(&avg)?;
            trace.records.push(TraceRecord {
                k,
                objective: rep.objective,
                infeasibility: rep.infeasibility,
                q_norm: linalg::norm(&q),
                r_norm: linalg::norm(&r),
                vertex_id: 0,
                millis: if opts.timing {
                    started.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
            });
        }
    }
    let report = spec.report(&avg)?;
    Ok(SolveOutput {
        x: dense(&avg),
        report,
        y,
        z,
        q,
        r,
        iterations: n_iters,
        trace,
    })
}

fn dense(x: &[f64]) -> DensePoint {
    DensePoint {
        x: x.to_vec(),
        atoms: Default::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::lmo::FeasibleSet;
    use crate::problem::{Func, Quadratic};

    fn unconstrained(target: Vec<f64>) -> ProblemSpec {
        let n = target.len();
        let lin: Vec<f64> = target.iter().map(|t| -t).collect();
        let q = Quadratic::new(Some(Matrix::identity(n)), lin, 0.0).unwrap();
        ProblemSpec {
            objective: Func::Quadratic(q),
            affine: None,
            constraints: vec![],
            set: FeasibleSet::Box {
                lower: vec![-10.0; n],
                upper: vec![10.0; n],
            },
            overrides: Default::default(),
        }
    }

    #[test]
    fn large_eta_barely_moves() {
        let spec = unconstrained(vec![1.0, 2.0]);
        let opts = ConexOptions {
            rule: Some(ConexRule {
                lambda: 1.0,
                tau: 1.0,
                eta: 1e6,
            }),
            ..Default::default()
        };
        let out = run_conex(&spec, 1, &opts).unwrap();
        // Start at the lower corner, gradient is (-11, -12).
        assert!((out.x.x[0] - (-10.0 + 11e-6)).abs() < 1e-12);
        assert!((out.x.x[1] - (-10.0 + 12e-6)).abs() < 1e-12);
    }

    #[test]
    fn refuses_above_cap() {
        let spec = unconstrained(vec![0.0; 5]);
        let opts = ConexOptions {
            dim_cap: 4,
            ..Default::default()
        };
        assert!(matches!(
            run_conex(&spec, 3, &opts),
            Err(CoexError::Refused { dim: 5, cap: 4 })
        ));
    }
}
