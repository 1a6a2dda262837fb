//! A-priori error bounds for the solvers.
//!
//! `*_corollary` functions are the closed-form rates; `*_theorem` functions
//! evaluate the sharper parameter-dependent sums for a concrete horizon.

use super::schedule::{big_gamma, CoexCgSchedule, CoexDurCgSchedule, Schedule};
use crate::linalg;
use crate::smoothing::{adaptive_eta, SmoothingInfo};

/// Constants of one function: its gradient Lipschitz constant if smooth,
/// otherwise its max-form smoothing data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionConstants {
    pub lipschitz: f64,
    pub smoothing: Option<SmoothingInfo>,
}

impl FunctionConstants {
    pub fn smooth(lipschitz: f64) -> Self {
        Self {
            lipschitz,
            smoothing: None,
        }
    }

    pub fn max_form(info: SmoothingInfo) -> Self {
        Self {
            lipschitz: 0.0,
            smoothing: Some(info),
        }
    }

    fn nonsmooth(&self) -> Option<&SmoothingInfo> {
        self.smoothing
            .as_ref()
            .filter(|i| i.mu == 0.0 && i.prox_diameter > 0.0 && i.map_norm > 0.0)
    }

    /// Lipschitz constant after smoothing with `eta`.
    fn lipschitz_at(&self, eta: f64) -> f64 {
        match &self.smoothing {
            Some(i) if i.mu + eta > 0.0 => i.map_norm * i.map_norm / (i.mu + eta),
            Some(_) => 0.0,
            None => self.lipschitz,
        }
    }

    /// `‖C‖ D_V`, zero for smooth functions.
    fn spread(&self) -> f64 {
        self.nonsmooth()
            .map_or(0.0, |i| i.map_norm * i.prox_diameter)
    }

    fn prox_sq(&self) -> f64 {
        self.nonsmooth()
            .map_or(0.0, |i| i.prox_diameter * i.prox_diameter)
    }

    fn eta_adaptive(&self, k: usize, diameter: f64) -> f64 {
        self.nonsmooth()
            .map_or(0.0, |i| adaptive_eta(i, k.max(1), diameter))
    }
}

/// Everything the bounds depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundData {
    pub n_iters: usize,
    pub diameter: f64,
    pub affine_norm: f64,
    /// `M̄` (or its max-form counterpart).
    pub m_bar: f64,
    pub objective: FunctionConstants,
    pub constraints: Vec<FunctionConstants>,
    /// `‖q₀‖² + ‖r₀‖²`
    pub dual_start_sq: f64,
    /// `‖y*‖`
    pub y_star_norm: f64,
    /// `‖z*‖`
    pub z_star_norm: f64,
}

/// Bounds on `f(x_N) − f*` and on `‖g(x_N)‖ + ‖[h(x_N)]₊‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub objective_gap: f64,
    pub infeasibility: f64,
}

impl BoundData {
    fn n(&self) -> f64 {
        self.n_iters as f64
    }

    fn dual_scale(&self, coef: f64) -> f64 {
        (coef * self.m_bar * self.m_bar + self.affine_norm * self.affine_norm).sqrt()
    }

    fn lip_h_bar(&self, eta: &[f64]) -> f64 {
        let l: Vec<f64> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| c.lipschitz_at(eta.get(i + 1).copied().unwrap_or(0.0)))
            .collect();
        linalg::norm(&l)
    }

    fn has_nonsmooth(&self) -> bool {
        self.objective.nonsmooth().is_some()
            || self.constraints.iter().any(|c| c.nonsmooth().is_some())
    }

    fn dual_mass(&self) -> f64 {
        (self.y_star_norm + 1.0).powi(2) + (self.z_star_norm + 1.0).powi(2) + self.dual_start_sq
    }

    /// Closed-form rates of fixed-horizon CoexCG on smooth problems.
    pub fn coexcg_corollary(&self) -> Bound {
        let (n, d2) = (self.n(), self.diameter * self.diameter);
        let s = self.diameter * self.dual_scale(9.0) / n.sqrt();
        let lh = self.lip_h_bar(&[]);
        let lf = self.objective.lipschitz;
        Bound {
            objective_gap: 2.0 * lf * d2 / (n + 1.0) + s * (self.dual_start_sq + 1.0),
            infeasibility: 2.0 * (lf + (self.z_star_norm + 1.0) * lh) * d2 / (n + 1.0)
                + 2.0
                    * s
                    * (2.0 * (self.y_star_norm.powi(2) + self.z_star_norm.powi(2))
                        + self.dual_start_sq
                        + 5.0),
        }
    }

    /// Closed-form rates of CoexDurCG on smooth problems.
    pub fn coexdurcg_corollary(&self) -> Bound {
        let (n, d2) = (self.n(), self.diameter * self.diameter);
        let s = self.diameter * self.dual_scale(9.0) / n.sqrt();
        let lh = self.lip_h_bar(&[]);
        let lf = self.objective.lipschitz;
        Bound {
            objective_gap: 2.0 * lf * d2 / (n + 1.0) + s * (3.0 * self.dual_start_sq + 1.0),
            infeasibility: 2.0 * (lf + (self.z_star_norm + 1.0) * lh) * d2 / (n + 1.0)
                + s * (3.0 * self.dual_mass() + 1.0),
        }
    }

    /// Parameter-dependent bound for a smooth problem under any schedule
    /// satisfying the step conditions, evaluated at the solver's schedule.
    fn smooth_theorem<S: Schedule>(&self, sched: &S) -> Bound {
        let n = self.n_iters;
        let d2 = self.diameter * self.diameter;
        let c = self.dual_scale(9.0).powi(2);
        let lf = self.objective.lipschitz;
        let lfh = lf + (self.z_star_norm + 1.0) * self.lip_h_bar(&[]);
        let (mut sum_f, mut sum_h, mut sum_g) = (0.0, 0.0, 0.0);
        for k in 1..=n {
            let p = sched.params(k);
            let gk = big_gamma(k);
            let common = p.alpha * p.lambda * p.lambda * c * d2 / (2.0 * p.tau * gk);
            sum_f += lf * p.alpha * p.alpha * d2 / (2.0 * gk) + common;
            sum_h += lfh * p.alpha * p.alpha * d2 / (2.0 * gk) + common;
            sum_g += p.alpha * p.gamma / (2.0 * gk);
        }
        let gn = big_gamma(n);
        let pn = sched.params(n);
        let tail = pn.alpha * c * d2 / (2.0 * (pn.tau + pn.gamma));
        let weight = gn * (sched.params(1).tau / 2.0 + sum_g);
        Bound {
            objective_gap: gn * sum_f + tail + weight * self.dual_start_sq,
            infeasibility: gn * sum_h + tail + 2.0 * weight * self.dual_mass(),
        }
    }

    pub fn coexcg_theorem(&self) -> Bound {
        let sched = CoexCgSchedule::new(self.n_iters, self.diameter, self.m_bar, self.affine_norm);
        self.smooth_theorem(&sched)
    }

    pub fn coexdurcg_theorem(&self) -> Bound {
        let sched = CoexDurCgSchedule::smooth(self.diameter, self.m_bar, self.affine_norm);
        self.smooth_theorem(&sched)
    }

    /// Fixed-horizon CoexCG on the smoothed problem with levels `eta`
    /// (objective first); smooth functions take `eta = 0`.
    pub fn fixed_smoothing_theorem(&self, eta: &[f64]) -> Bound {
        let (n, d2) = (self.n(), self.diameter * self.diameter);
        let s = self.diameter * self.dual_scale(9.0) / n.sqrt();
        let lf = self.objective.lipschitz_at(eta[0]);
        let lh = self.lip_h_bar(eta);
        let f_err = eta[0] * self.objective.prox_sq();
        let h_err: Vec<f64> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| eta[i + 1] * c.prox_sq())
            .collect();
        let ys = self.y_star_norm.powi(2) + self.z_star_norm.powi(2);
        Bound {
            objective_gap: 2.0 * lf * d2 / (n + 1.0) + s * (self.dual_start_sq + 1.0) + f_err,
            infeasibility: 2.0 * (lf + (self.z_star_norm + 1.0) * lh) * d2 / (n + 1.0)
                + 2.0 * s * (2.0 * ys + self.dual_start_sq + 5.0)
                + f_err
                + (self.z_star_norm + 1.0) * linalg::norm(&h_err),
        }
    }

    /// Closed-form rates of fixed-horizon CoexCG when every function is nonsmooth.
    pub fn fixed_smoothing_corollary(&self) -> Bound {
        let n = self.n();
        let s = self.diameter * self.dual_scale(9.0) / n.sqrt();
        let fb = 3.0 * self.diameter * self.objective.spread() / n.sqrt();
        let spread_h = linalg::norm(
            &self
                .constraints
                .iter()
                .map(|c| c.spread())
                .collect::<Vec<_>>(),
        );
        let ys = self.y_star_norm.powi(2) + self.z_star_norm.powi(2);
        Bound {
            objective_gap: fb + s * (self.dual_start_sq + 1.0),
            infeasibility: fb
                + 2.0 * (self.z_star_norm + 1.0) * self.diameter * spread_h / n.sqrt()
                + 2.0 * s * (2.0 * ys + self.dual_start_sq + 5.0),
        }
    }

    fn eta_vec(&self, k: usize) -> Vec<f64> {
        let mut v = vec![self.objective.eta_adaptive(k, self.diameter)];
        v.extend(
            self.constraints
                .iter()
                .map(|c| c.eta_adaptive(k, self.diameter)),
        );
        v
    }

    /// Parameter-dependent bound for CoexDurCG with adaptive smoothing.
    pub fn adaptive_theorem(&self) -> Bound {
        let n = self.n_iters;
        let coef = if self.has_nonsmooth() { 12.0 } else { 9.0 };
        let sched = CoexDurCgSchedule {
            beta: self.diameter * self.dual_scale(coef),
        };
        let d2 = self.diameter * self.diameter;
        let c = self.dual_scale(coef).powi(2);
        let du2 = self.objective.prox_sq();
        let dv4: Vec<f64> = self
            .constraints
            .iter()
            .map(|c| c.prox_sq().powi(2))
            .collect();
        let dv2: Vec<f64> = self.constraints.iter().map(|c| c.prox_sq()).collect();
        let zp = self.z_star_norm + 1.0;
        let eta: Vec<Vec<f64>> = (0..=n).map(|k| self.eta_vec(k.max(1))).collect();
        let diff_sq = |a: &[f64], b: &[f64]| -> f64 {
            (1..a.len())
                .map(|i| (a[i] - b[i]).powi(2) * dv4[i - 1])
                .sum()
        };
        let (mut sum_f, mut sum_h, mut sum_g) = (0.0, 0.0, 0.0);
        for k in 1..=n {
            let p = sched.params(k);
            let gk = big_gamma(k);
            let ek = &eta[k];
            let lf = self.objective.lipschitz_at(ek[0]);
            let lh = self.lip_h_bar(ek);
            let lag = if k >= 2 {
                diff_sq(&eta[(k - 2).max(1)], &eta[k - 1])
            } else {
                0.0
            };
            let common = p.alpha * p.lambda * p.lambda * c * d2 / (2.0 * p.tau * gk)
                + 3.0 * p.lambda * p.lambda / (p.tau * gk) * lag;
            let h_err: Vec<f64> = (1..ek.len()).map(|i| ek[i] * dv2[i - 1]).collect();
            sum_f += lf * p.alpha * p.alpha * d2 / (2.0 * gk) + common + p.alpha / gk * ek[0] * du2;
            sum_h += (lf + zp * lh) * p.alpha * p.alpha * d2 / (2.0 * gk)
                + common
                + p.alpha / gk * (ek[0] * du2 + zp * linalg::norm(&h_err));
            sum_g += p.alpha * p.gamma / (2.0 * gk);
        }
        let gn = big_gamma(n);
        let pn = sched.params(n);
        let den = 2.0 * (pn.tau + pn.gamma);
        let tail =
            pn.alpha * c * d2 / den + 6.0 * pn.alpha * diff_sq(&eta[(n - 1).max(1)], &eta[n]) / den;
        let weight = gn * (sched.params(1).tau / 2.0 + sum_g);
        let en = &eta[n];
        let h_err_n: Vec<f64> = (1..en.len()).map(|i| en[i] * dv2[i - 1]).collect();
        Bound {
            objective_gap: gn * sum_f + tail + weight * self.dual_start_sq + en[0] * du2,
            infeasibility: gn * sum_h
                + tail
                + 2.0 * weight * self.dual_mass()
                + en[0] * du2
                + zp * linalg::norm(&h_err_n),
        }
    }

    /// Closed-form rates of adaptive CoexDurCG when every function is nonsmooth.
    pub fn adaptive_corollary(&self) -> Bound {
        let n = self.n();
        let b = self.dual_scale(12.0);
        let fb = self.objective.spread();
        let spread_h = linalg::norm(
            &self
                .constraints
                .iter()
                .map(|c| c.spread())
                .collect::<Vec<_>>(),
        );
        let lag: f64 = self.constraints.iter().map(|c| c.spread().powi(2)).sum();
        let lag_term = if b > 0.0 {
            12.0 * lag * self.diameter / (b * (n + 1.0) * n.sqrt())
        } else {
            0.0
        };
        Bound {
            objective_gap: 11.0 * fb * self.diameter / (3.0 * n.sqrt())
                + b * self.diameter / n.sqrt() * (2.0 * self.dual_start_sq + 2.0)
                + lag_term,
            infeasibility: 7.0 * (fb + (self.z_star_norm + 1.0) * spread_h) * self.diameter
                / (3.0 * n.sqrt())
                + lag_term
                + 2.0 * b * self.diameter / n.sqrt() * (4.0 * self.dual_mass() + 2.0),
        }
    }
}

/// Check the step-size conditions at iteration `k ≥ 2` in floating point:
/// returns the relative violations of the equality and the inequality.
pub fn step_condition_residuals<S: Schedule>(sched: &S, k: usize) -> (f64, f64) {
    let (p, pp) = (sched.params(k), sched.params(k - 1));
    let (g, gp) = (big_gamma(k), big_gamma(k - 1));
    let lhs_eq = p.lambda * p.alpha / g;
    let rhs_eq = pp.alpha / gp;
    let lhs = p.alpha * p.tau / g;
    let rhs = pp.alpha * (pp.tau + pp.gamma) / gp;
    (
        (lhs_eq - rhs_eq).abs() / rhs_eq.abs().max(1.0),
        ((lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE)).max(0.0),
    )
}
