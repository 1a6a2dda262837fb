//! Step-size schedules.

use serde::{Deserialize, Serialize};

/// Parameters used at one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepParams {
    /// Primal averaging weight.
    pub alpha: f64,
    /// Extrapolation weight.
    pub lambda: f64,
    /// Dual proximal weight.
    pub tau: f64,
    /// Pull-back weight toward the initial dual point (zero for CoexCG).
    pub gamma: f64,
}

pub trait Schedule {
    fn params(&self, k: usize) -> StepParams;
}

pub fn alpha(k: usize) -> f64 {
    2.0 / (k as f64 + 1.0)
}

pub fn lambda(k: usize) -> f64 {
    (k as f64 - 1.0) / k as f64
}

/// Product weight `Γ_k = 2/(k(k+1))`.
pub fn big_gamma(k: usize) -> f64 {
    let k = k as f64;
    2.0 / (k * (k + 1.0))
}

/// Fixed-horizon schedule: `τ_k = N^{3/2}/k · scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexCgSchedule {
    pub n_iters: usize,
    /// `D_X √(9M̄² + ‖A‖²)`
    pub scale: f64,
}

impl CoexCgSchedule {
    pub fn new(n_iters: usize, diameter: f64, m_bar: f64, affine_norm: f64) -> Self {
        Self {
            n_iters,
            scale: diameter * (9.0 * m_bar * m_bar + affine_norm * affine_norm).sqrt(),
        }
    }

    pub fn tau(&self, k: usize) -> f64 {
        (self.n_iters as f64).powf(1.5) / k as f64 * self.scale
    }
}

impl Schedule for CoexCgSchedule {
    fn params(&self, k: usize) -> StepParams {
        StepParams {
            alpha: alpha(k),
            lambda: lambda(k),
            tau: self.tau(k),
            gamma: 0.0,
        }
    }
}

/// Anytime schedule: `τ_k = β√k`, `γ_k = (β/k)((k+1)^{3/2} − k^{3/2})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexDurCgSchedule {
    pub beta: f64,
}

impl CoexDurCgSchedule {
    /// `β = D_X √(9M̄² + ‖A‖²)` for smooth constraints.
    pub fn smooth(diameter: f64, m_bar: f64, affine_norm: f64) -> Self {
        Self {
            beta: diameter * (9.0 * m_bar * m_bar + affine_norm * affine_norm).sqrt(),
        }
    }

    /// `β = D_X √(12M̄² + ‖A‖²)` for adaptively smoothed constraints.
    pub fn nonsmooth(diameter: f64, m_bar: f64, affine_norm: f64) -> Self {
        Self {
            beta: diameter * (12.0 * m_bar * m_bar + affine_norm * affine_norm).sqrt(),
        }
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.beta * (k as f64).sqrt()
    }

    pub fn gamma(&self, k: usize) -> f64 {
        let kf = k as f64;
        self.beta / kf * ((kf + 1.0).powf(1.5) - kf.powf(1.5))
    }
}

impl Schedule for CoexDurCgSchedule {
    fn params(&self, k: usize) -> StepParams {
        StepParams {
            alpha: alpha(k),
            lambda: lambda(k),
            tau: self.tau(k),
            gamma: self.gamma(k),
        }
    }
}
