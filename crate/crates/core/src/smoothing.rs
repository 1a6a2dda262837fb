//! Structured nonsmooth functions `max_s <Cx, s> - ĥ(s)` and their prox smoothing.
//!
//! Two prox families are supported: entropy on a simplex (centered at the
//! uniform point) and half the squared Euclidean norm on the unit box
//! (centered at zero). Products of simplices are handled blockwise.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, CoexError, Result};
use crate::linalg::{self, Matrix};
use crate::lmo::project_simplex;

/// Smoothing parameters below this value are clamped.
pub const MIN_ETA: f64 = 1e-12;

/// Dual domain `S` of a max-form function, with its prox function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualSet {
    /// Probability simplex with the entropy prox.
    Simplex { size: usize },
    /// `[0, 1]^size` with `½‖s‖²`.
    UnitBox { size: usize },
    /// Cartesian product of simplices, entropy on each block.
    SimplexProduct { sizes: Vec<usize> },
}

impl DualSet {
    pub fn dim(&self) -> usize {
        match self {
            DualSet::Simplex { size } | DualSet::UnitBox { size } => *size,
            DualSet::SimplexProduct { sizes } => sizes.iter().sum(),
        }
    }

    /// Squared prox diameter `max_S V`.
    pub fn prox_diameter_sq(&self) -> f64 {
        match self {
            DualSet::Simplex { size } => (*size as f64).ln(),
            DualSet::UnitBox { size } => *size as f64 / 2.0,
            DualSet::SimplexProduct { sizes } => sizes.iter().map(|t| (*t as f64).ln()).sum(),
        }
    }

    /// Norm of the prox center.
    pub fn center_norm(&self) -> f64 {
        match self {
            DualSet::Simplex { size } => 1.0 / (*size as f64).sqrt(),
            DualSet::UnitBox { .. } => 0.0,
            DualSet::SimplexProduct { sizes } => {
                sizes.iter().map(|t| 1.0 / *t as f64).sum::<f64>().sqrt()
            }
        }
    }
}

/// Entropy-smoothed maximum of `w` with parameter `kappa > 0`.
///
/// Returns `κ ln Σ exp(w/κ) − κ ln T` and writes the softmax weights into `s`.
pub fn entropy_max(w: &[f64], kappa: f64, s: &mut [f64]) -> f64 {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (si, wi) in s.iter_mut().zip(w) {
        *si = ((wi - m) / kappa).exp();
        z += *si;
    }
    s.iter_mut().for_each(|si| *si /= z);
    m + kappa * z.ln() - kappa * (w.len() as f64).ln()
}

/// Huber piece `max_{s∈[0,1]} ws − κs²/2` and its maximizer.
pub fn huber(w: f64, kappa: f64) -> (f64, f64) {
    if w <= 0.0 {
        (0.0, 0.0)
    } else if w < kappa {
        (w * w / (2.0 * kappa), w / kappa)
    } else if kappa > 0.0 {
        (w - kappa / 2.0, 1.0)
    } else {
        (w, 1.0)
    }
}

/// Smoothing constants of a max-form function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingInfo {
    /// `‖C‖`
    pub map_norm: f64,
    /// `D_V`
    pub prox_diameter: f64,
    /// Strong convexity modulus of `ĥ`.
    pub mu: f64,
}

/// Fixed smoothing parameter for a run of `n_iters` iterations.
pub fn fixed_eta(info: &SmoothingInfo, n_iters: usize, diameter: f64) -> f64 {
    if info.mu > 0.0 || info.prox_diameter == 0.0 || info.map_norm == 0.0 {
        return 0.0;
    }
    clamp_eta(info.map_norm * diameter / (info.prox_diameter * (n_iters as f64).sqrt()))
}

/// Smoothing parameter for iteration `k` of the anytime schedule.
pub fn adaptive_eta(info: &SmoothingInfo, k: usize, diameter: f64) -> f64 {
    if info.mu > 0.0 || info.prox_diameter == 0.0 || info.map_norm == 0.0 {
        return 0.0;
    }
    clamp_eta(info.map_norm * diameter / ((k as f64).sqrt() * info.prox_diameter))
}

pub fn clamp_eta(eta: f64) -> f64 {
    if eta > 0.0 && eta < MIN_ETA {
        log::warn!("smoothing parameter {eta:e} clamped to {MIN_ETA:e}");
        MIN_ETA
    } else {
        eta
    }
}

/// `f(x) = ⟨a, x⟩ + c + max_{s∈S} ⟨Cx, s⟩ − ⟨o, s⟩ − (μ/2)‖s‖²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaxFormFunction {
    pub map: Matrix,
    pub dual: DualSet,
    /// Linear part `o` of `ĥ`; empty means zero.
    #[serde(default)]
    pub offset: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    /// Affine term outside the max; empty means zero.
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    /// `‖C‖` if known; otherwise estimated on first use.
    #[serde(default)]
    pub map_norm: Option<f64>,
    #[serde(skip)]
    cached_norm: OnceLock<f64>,
}

impl PartialEq for MaxFormFunction {
    fn eq(&self, o: &Self) -> bool {
        self.map == o.map
            && self.dual == o.dual
            && self.offset == o.offset
            && self.mu == o.mu
            && self.linear == o.linear
            && self.constant == o.constant
            && self.map_norm == o.map_norm
    }
}

impl MaxFormFunction {
    pub fn new(map: Matrix, dual: DualSet) -> Result<Self> {
        let f = Self {
            map,
            dual,
            offset: Vec::new(),
            mu: 0.0,
            linear: Vec::new(),
            constant: 0.0,
            map_norm: None,
            cached_norm: OnceLock::new(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_offset(mut self, offset: Vec<f64>, mu: f64) -> Result<Self> {
        self.offset = offset;
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_affine(mut self, linear: Vec<f64>, constant: f64) -> Result<Self> {
        self.linear = linear;
        self.constant = constant;
        self.validate()?;
        Ok(self)
    }

    pub fn with_map_norm(mut self, norm: f64) -> Self {
        self.map_norm = Some(norm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("dual set vs map rows", self.map.rows(), self.dual.dim())?;
        if !self.offset.is_empty() {
            check_dim("dual offset", self.dual.dim(), self.offset.len())?;
        }
        if !self.linear.is_empty() {
            check_dim("affine term", self.map.cols(), self.linear.len())?;
        }
        if let DualSet::SimplexProduct { sizes } = &self.dual {
            if sizes.contains(&0) {
                return invalid("empty simplex block");
            }
        }
        if !(self.mu >= 0.0) {
            return invalid("strong convexity modulus must be nonnegative");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.map.cols()
    }

    pub fn op_norm(&self) -> f64 {
        if let Some(n) = self.map_norm {
            return n;
        }
        *self.cached_norm.get_or_init(|| linalg::op_norm(&self.map))
    }

    pub fn prox_diameter(&self) -> f64 {
        self.dual.prox_diameter_sq().sqrt()
    }

    pub fn info(&self) -> SmoothingInfo {
        SmoothingInfo {
            map_norm: self.op_norm(),
            prox_diameter: self.prox_diameter(),
            mu: self.mu,
        }
    }

    /// Gradient-norm bound `‖a‖ + ‖C‖(‖c_v‖ + √2 D_V)` valid for every smoothing level.
    pub fn grad_bound(&self) -> f64 {
        linalg::norm(&self.linear)
            + self.op_norm() * (self.dual.center_norm() + 2f64.sqrt() * self.prox_diameter())
    }

    /// Gradient Lipschitz constant of the smoothed function.
    pub fn lipschitz(&self, eta: f64) -> f64 {
        let n = self.op_norm();
        n * n / (self.mu + eta)
    }

    fn dual_input(&self, x: &[f64]) -> Vec<f64> {
        let mut w = self.map.apply(x);
        if !self.offset.is_empty() {
            for (wi, oi) in w.iter_mut().zip(&self.offset) {
                *wi -= oi;
            }
        }
        w
    }

    fn affine(&self, x: &[f64]) -> f64 {
        self.constant
            + if self.linear.is_empty() {
                0.0
            } else {
                linalg::dot(&self.linear, x)
            }
    }

    /// Maximizer `s` and inner value for `w = Cx − o` at total curvature `kappa = μ + η`.
    fn solve_dual(&self, w: &[f64], kappa: f64) -> Result<(f64, Vec<f64>)> {
        let mut s = vec![0.0; w.len()];
        let value = match &self.dual {
            DualSet::UnitBox { .. } => {
                let mut v = 0.0;
                for (si, wi) in s.iter_mut().zip(w) {
                    let (hv, sv) = huber(*wi, kappa);
                    v += hv;
                    *si = sv;
                }
                v
            }
            DualSet::Simplex { .. } => simplex_block(w, &mut s, self.mu, kappa)?,
            DualSet::SimplexProduct { sizes } => {
                let mut v = 0.0;
                let mut start = 0;
                for t in sizes {
                    v += simplex_block(
                        &w[start..start + t],
                        &mut s[start..start + t],
                        self.mu,
                        kappa,
                    )?;
                    start += t;
                }
                v
            }
        };
        Ok((value, s))
    }

    /// Exact (unsmoothed) value.
    pub fn exact_value(&self, x: &[f64]) -> Result<f64> {
        check_dim("max-form argument", self.dim(), x.len())?;
        let w = self.dual_input(x);
        let (v, _) = self.solve_dual(&w, self.mu)?;
        Ok(self.affine(x) + v)
    }

    /// Smoothed value and gradient at smoothing level `eta`.
    pub fn value_grad(&self, x: &[f64], eta: f64) -> Result<(f64, Vec<f64>)> {
        check_dim("max-form argument", self.dim(), x.len())?;
        if !(eta >= 0.0) {
            return invalid("smoothing parameter must be nonnegative");
        }
        let kappa = self.mu + eta;
        if kappa == 0.0 && self.prox_diameter() > 0.0 {
            return Err(CoexError::Unsupported(
                "max-form function without strong convexity needs eta > 0".into(),
            ));
        }
        self.value_grad_at(x, kappa)
    }

    /// Exact value and a subgradient (the maximizer at `η = 0`).
    pub fn subgradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim("max-form argument", self.dim(), x.len())?;
        self.value_grad_at(x, self.mu)
    }

    fn value_grad_at(&self, x: &[f64], kappa: f64) -> Result<(f64, Vec<f64>)> {
        let w = self.dual_input(x);
        let (v, s) = self.solve_dual(&w, kappa)?;
        let mut g = if self.linear.is_empty() {
            vec![0.0; self.dim()]
        } else {
            self.linear.clone()
        };
        self.map.apply_t_add(&s, 1.0, &mut g);
        Ok((self.affine(x) + v, g))
    }

    pub fn smoothed_value(&self, x: &[f64], eta: f64) -> Result<f64> {
        Ok(self.value_grad(x, eta)?.0)
    }
}

fn simplex_block(w: &[f64], s: &mut [f64], mu: f64, kappa: f64) -> Result<f64> {
    if mu > 0.0 {
        if kappa != mu {
            return Err(CoexError::Unsupported(
                "entropy smoothing of a strongly convex simplex term".into(),
            ));
        }
        let scaled: Vec<f64> = w.iter().map(|v| v / mu).collect();
        let p = project_simplex(&scaled);
        s.copy_from_slice(&p);
        return Ok(linalg::dot(w, &p) - mu / 2.0 * linalg::norm_sq(&p));
    }
    if kappa == 0.0 {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for (i, v) in w.iter().enumerate() {
            if *v > best {
                best = *v;
                arg = i;
            }
        }
        s.iter_mut().for_each(|v| *v = 0.0);
        s[arg] = 1.0;
        return Ok(best);
    }
    Ok(entropy_max(w, kappa, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entropy_fn(rows: usize) -> MaxFormFunction {
        MaxFormFunction::new(Matrix::identity(rows), DualSet::Simplex { size: rows }).unwrap()
    }

    #[test]
    fn entropy_example_value() {
        let f = entropy_fn(2);
        let v = f.smoothed_value(&[1.0, 0.0], 1.0).unwrap();
        let expected = (1f64.exp() + 1.0).ln() - 2f64.ln();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.62011).abs() < 1e-5);
    }

    #[test]
    fn huber_pieces() {
        assert_eq!(huber(-1.0, 0.5), (0.0, 0.0));
        assert_eq!(huber(0.25, 0.5), (0.0625, 0.5));
        assert_eq!(huber(2.0, 0.5), (1.75, 1.0));
    }

    #[test]
    fn fixed_and_adaptive_eta_examples() {
        let info = SmoothingInfo {
            map_norm: 1.0,
            prox_diameter: 1.0,
            mu: 0.0,
        };
        assert!((fixed_eta(&info, 100, 2f64.sqrt()) - 0.141421).abs() < 1e-6);
        let info2 = SmoothingInfo {
            map_norm: 2.0,
            ..info
        };
        assert!((adaptive_eta(&info2, 4, 1.0) - 1.0).abs() < 1e-15);
        let smooth = SmoothingInfo { mu: 1.0, ..info };
        assert_eq!(fixed_eta(&smooth, 100, 1.0), 0.0);
    }

    #[test]
    fn lipschitz_and_grad_bound() {
        let f = MaxFormFunction::new(Matrix::identity(2), DualSet::Simplex { size: 2 })
            .unwrap()
            .with_offset(vec![], 1.0)
            .unwrap();
        assert!((f.lipschitz(0.0) - 1.0).abs() < 1e-12);
        let b = MaxFormFunction::new(Matrix::identity(4), DualSet::UnitBox { size: 4 }).unwrap();
        assert!((b.grad_bound() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_eta_without_mu_is_rejected() {
        assert!(entropy_fn(3).value_grad(&[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn tiny_eta_is_clamped() {
        assert_eq!(clamp_eta(1e-15), MIN_ETA);
        assert_eq!(clamp_eta(0.5), 0.5);
    }

    #[test]
    fn strongly_convex_simplex_uses_projection() {
        let f = entropy_fn(3).with_offset(vec![], 2.0).unwrap();
        let (v, g) = f.value_grad(&[1.0, 0.0, 0.0], 0.0).unwrap();
        // s = proj((1/2, 0, 0)) = (2/3, 1/6, 1/6); value = 2/3 − ‖s‖² = 1/6
        for (gi, e) in g.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((gi - e).abs() < 1e-12);
        }
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
    }
}
