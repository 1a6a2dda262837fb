//! Problem model: objective, affine equalities, functional constraints and the feasible set.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, CoexError, Result};
use crate::linalg::{self, Matrix};
use crate::lmo::{FeasibleSet, Vertex};
use crate::smoothing::{MaxFormFunction, SmoothingInfo};
use crate::solver::{CgProblem, PointReport, ProblemConstants};

/// A convex function with Lipschitz gradient supplied by user code.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Gradient Lipschitz constant, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
    /// Bound on the gradient norm over the feasible set, if known.
    fn grad_bound(&self) -> Option<f64> {
        None
    }
}

/// `½ xᵀQx + ⟨c, x⟩ + c0` with symmetric positive semidefinite `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    #[serde(default)]
    pub hessian: Option<Matrix>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub grad_bound: Option<f64>,
}

impl Quadratic {
    pub fn new(hessian: Option<Matrix>, linear: Vec<f64>, constant: f64) -> Result<Self> {
        if let Some(h) = &hessian {
            check_dim("hessian rows", linear.len(), h.rows())?;
            check_dim("hessian cols", linear.len(), h.cols())?;
        }
        Ok(Self {
            hessian,
            linear,
            constant,
            lipschitz: None,
            grad_bound: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = self.linear.clone();
        let mut v = self.constant + linalg::dot(&self.linear, x);
        if let Some(h) = &self.hessian {
            let hx = h.apply(x);
            v += 0.5 * linalg::dot(&hx, x);
            linalg::axpy(1.0, &hx, &mut g);
        }
        (v, g)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
            .unwrap_or_else(|| self.hessian.as_ref().map_or(0.0, linalg::op_norm))
    }

    /// Largest gradient norm over the given points (exact over a polytope when
    /// the points are its vertices).
    pub fn max_grad_norm_at(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .map(|p| linalg::norm(&self.value_grad(p).1))
            .fold(0.0, f64::max)
    }
}

/// Objective or constraint function.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Func {
    Quadratic(Quadratic),
    MaxForm(MaxFormFunction),
    /// User code; not serializable.
    #[serde(skip)]
    Custom(Arc<dyn SmoothFunction>),
}

impl fmt::Debug for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Func::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            Func::MaxForm(m) => f.debug_tuple("MaxForm").field(m).finish(),
            Func::Custom(c) => f.debug_tuple("Custom").field(c).finish(),
        }
    }
}

impl Func {
    pub fn dim(&self) -> usize {
        match self {
            Func::Quadratic(q) => q.dim(),
            Func::MaxForm(m) => m.dim(),
            Func::Custom(c) => c.dim(),
        }
    }

    /// Value and gradient; `eta` is used only by max-form functions.
    pub fn value_grad(&self, x: &[f64], eta: f64) -> Result<(f64, Vec<f64>)> {
        check_dim("function argument", self.dim(), x.len())?;
        match self {
            Func::Quadratic(q) => Ok(q.value_grad(x)),
            Func::MaxForm(m) => m.value_grad(x, eta),
            Func::Custom(c) => {
                let mut g = vec![0.0; x.len()];
                c.gradient(x, &mut g);
                Ok((c.value(x), g))
            }
        }
    }

    /// Value and gradient, with a subgradient for unsmoothed max-form functions.
    pub fn value_subgrad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Func::MaxForm(m) => m.subgradient(x),
            _ => self.value_grad(x, 0.0),
        }
    }

    pub fn exact_value(&self, x: &[f64]) -> Result<f64> {
        check_dim("function argument", self.dim(), x.len())?;
        match self {
            Func::Quadratic(q) => Ok(q.value_grad(x).0),
            Func::MaxForm(m) => m.exact_value(x),
            Func::Custom(c) => Ok(c.value(x)),
        }
    }

    pub fn smoothing_info(&self) -> Option<SmoothingInfo> {
        match self {
            Func::MaxForm(m) => Some(m.info()),
            _ => None,
        }
    }

    /// Gradient Lipschitz constant at smoothing level `eta`.
    pub fn lipschitz(&self, eta: f64) -> Option<f64> {
        match self {
            Func::Quadratic(q) => Some(q.lipschitz_constant()),
            Func::MaxForm(m) => Some(m.lipschitz(eta)),
            Func::Custom(c) => c.lipschitz(),
        }
    }

    pub fn grad_bound(&self) -> Option<f64> {
        match self {
            Func::Quadratic(q) => q.grad_bound,
            Func::MaxForm(m) => Some(m.grad_bound()),
            Func::Custom(c) => c.grad_bound(),
        }
    }
}

/// `Ax = b`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraints {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
}

/// User overrides for problem constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    #[serde(default)]
    pub diameter: Option<f64>,
    #[serde(default)]
    pub affine_norm: Option<f64>,
    #[serde(default)]
    pub lipschitz_f: Option<f64>,
    #[serde(default)]
    pub grad_bounds: Option<Vec<f64>>,
}

impl ConstantOverrides {
    /// Apply `KEY=VALUE` (keys: `diameter`, `affine_norm`, `lipschitz_f`, `grad_bound.<i>`).
    pub fn set(&mut self, key: &str, value: f64, n_constraints: usize) -> Result<()> {
        match key {
            "diameter" => self.diameter = Some(value),
            "affine_norm" => self.affine_norm = Some(value),
            "lipschitz_f" => self.lipschitz_f = Some(value),
            _ => {
                let Some(idx) = key.strip_prefix("grad_bound.") else {
                    return invalid(format!("unknown constant '{key}'"));
                };
                let i: usize = idx
                    .parse()
                    .map_err(|_| CoexError::Invalid(format!("bad constant index in '{key}'")))?;
                if i >= n_constraints {
                    return invalid(format!("constraint index {i} out of range"));
                }
                let gb = self
                    .grad_bounds
                    .get_or_insert_with(|| vec![f64::NAN; n_constraints]);
                gb.resize(n_constraints, f64::NAN);
                gb[i] = value;
            }
        }
        Ok(())
    }

    /// Override for constraint `i`, if one was set.
    pub fn grad_bound(&self, i: usize) -> Option<f64> {
        self.grad_bounds
            .as_ref()
            .and_then(|gb| gb.get(i).copied())
            .filter(|v| !v.is_nan())
    }
}

/// `min f(x) s.t. Ax = b, h_i(x) ≤ 0, x ∈ X`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub objective: Func,
    #[serde(default)]
    pub affine: Option<AffineConstraints>,
    #[serde(default)]
    pub constraints: Vec<Func>,
    pub set: FeasibleSet,
    #[serde(default)]
    pub overrides: ConstantOverrides,
}

/// `‖g‖₂ + ‖[h]₊‖₂`
pub fn infeasibility(g: &[f64], h: &[f64]) -> f64 {
    linalg::norm(g) + linalg::positive_part_norm(h)
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.set.validate()?;
        let n = self.dim();
        check_dim("objective dimension", n, self.objective.dim())?;
        if let Some(a) = &self.affine {
            check_dim("affine matrix columns", n, a.matrix.cols())?;
            check_dim("affine right-hand side", a.matrix.rows(), a.rhs.len())?;
        }
        for (i, h) in self.constraints.iter().enumerate() {
            check_dim(&format!("constraint {i} dimension"), n, h.dim())?;
        }
        if let Some(gb) = &self.overrides.grad_bounds {
            check_dim("gradient bound overrides", self.constraints.len(), gb.len())?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn affine_residual_at(&self, x: &[f64]) -> Vec<f64> {
        match &self.affine {
            Some(a) => {
                let mut r = a.matrix.apply(x);
                for (ri, bi) in r.iter_mut().zip(&a.rhs) {
                    *ri -= bi;
                }
                r
            }
            None => Vec::new(),
        }
    }

    pub fn affine_norm(&self) -> f64 {
        self.overrides.affine_norm.unwrap_or_else(|| {
            self.affine
                .as_ref()
                .map_or(0.0, |a| linalg::op_norm(&a.matrix))
        })
    }

    /// Gradient Lipschitz constant of the objective at smoothing level `eta`.
    pub fn lipschitz_f(&self, eta: f64) -> Option<f64> {
        self.overrides
            .lipschitz_f
            .or_else(|| self.objective.lipschitz(eta))
    }

    /// Exact (unsmoothed) objective, residuals and infeasibility.
    pub fn report(&self, x: &[f64]) -> Result<PointReport> {
        let objective = self.objective.exact_value(x)?;
        let affine_residual = self.affine_residual_at(x);
        let constraints = self
            .constraints
            .iter()
            .map(|h| h.exact_value(x))
            .collect::<Result<Vec<_>>>()?;
        let infeasibility = infeasibility(&affine_residual, &constraints);
        Ok(PointReport {
            objective,
            affine_residual,
            constraints,
            infeasibility,
        })
    }

    /// Linearization with subgradients of the unsmoothed functions.
    pub fn linearize_subgradient(&self, x: &[f64]) -> Result<DenseModel> {
        self.linearize_with(x, |_, f, x| f.value_subgrad(x))
    }

    /// `eval(i, f, x)` gives value and gradient of the objective (`i = 0`) or constraint `i − 1`.
    fn linearize_with<F>(&self, x: &[f64], eval: F) -> Result<DenseModel>
    where
        F: Fn(usize, &Func, &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let (_, grad_f) = eval(0, &self.objective, x)?;
        let mut h = Vec::with_capacity(self.constraints.len());
        let mut grads_h = Vec::with_capacity(self.constraints.len());
        let mut grad_dot_x = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            let (v, g) = eval(i + 1, c, x)?;
            grad_dot_x.push(linalg::dot(&g, x));
            h.push(v);
            grads_h.push(g);
        }
        Ok(DenseModel {
            grad_f,
            h,
            grads_h,
            grad_dot_x,
        })
    }

    /// Convenience: `lmo(0)` on the feasible set.
    /// Largest gradient norm of `q` over the feasible set: exact over the
    /// vertices when they are few (the norm is convex), otherwise
    /// `‖∇q(x₀)‖ + L·D` from the start vertex.
    fn quadratic_grad_bound(&self, q: &Quadratic) -> f64 {
        match self.set.vertices(VERTEX_CAP) {
            Some(vs) => q.max_grad_norm_at(&vs),
            None => {
                let x0 = self.start_vertex().point;
                linalg::norm(&q.value_grad(&x0).1) + q.lipschitz_constant() * self.set.diameter()
            }
        }
    }

    pub fn start_vertex(&self) -> Vertex {
        self.set.lmo(&vec![0.0; self.dim()])
    }
}

/// Iterate on a dense problem: the point and its decomposition into vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensePoint {
    pub x: Vec<f64>,
    pub atoms: BTreeMap<u64, f64>,
}

/// Largest vertex count enumerated for exact gradient bounds.
const VERTEX_CAP: usize = 4096;

/// Weights below this are dropped from the active set.
pub const ATOM_PRUNE: f64 = 1e-15;

/// Linearization of a dense problem at a point.
#[derive(Clone, Debug)]
pub struct DenseModel {
    pub grad_f: Vec<f64>,
    pub h: Vec<f64>,
    pub grads_h: Vec<Vec<f64>>,
    grad_dot_x: Vec<f64>,
}

impl DenseModel {
    /// `h_i(x) + ⟨∇h_i(x), v − x⟩`
    pub fn constraint_linearization(&self, v: &[f64]) -> Vec<f64> {
        self.h
            .iter()
            .zip(&self.grads_h)
            .zip(&self.grad_dot_x)
            .map(|((hi, gi), gx)| hi + linalg::dot(gi, v) - gx)
            .collect()
    }
}

impl CgProblem for ProblemSpec {
    type Point = DensePoint;
    type Vertex = Vertex;
    type Model = DenseModel;

    fn n_affine(&self) -> usize {
        self.affine.as_ref().map_or(0, |a| a.rhs.len())
    }

    fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn constants(&self) -> Result<ProblemConstants> {
        self.validate()?;
        let grad_bounds = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, h)| {
                self.overrides
                    .grad_bound(i)
                    .or_else(|| h.grad_bound())
                    .or_else(|| match h {
                        Func::Quadratic(q) => Some(self.quadratic_grad_bound(q)),
                        _ => None,
                    })
                    .ok_or_else(|| {
                        CoexError::Invalid(format!(
                            "constraint {i} needs a gradient bound (grad_bound.{i})"
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        if grad_bounds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("gradient bounds must be finite and nonnegative");
        }
        let mut smoothing = vec![self.objective.smoothing_info()];
        smoothing.extend(self.constraints.iter().map(Func::smoothing_info));
        Ok(ProblemConstants {
            diameter: self
                .overrides
                .diameter
                .unwrap_or_else(|| self.set.diameter()),
            affine_norm: self.affine_norm(),
            grad_bounds,
            smoothing,
        })
    }

    fn initial_vertex(&self) -> Vertex {
        self.start_vertex()
    }

    fn vertex_point(&self, v: &Vertex) -> DensePoint {
        DensePoint {
            x: v.point.clone(),
            atoms: BTreeMap::from([(v.id, 1.0)]),
        }
    }

    fn vertex_id(&self, v: &Vertex) -> u64 {
        v.id
    }

    fn affine_residual(&self, v: &Vertex) -> Vec<f64> {
        self.affine_residual_at(&v.point)
    }

    fn blend(&self, p: &mut DensePoint, v: &Vertex, alpha: f64) {
        for (xi, vi) in p.x.iter_mut().zip(&v.point) {
            *xi = (1.0 - alpha) * *xi + alpha * vi;
        }
        p.atoms.values_mut().for_each(|w| *w *= 1.0 - alpha);
        *p.atoms.entry(v.id).or_insert(0.0) += alpha;
        p.atoms.retain(|_, w| *w >= ATOM_PRUNE);
    }

    fn linearize(&self, p: &DensePoint, eta: &[f64]) -> Result<DenseModel> {
        self.linearize_with(&p.x, |i, f, x| f.value_grad(x, eta[i]))
    }

    fn model_constraints(&self, m: &DenseModel, v: &Vertex) -> Vec<f64> {
        m.constraint_linearization(&v.point)
    }

    fn model_argmin(&self, m: &DenseModel, q: &[f64], r: &[f64]) -> Vertex {
        let mut c = m.grad_f.clone();
        if let Some(a) = &self.affine {
            if q.iter().any(|v| *v != 0.0) {
                a.matrix.apply_t_add(q, 1.0, &mut c);
            }
        }
        for (ri, gi) in r.iter().zip(&m.grads_h) {
            if *ri != 0.0 {
                linalg::axpy(*ri, gi, &mut c);
            }
        }
        self.set.lmo(&c)
    }

    fn evaluate(&self, p: &DensePoint) -> Result<PointReport> {
        self.report(&p.x)
    }
}
