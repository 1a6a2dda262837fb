//! Shared fixtures with independently known solutions.
#![allow(dead_code)]

use coex::linalg::Matrix;
use coex::lmo::FeasibleSet;
use coex::problem::{AffineConstraints, Func, ProblemSpec, Quadratic};
use coex::smoothing::{DualSet, MaxFormFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A strongly convex QP over the simplex whose solution and multipliers are
/// fixed in advance and the data built to satisfy the KKT system.
pub struct ReferenceQp {
    pub spec: ProblemSpec,
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub y_star: Vec<f64>,
    pub z_star: Vec<f64>,
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
}

/// `½‖x − center‖² + constant` as a quadratic.
fn ball(center: &[f64], constant: f64) -> Quadratic {
    let n = center.len();
    let c0 = 0.5 * center.iter().map(|v| v * v).sum::<f64>() + constant;
    Quadratic::new(
        Some(Matrix::identity(n)),
        center.iter().map(|v| -v).collect(),
        c0,
    )
    .unwrap()
}

/// 20 variables, one equality `⟨a, x⟩ = b` and two active ball constraints.
pub fn reference_qp() -> ReferenceQp {
    let n = 20;
    let support = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut x_star: Vec<f64> = (0..n)
        .map(|j| {
            if j < support {
                rng.gen_range(0.5..1.5)
            } else {
                0.0
            }
        })
        .collect();
    let s: f64 = x_star.iter().sum();
    x_star.iter_mut().for_each(|v| *v /= s);

    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: f64 = a.iter().zip(&x_star).map(|(p, q)| p * q).sum();
    let centers: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..0.3)).collect())
        .collect();
    let radii: Vec<f64> = centers.iter().map(|d| half_sq_dist(&x_star, d)).collect();
    let y_star = vec![0.4];
    let z_star = vec![0.5, 0.3];
    let nu = 0.1;
    // Multipliers of x ≥ 0, positive off the support.
    let mu: Vec<f64> = (0..n)
        .map(|j| {
            if j < support {
                0.0
            } else {
                rng.gen_range(0.2..0.6)
            }
        })
        .collect();
    // Stationarity: (x* − c) + y a + Σ z_i (x* − d_i) + ν1 − μ = 0.
    let c: Vec<f64> = (0..n)
        .map(|j| {
            x_star[j]
                + y_star[0] * a[j]
                + z_star[0] * (x_star[j] - centers[0][j])
                + z_star[1] * (x_star[j] - centers[1][j])
                + nu
                - mu[j]
        })
        .collect();
    let f_star = half_sq_dist(&x_star, &c);
    let spec = ProblemSpec {
        objective: Func::Quadratic(ball(&c, 0.0)),
        affine: Some(AffineConstraints {
            matrix: Matrix::from_rows(&[a]).unwrap(),
            rhs: vec![b],
        }),
        constraints: centers
            .iter()
            .zip(&radii)
            .map(|(d, r)| Func::Quadratic(ball(d, -r)))
            .collect(),
        set: FeasibleSet::Simplex { dim: n },
        overrides: Default::default(),
    };
    ReferenceQp {
        spec,
        x_star,
        f_star,
        y_star,
        z_star,
    }
}

/// `min ½‖x − c‖²` over the simplex subject to `Σ_j max(0, x_j − u) ≤ 0`,
/// with the hinge sum as a max-form function.
pub struct HingeToy {
    pub spec: ProblemSpec,
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

/// Projection of `c` onto `{0 ≤ x ≤ u, Σx = 1}` by bisection on the shift.
pub fn capped_projection(c: &[f64], u: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { c.iter().map(|v| (v - nu).clamp(0.0, u)).collect() };
    let (mut lo, mut hi) = (
        c.iter().cloned().fold(f64::INFINITY, f64::min) - u - 1.0,
        c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0,
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn hinge_toy(seed: u64) -> HingeToy {
    let n = 6;
    let u = 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.3)).collect();
    // One dominant coordinate makes the cap bind.
    c[rng.gen_range(0..n)] += 0.8;
    let x_star = capped_projection(&c, u);
    let f_star = half_sq_dist(&x_star, &c);
    let hinge = MaxFormFunction::new(Matrix::identity(n), DualSet::UnitBox { size: n })
        .unwrap()
        .with_offset(vec![u; n], 0.0)
        .unwrap();
    let spec = ProblemSpec {
        objective: Func::Quadratic(ball(&c, 0.0)),
        affine: None,
        constraints: vec![Func::MaxForm(hinge)],
        set: FeasibleSet::Simplex { dim: n },
        overrides: Default::default(),
    };
    HingeToy {
        spec,
        x_star,
        f_star,
    }
}
