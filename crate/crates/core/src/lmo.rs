//! Compact convex sets with linear minimization oracles and Euclidean projections.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Feasible set descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    /// `{x ≥ 0, Σx = 1}`
    Simplex {
        dim: usize,
    },
    /// `{x ≥ 0, Σx ≤ 1}`
    CappedSimplex {
        dim: usize,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Product {
        parts: Vec<FeasibleSet>,
    },
}

/// An extreme point returned by an LMO, with a stable identifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub id: u64,
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Simplex { dim } | FeasibleSet::CappedSimplex { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Product { parts } => parts.iter().map(FeasibleSet::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Simplex { dim } | FeasibleSet::CappedSimplex { dim } => {
                if *dim == 0 {
                    return invalid("empty simplex");
                }
            }
            FeasibleSet::Box { lower, upper } => {
                check_dim("box bounds", lower.len(), upper.len())?;
                if lower.is_empty() {
                    return invalid("empty box");
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite() && l <= u) {
                        return invalid(format!("box bounds [{l}, {u}] are not a finite interval"));
                    }
                }
            }
            FeasibleSet::Product { parts } => {
                if parts.is_empty() {
                    return invalid("empty product set");
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Simplex { dim } => {
                if *dim >= 2 {
                    2f64.sqrt()
                } else {
                    0.0
                }
            }
            FeasibleSet::CappedSimplex { dim } => {
                if *dim >= 2 {
                    2f64.sqrt()
                } else {
                    1.0
                }
            }
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l).powi(2))
                .sum::<f64>()
                .sqrt(),
            FeasibleSet::Product { parts } => parts
                .iter()
                .map(|p| p.diameter().powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Simplex { .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            FeasibleSet::CappedSimplex { .. } => {
                x.iter().all(|v| *v >= -tol) && x.iter().sum::<f64>() <= 1.0 + tol
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Product { parts } => {
                let mut start = 0;
                parts.iter().all(|p| {
                    let d = p.dim();
                    let ok = p.contains(&x[start..start + d], tol);
                    start += d;
                    ok
                })
            }
        }
    }

    /// Every extreme point, or `None` if there are more than `cap`.
    pub fn vertices(&self, cap: usize) -> Option<Vec<Vec<f64>>> {
        let unit = |n: usize, i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        match self {
            FeasibleSet::Simplex { dim } => {
                (*dim <= cap).then(|| (0..*dim).map(|i| unit(*dim, i)).collect())
            }
            FeasibleSet::CappedSimplex { dim } => (*dim < cap).then(|| {
                std::iter::once(vec![0.0; *dim])
                    .chain((0..*dim).map(|i| unit(*dim, i)))
                    .collect()
            }),
            FeasibleSet::Box { lower, upper } => {
                let n = lower.len();
                if n >= usize::BITS as usize || (1usize << n) > cap {
                    return None;
                }
                Some(
                    (0..1usize << n)
                        .map(|m| {
                            (0..n)
                                .map(|i| if m >> i & 1 == 1 { upper[i] } else { lower[i] })
                                .collect()
                        })
                        .collect(),
                )
            }
            FeasibleSet::Product { parts } => {
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for p in parts {
                    let vs = p.vertices(cap)?;
                    if out.len().checked_mul(vs.len())? > cap {
                        return None;
                    }
                    out = out
                        .iter()
                        .flat_map(|head| vs.iter().map(move |v| [head.as_slice(), v].concat()))
                        .collect();
                }
                Some(out)
            }
        }
    }

    /// `argmin_{x∈X} ⟨c, x⟩` with deterministic tie-breaking (lowest index, lower bound).
    pub fn lmo(&self, c: &[f64]) -> Vertex {
        debug_assert_eq!(c.len(), self.dim());
        match self {
            FeasibleSet::Simplex { dim } => {
                let j = argmin(c);
                let mut point = vec![0.0; *dim];
                point[j] = 1.0;
                Vertex {
                    point,
                    id: j as u64,
                }
            }
            FeasibleSet::CappedSimplex { dim } => {
                let j = argmin(c);
                let mut point = vec![0.0; *dim];
                if c[j] < 0.0 {
                    point[j] = 1.0;
                    Vertex {
                        point,
                        id: j as u64 + 1,
                    }
                } else {
                    Vertex { point, id: 0 }
                }
            }
            FeasibleSet::Box { lower, upper } => {
                let mut h = DefaultHasher::new();
                let point: Vec<f64> = c
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(ci, (l, u))| {
                        let hi = *ci < 0.0;
                        hi.hash(&mut h);
                        if hi {
                            *u
                        } else {
                            *l
                        }
                    })
                    .collect();
                Vertex {
                    point,
                    id: h.finish(),
                }
            }
            FeasibleSet::Product { parts } => {
                let mut h = DefaultHasher::new();
                let mut point = Vec::with_capacity(c.len());
                let mut start = 0;
                for p in parts {
                    let d = p.dim();
                    let v = p.lmo(&c[start..start + d]);
                    v.id.hash(&mut h);
                    point.extend_from_slice(&v.point);
                    start += d;
                }
                Vertex {
                    point,
                    id: h.finish(),
                }
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::Simplex { .. } => project_simplex(x),
            FeasibleSet::CappedSimplex { .. } => {
                let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
                if clipped.iter().sum::<f64>() <= 1.0 {
                    clipped
                } else {
                    project_simplex(x)
                }
            }
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            FeasibleSet::Product { parts } => {
                let mut out = Vec::with_capacity(x.len());
                let mut start = 0;
                for p in parts {
                    let d = p.dim();
                    out.extend(p.project(&x[start..start + d]));
                    start += d;
                }
                out
            }
        }
    }
}

fn argmin(c: &[f64]) -> usize {
    let mut j = 0;
    for (i, v) in c.iter().enumerate().skip(1) {
        if *v < c[j] {
            j = i;
        }
    }
    j
}

/// Projection onto the probability simplex by sorting and thresholding.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
