//! Dense formulation of a small planning problem with one variable per
//! aperture, for methods that need full gradients and projections.

use std::sync::Arc;

use super::aperture::{all_openings, Shape};
use super::plan::VoxelPenalty;
use super::problem::{Atom, ImrtProblem, PlanPoint};
use crate::error::{CoexError, Result};
use crate::linalg::{self, Matrix};
use crate::lmo::FeasibleSet;
use crate::problem::{Func, ProblemSpec, SmoothFunction};
use crate::smoothing::{DualSet, MaxFormFunction};
use crate::solver::CgProblem;

/// Penalty objective composed with a sparse dose map.
#[derive(Debug)]
pub struct DoseObjective {
    pub dose_map: Matrix,
    pub penalty: VoxelPenalty,
    lipschitz: f64,
}

impl DoseObjective {
    pub fn new(dose_map: Matrix, penalty: VoxelPenalty) -> Self {
        let lipschitz = penalty.curvature() * linalg::op_norm(&dose_map).powi(2);
        Self {
            dose_map,
            penalty,
            lipschitz,
        }
    }
}

impl SmoothFunction for DoseObjective {
    fn dim(&self) -> usize {
        self.dose_map.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.penalty.value(&self.dose_map.apply(x))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (_, gz) = self.penalty.value_grad(&self.dose_map.apply(x));
        out.iter_mut().for_each(|v| *v = 0.0);
        self.dose_map.apply_t_add(&gz, 1.0, out);
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// The dense problem and the shape behind each intensity variable.
///
/// Variables are the nonempty shapes (angle-major) followed by the thresholds.
pub struct ExplicitProblem {
    pub spec: ProblemSpec,
    pub shapes: Vec<Shape>,
}

impl ExplicitProblem {
    /// Map a dense point back to `(shape, intensity)` pairs with positive intensity.
    pub fn atoms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (&'a Shape, f64)> + 'a {
        self.shapes
            .iter()
            .zip(x)
            .filter(|(_, y)| **y > 0.0)
            .map(|(s, y)| (s, *y))
    }

    /// The plan represented by a dense point of this problem.
    pub fn plan_point(&self, p: &ImrtProblem, x: &[f64]) -> PlanPoint {
        let atoms = self
            .atoms(x)
            .map(|(s, w)| {
                (
                    s.id(),
                    Atom {
                        shape: s.clone(),
                        weight: w,
                    },
                )
            })
            .collect();
        let mut plan = PlanPoint {
            atoms,
            tau: x[self.shapes.len()..].to_vec(),
            dose: Vec::new(),
        };
        plan.dose = p.recompute_dose(&plan);
        plan
    }
}

/// Enumerate every aperture of `p` and build its dense form.
///
/// Refuses when the variable count exceeds `dim_cap`.
pub fn explicit_problem(p: &ImrtProblem, dim_cap: usize) -> Result<ExplicitProblem> {
    let geom = &p.instance().spec.geometry;
    let per_angle = geom.apertures_per_angle();
    let total = per_angle.saturating_mul(geom.angles_deg.len() as u128);
    let n_c = p.instance().spec.criteria.len();
    if total.saturating_add(n_c as u128) > dim_cap as u128 {
        return Err(CoexError::Refused {
            dim: total + n_c as u128,
            cap: dim_cap as u128,
        });
    }
    let openings: Vec<_> = all_openings(geom.rows, geom.cols, geom.leaf_model)
        .into_iter()
        .filter(|o| o.iter().any(Option::is_some))
        .collect();
    let shapes: Vec<Shape> = (0..geom.angles_deg.len())
        .flat_map(|a| {
            openings.iter().map(move |rows| Shape {
                angle: a as u32,
                rows: rows.clone(),
            })
        })
        .collect();
    let n_y = shapes.len();
    let n = n_y + n_c;
    let n_vox = p.instance().dose.n_voxels();

    let columns: Vec<Vec<(u32, f64)>> = shapes.iter().map(|s| p.shape_dose(s)).collect();
    let mut entries = Vec::new();
    for (c, col) in columns.iter().enumerate() {
        entries.extend(col.iter().map(|(v, d)| (*v as usize, c, *d)));
    }
    let dose_map = Matrix::from_triplets(n_vox, n, &entries)?;
    let objective = Func::Custom(Arc::new(DoseObjective::new(dose_map, p.penalty().clone())));

    let mut constraints = Vec::new();
    for i in 0..n_c {
        let local = p.cvar_function(i);
        let voxels = p.cvar_voxels(i);
        let mut row_of = vec![usize::MAX; n_vox];
        for (r, v) in voxels.iter().enumerate() {
            row_of[*v as usize] = r;
        }
        // Local map columns: voxel coefficient at r, threshold coefficient at N_S.
        let dose_coef = local.map.get(0, 0);
        let tau_coef = local.map.get(0, voxels.len());
        let mut ent = Vec::new();
        for (c, col) in columns.iter().enumerate() {
            for (v, d) in col {
                let r = row_of[*v as usize];
                if r != usize::MAX {
                    ent.push((r, c, dose_coef * d));
                }
            }
        }
        for r in 0..voxels.len() {
            ent.push((r, n_y + i, tau_coef));
        }
        let mut linear = vec![0.0; n];
        linear[n_y + i] = local.linear[voxels.len()];
        let f = MaxFormFunction::new(
            Matrix::from_triplets(voxels.len(), n, &ent)?,
            DualSet::UnitBox { size: voxels.len() },
        )?
        .with_affine(linear, local.constant)?
        .with_map_norm(local.op_norm());
        constraints.push(Func::MaxForm(f));
    }
    if let Some(phi) = p.phi() {
        let per = openings.len();
        let mut ent = Vec::with_capacity(n_y);
        for a in 0..geom.angles_deg.len() {
            for t in 0..per {
                ent.push((a * (per + 1) + t, a * per + t, 1.0 / phi));
            }
        }
        let rows = geom.angles_deg.len() * (per + 1);
        let f = MaxFormFunction::new(
            Matrix::from_triplets(rows, n, &ent)?,
            DualSet::SimplexProduct {
                sizes: vec![per + 1; geom.angles_deg.len()],
            },
        )?
        .with_affine(Vec::new(), -1.0)?
        .with_map_norm(1.0 / phi);
        constraints.push(Func::MaxForm(f));
    }
    let (lo, hi) = p.tau_bounds();
    let spec = ProblemSpec {
        objective,
        affine: None,
        constraints,
        set: FeasibleSet::Product {
            parts: vec![
                FeasibleSet::CappedSimplex { dim: n_y },
                FeasibleSet::Box {
                    lower: lo.to_vec(),
                    upper: hi.to_vec(),
                },
            ],
        },
        overrides: p.overrides.clone(),
    };
    spec.validate()?;
    debug_assert_eq!(spec.n_constraints(), p.n_constraints());
    Ok(ExplicitProblem { spec, shapes })
}
