//! The treatment-planning problem over the implicit aperture set.
//!
//! Variables are intensities of apertures (a capped simplex over every shape
//! of every angle) and one scaled threshold per CVaR criterion. Only shapes
//! with positive intensity are stored; the oracle builds new ones row by row.
//! All constraints are divided by their right-hand side (`b` or `Φ`).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aperture::{best_openings, shape_score, Shape, ShapeRanking};
use super::instance::ImrtInstance;
use super::plan::{
    count_selected_angles, cvar_max_form, group_smoothed, group_sparsity_value, VoxelPenalty,
};
use crate::error::{invalid, CoexError, Result};
use crate::linalg;
use crate::problem::{ConstantOverrides, ATOM_PRUNE};
use crate::smoothing::{MaxFormFunction, SmoothingInfo};
use crate::solver::{CgProblem, PointReport, ProblemConstants};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub shape: Shape,
    pub weight: f64,
}

/// A plan: weighted apertures, scaled thresholds and the resulting voxel dose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanPoint {
    /// Keyed by [`Shape::id`].
    pub atoms: BTreeMap<u64, Atom>,
    pub tau: Vec<f64>,
    /// Cached `z = Σ R·D̂·y`.
    pub dose: Vec<f64>,
}

impl PlanPoint {
    pub fn total_intensity(&self) -> f64 {
        self.atoms.values().map(|a| a.weight).sum()
    }

    pub fn selected_angles(&self, floor: f64) -> usize {
        count_selected_angles(
            self.atoms.values().map(|a| (a.shape.angle, a.weight)),
            floor,
        )
    }

    /// Active weights grouped by angle, in id order within each angle.
    pub fn weights_by_angle(&self) -> BTreeMap<u32, Vec<(u64, f64)>> {
        let mut g: BTreeMap<u32, Vec<(u64, f64)>> = BTreeMap::new();
        for (id, a) in &self.atoms {
            g.entry(a.shape.angle).or_default().push((*id, a.weight));
        }
        g
    }
}

/// One aperture at full intensity (or none) with extreme thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanVertex {
    pub shape: Option<Shape>,
    pub tau: Vec<f64>,
    /// Sparse voxel dose, voxels ascending.
    pub dose: Vec<(u32, f64)>,
    id: u64,
}

struct CvarTerm {
    voxels: Vec<u32>,
    func: MaxFormFunction,
}

/// Linearization at a plan.
pub struct PlanModel {
    grad_dose: Vec<f64>,
    h: Vec<f64>,
    /// Per criterion: gradient in `(z_S, τ)`.
    cvar_grads: Vec<Vec<f64>>,
    grad_dot_x: Vec<f64>,
    group: Option<GroupModel>,
}

struct GroupModel {
    /// Active shapes per angle with their price `s_t/Φ`.
    active: BTreeMap<u32, Vec<(Shape, u64, f64)>>,
    /// Price of a shape that is not yet active, per angle.
    new_price: Vec<f64>,
}

impl GroupModel {
    fn price(&self, shape: &Shape, id: u64) -> f64 {
        self.active
            .get(&shape.angle)
            .and_then(|v| v.iter().find(|t| t.1 == id))
            .map_or(self.new_price[shape.angle as usize], |t| t.2)
    }
}

pub struct ImrtProblem {
    instance: ImrtInstance,
    penalty: VoxelPenalty,
    structures: Vec<Vec<u32>>,
    cvars: Vec<CvarTerm>,
    /// For each criterion, the local index of each voxel (or `u32::MAX`).
    local_index: Vec<Vec<u32>>,
    tau_lo: Vec<f64>,
    tau_hi: Vec<f64>,
    /// Largest `R·‖full-open dose‖₂` over angles.
    max_open_norm: f64,
    pub overrides: ConstantOverrides,
}

impl ImrtProblem {
    pub fn new(instance: ImrtInstance) -> Result<Self> {
        let spec = &instance.spec;
        spec.validate()?;
        instance.dose.check_against(&spec.geometry)?;
        let geom = &spec.geometry;
        let structures = geom.structure_voxels()?;
        let rate = geom.dose_rate;
        let opens: Vec<Vec<f64>> = (0..geom.angles_deg.len())
            .into_par_iter()
            .map(|a| instance.dose.full_open(geom, a))
            .collect();
        let max_open_norm = rate * opens.iter().map(|z| linalg::norm(z)).fold(0.0, f64::max);
        let n_vox = geom.voxel_count();
        let mut cvars = Vec::new();
        let mut local_index = Vec::new();
        let (mut tau_lo, mut tau_hi) = (Vec::new(), Vec::new());
        for c in &spec.criteria {
            let s = geom.structure_index(&c.structure).ok_or_else(|| {
                CoexError::Invalid(format!("unknown structure '{}'", c.structure))
            })?;
            let voxels = structures[s].clone();
            let n_s = voxels.len() as f64;
            // Column-norm bound on the dose part plus the threshold column.
            let max_col = opens
                .iter()
                .map(|z| {
                    voxels
                        .iter()
                        .map(|v| z[*v as usize].powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max);
            let norm =
                rate * max_col / (c.dose * c.fraction * n_s) + 1.0 / (c.fraction * n_s.sqrt());
            let func =
                cvar_max_form(c.direction, voxels.len(), c.dose, c.fraction)?.with_map_norm(norm);
            let mut idx = vec![u32::MAX; n_vox];
            for (l, v) in voxels.iter().enumerate() {
                idx[*v as usize] = l as u32;
            }
            let [lo, hi] = c.scaled_tau_bounds();
            tau_lo.push(lo);
            tau_hi.push(hi);
            cvars.push(CvarTerm { voxels, func });
            local_index.push(idx);
        }
        Ok(Self {
            penalty: spec.penalty(),
            instance,
            structures,
            cvars,
            local_index,
            tau_lo,
            tau_hi,
            max_open_norm,
            overrides: ConstantOverrides::default(),
        })
    }

    pub fn instance(&self) -> &ImrtInstance {
        &self.instance
    }

    pub fn penalty(&self) -> &VoxelPenalty {
        &self.penalty
    }

    /// Voxels of each structure, in declaration order.
    pub fn structure_voxels(&self) -> &[Vec<u32>] {
        &self.structures
    }

    pub fn n_angles(&self) -> usize {
        self.instance.spec.geometry.angles_deg.len()
    }

    pub fn phi(&self) -> Option<f64> {
        self.instance.spec.phi
    }

    pub fn tau_bounds(&self) -> (&[f64], &[f64]) {
        (&self.tau_lo, &self.tau_hi)
    }

    /// Gradient Lipschitz bound of the objective in the aperture intensities.
    pub fn objective_lipschitz(&self) -> f64 {
        self.penalty.curvature() * self.max_open_norm.powi(2)
    }

    /// Max-form of criterion `i` over `(z_S, τ)`.
    pub fn cvar_function(&self, i: usize) -> &MaxFormFunction {
        &self.cvars[i].func
    }

    pub fn cvar_voxels(&self, i: usize) -> &[u32] {
        &self.cvars[i].voxels
    }

    /// Sparse dose of one aperture at unit intensity, rate included.
    pub fn shape_dose(&self, shape: &Shape) -> Vec<(u32, f64)> {
        let geom = &self.instance.spec.geometry;
        let mut entries: Vec<(u32, f64)> = shape
            .open_cells(geom.cols)
            .flat_map(|c| {
                self.instance
                    .dose
                    .cell(shape.angle as usize, c)
                    .iter()
                    .copied()
            })
            .collect();
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (v, d) in entries {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += d,
                _ => out.push((v, d)),
            }
        }
        out.iter_mut().for_each(|e| e.1 *= geom.dose_rate);
        out
    }

    /// Voxel dose recomputed from the atoms.
    pub fn recompute_dose(&self, x: &PlanPoint) -> Vec<f64> {
        let mut z = vec![0.0; self.instance.dose.n_voxels()];
        for a in x.atoms.values() {
            for (v, d) in self.shape_dose(&a.shape) {
                z[v as usize] += a.weight * d;
            }
        }
        z
    }

    /// Beamlet scores `R·Σ_v D_{cv}·π_v` of every cell of angle `a`.
    pub fn beamlet_scores(&self, a: usize, price: &[f64]) -> Vec<f64> {
        let d = &self.instance.dose;
        let rate = self.instance.spec.geometry.dose_rate;
        (0..d.cells_per_angle())
            .map(|c| {
                rate * d
                    .cell(a, c)
                    .iter()
                    .fold(0.0, |s, (v, w)| s + w * price[*v as usize])
            })
            .collect()
    }

    /// Vertex for a shape (or the origin) with given thresholds.
    pub fn vertex(&self, shape: Option<Shape>, tau: Vec<f64>) -> PlanVertex {
        let dose = shape.as_ref().map_or_else(Vec::new, |s| self.shape_dose(s));
        let mut id = shape.as_ref().map_or(0, Shape::id);
        for (i, t) in tau.iter().enumerate() {
            if *t == self.tau_hi[i] && self.tau_hi[i] != self.tau_lo[i] {
                id = id.rotate_left(1) ^ (1 + i as u64);
            }
        }
        PlanVertex {
            shape,
            tau,
            dose,
            id,
        }
    }

    fn local_input(&self, i: usize, x: &PlanPoint) -> Vec<f64> {
        let mut loc: Vec<f64> = self.cvars[i]
            .voxels
            .iter()
            .map(|v| x.dose[*v as usize])
            .collect();
        loc.push(x.tau[i]);
        loc
    }

    /// Exact normalized constraint values: criteria first, then sparsity.
    pub fn constraint_values(&self, x: &PlanPoint) -> Result<Vec<f64>> {
        let mut h = Vec::with_capacity(self.n_constraints());
        for i in 0..self.cvars.len() {
            h.push(self.cvars[i].func.exact_value(&self.local_input(i, x))?);
        }
        if let Some(phi) = self.phi() {
            let groups: Vec<Vec<f64>> = x
                .weights_by_angle()
                .into_values()
                .map(|v| v.into_iter().map(|t| t.1).collect())
                .collect();
            h.push(group_sparsity_value(&groups, phi) / phi);
        }
        Ok(h)
    }

    /// Oracle for angle `a`: best `(ψ, shape)` with `ψ < 0`, if any.
    fn angle_candidate(
        &self,
        a: usize,
        price: &[f64],
        group: Option<(&GroupModel, f64)>,
    ) -> Option<(f64, Shape)> {
        let geom = &self.instance.spec.geometry;
        let (m, n, model) = (geom.rows, geom.cols, geom.leaf_model);
        let scores = self.beamlet_scores(a, price);
        let (open, s) = best_openings(&scores, m, n, model);
        let as_shape = |rows| Shape {
            angle: a as u32,
            rows,
        };
        let Some((gm, rg)) = group.filter(|(_, rg)| *rg != 0.0) else {
            let shape = as_shape(open);
            return (!shape.is_empty() && s < 0.0).then_some((s, shape));
        };
        let active: &[(Shape, u64, f64)] = gm.active.get(&(a as u32)).map_or(&[], |v| v.as_slice());
        let is_active = |id: u64| active.iter().any(|t| t.1 == id);
        let mut best: Option<(f64, Shape)> = None;
        let consider = |psi: f64, shape: Shape, best: &mut Option<(f64, Shape)>| {
            if psi < 0.0 && best.as_ref().is_none_or(|b| psi < b.0) {
                *best = Some((psi, shape));
            }
        };
        let first = as_shape(open);
        if !first.is_empty() {
            let new_shape = if !is_active(first.id()) {
                Some(first)
            } else {
                // The best shape is active; the best inactive one follows it in rank order.
                ShapeRanking::new(&scores, m, n, model)
                    .take(active.len() + 2)
                    .map(|(rows, _)| as_shape(rows))
                    .take_while(|sh| !sh.is_empty())
                    .find(|sh| !is_active(sh.id()))
            };
            if let Some(sh) = new_shape {
                let psi = shape_score(&scores, n, &sh.rows) + rg * gm.new_price[a];
                consider(psi, sh, &mut best);
            }
        }
        for (sh, _, p) in active {
            let psi = shape_score(&scores, n, &sh.rows) + rg * p;
            consider(psi, sh.clone(), &mut best);
        }
        best
    }
}

impl CgProblem for ImrtProblem {
    type Point = PlanPoint;
    type Vertex = PlanVertex;
    type Model = PlanModel;

    fn n_affine(&self) -> usize {
        0
    }

    fn n_constraints(&self) -> usize {
        self.cvars.len() + usize::from(self.phi().is_some())
    }

    fn constants(&self) -> Result<ProblemConstants> {
        let spread: f64 = self
            .tau_lo
            .iter()
            .zip(&self.tau_hi)
            .map(|(l, h)| (h - l).powi(2))
            .sum();
        let mut grad_bounds: Vec<f64> = self.cvars.iter().map(|c| c.func.grad_bound()).collect();
        let mut smoothing: Vec<Option<SmoothingInfo>> = vec![None];
        smoothing.extend(self.cvars.iter().map(|c| Some(c.func.info())));
        if let Some(phi) = self.phi() {
            let info = SmoothingInfo {
                map_norm: 1.0 / phi,
                prox_diameter: (self.n_angles() as f64 * std::f64::consts::LN_2).sqrt(),
                mu: 0.0,
            };
            grad_bounds.push(info.map_norm * (0.5f64.sqrt() + 2f64.sqrt() * info.prox_diameter));
            smoothing.push(Some(info));
        }
        for (i, gb) in grad_bounds.iter_mut().enumerate() {
            if let Some(v) = self.overrides.grad_bound(i) {
                *gb = v;
            }
        }
        if grad_bounds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("gradient bounds must be finite and nonnegative");
        }
        Ok(ProblemConstants {
            diameter: self.overrides.diameter.unwrap_or((2.0 + spread).sqrt()),
            affine_norm: 0.0,
            grad_bounds,
            smoothing,
        })
    }

    fn initial_vertex(&self) -> PlanVertex {
        self.vertex(None, self.tau_lo.clone())
    }

    fn vertex_point(&self, v: &PlanVertex) -> PlanPoint {
        let mut dose = vec![0.0; self.instance.dose.n_voxels()];
        for (i, d) in &v.dose {
            dose[*i as usize] = *d;
        }
        let atoms = v
            .shape
            .iter()
            .map(|s| {
                (
                    s.id(),
                    Atom {
                        shape: s.clone(),
                        weight: 1.0,
                    },
                )
            })
            .collect();
        PlanPoint {
            atoms,
            tau: v.tau.clone(),
            dose,
        }
    }

    fn vertex_id(&self, v: &PlanVertex) -> u64 {
        v.id
    }

    fn affine_residual(&self, _: &PlanVertex) -> Vec<f64> {
        Vec::new()
    }

    fn blend(&self, x: &mut PlanPoint, v: &PlanVertex, alpha: f64) {
        let keep = 1.0 - alpha;
        x.dose.iter_mut().for_each(|z| *z *= keep);
        for (i, d) in &v.dose {
            x.dose[*i as usize] += alpha * d;
        }
        for (t, vt) in x.tau.iter_mut().zip(&v.tau) {
            *t = keep * *t + alpha * vt;
        }
        x.atoms.values_mut().for_each(|a| a.weight *= keep);
        if let Some(s) = &v.shape {
            x.atoms
                .entry(s.id())
                .or_insert_with(|| Atom {
                    shape: s.clone(),
                    weight: 0.0,
                })
                .weight += alpha;
        }
        x.atoms.retain(|_, a| a.weight >= ATOM_PRUNE);
    }

    fn linearize(&self, x: &PlanPoint, eta: &[f64]) -> Result<PlanModel> {
        let (_, grad_dose) = self.penalty.value_grad(&x.dose);
        let mut h = Vec::with_capacity(self.n_constraints());
        let mut cvar_grads = Vec::with_capacity(self.cvars.len());
        let mut grad_dot_x = Vec::with_capacity(self.n_constraints());
        for (i, c) in self.cvars.iter().enumerate() {
            let loc = self.local_input(i, x);
            let (v, g) = c.func.value_grad(&loc, eta[i + 1])?;
            h.push(v);
            grad_dot_x.push(linalg::dot(&g, &loc));
            cvar_grads.push(g);
        }
        let group = match self.phi() {
            None => None,
            Some(phi) => {
                let by_angle = x.weights_by_angle();
                let weights: Vec<Vec<f64>> = by_angle
                    .values()
                    .map(|v| v.iter().map(|t| t.1).collect())
                    .collect();
                let (value, duals) = group_smoothed(&weights, phi, eta[self.cvars.len() + 1]);
                let mut new_price = vec![1.0 / phi; self.n_angles()];
                let mut active = BTreeMap::new();
                let mut gdx = 0.0;
                for ((angle, atoms), s) in by_angle.iter().zip(&duals) {
                    new_price[*angle as usize] = s[atoms.len()] / phi;
                    let list: Vec<(Shape, u64, f64)> = atoms
                        .iter()
                        .zip(s)
                        .map(|((id, y), st)| {
                            gdx += st / phi * y;
                            (x.atoms[id].shape.clone(), *id, st / phi)
                        })
                        .collect();
                    active.insert(*angle, list);
                }
                h.push(value);
                grad_dot_x.push(gdx);
                Some(GroupModel { active, new_price })
            }
        };
        Ok(PlanModel {
            grad_dose,
            h,
            cvar_grads,
            grad_dot_x,
            group,
        })
    }

    fn model_constraints(&self, m: &PlanModel, v: &PlanVertex) -> Vec<f64> {
        let mut out = Vec::with_capacity(m.h.len());
        for (i, g) in m.cvar_grads.iter().enumerate() {
            let idx = &self.local_index[i];
            let mut lin = m.h[i] - m.grad_dot_x[i] + g[g.len() - 1] * v.tau[i];
            for (vox, d) in &v.dose {
                let l = idx[*vox as usize];
                if l != u32::MAX {
                    lin += g[l as usize] * d;
                }
            }
            out.push(lin);
        }
        if let Some(gm) = &m.group {
            let k = self.cvars.len();
            let p = v
                .shape
                .as_ref()
                .map_or(0.0, |s| gm.price(s, v.id_of_shape()));
            out.push(m.h[k] - m.grad_dot_x[k] + p);
        }
        out
    }

    fn model_argmin(&self, m: &PlanModel, _q: &[f64], r: &[f64]) -> PlanVertex {
        let mut price = m.grad_dose.clone();
        for (i, g) in m.cvar_grads.iter().enumerate() {
            if r[i] != 0.0 {
                for (l, v) in self.cvars[i].voxels.iter().enumerate() {
                    price[*v as usize] += r[i] * g[l];
                }
            }
        }
        let group = m.group.as_ref().map(|gm| (gm, r[self.cvars.len()]));
        let per_angle: Vec<Option<(f64, Shape)>> = (0..self.n_angles())
            .into_par_iter()
            .map(|a| self.angle_candidate(a, &price, group))
            .collect();
        let mut best: Option<(f64, Shape)> = None;
        for cand in per_angle.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        let tau = m
            .cvar_grads
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if r[i] * g[g.len() - 1] < 0.0 {
                    self.tau_hi[i]
                } else {
                    self.tau_lo[i]
                }
            })
            .collect();
        self.vertex(best.map(|b| b.1), tau)
    }

    fn evaluate(&self, x: &PlanPoint) -> Result<PointReport> {
        let constraints = self.constraint_values(x)?;
        Ok(PointReport {
            objective: self.penalty.value(&x.dose),
            affine_residual: Vec::new(),
            infeasibility: linalg::positive_part_norm(&constraints),
            constraints,
        })
    }
}

impl PlanVertex {
    fn id_of_shape(&self) -> u64 {
        self.shape.as_ref().map_or(0, Shape::id)
    }
}
