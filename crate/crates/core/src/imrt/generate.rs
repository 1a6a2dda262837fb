//! Seeded synthetic instances: random voxel-aligned tumor cubes and organ
//! cuboids inside the body, evenly spaced beam angles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dose::DoseMatrix;
use super::geometry::{even_angles, Cuboid, Geometry, LeafModel, Structure, StructureKind};
use super::instance::{ImrtInstance, InstanceSpec, PenaltyWeights, PRESCRIPTION};
use super::plan::{Criterion, Direction};
use crate::error::{invalid, Result};

const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub half_length: f64,
    pub voxel_size: f64,
    /// Number of evenly spaced angles (180 gives one every two degrees).
    pub angles: usize,
    pub rows: usize,
    pub cols: usize,
    pub leaf_model: LeafModel,
    /// Fixed dose rate; `None` calibrates it so that spreading unit intensity
    /// evenly over all full-open apertures gives the tumors twice the
    /// prescription on average.
    pub dose_rate: Option<f64>,
    pub tumors: usize,
    pub organs: usize,
    /// Defaults to underdose limits of 30 and 40 Gy on the first two tumors
    /// and an overdose limit of 200 Gy on the first organ, all with `p = 0.05`.
    pub criteria: Option<Vec<Criterion>>,
    pub phi: Option<f64>,
    pub prescription: f64,
    pub weights: PenaltyWeights,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            half_length: 8.0,
            voxel_size: 1.0,
            angles: 180,
            rows: 16,
            cols: 16,
            leaf_model: LeafModel::Interior,
            dose_rate: None,
            tumors: 2,
            organs: 2,
            criteria: None,
            phi: Some(0.2),
            prescription: PRESCRIPTION,
            weights: PenaltyWeights::default(),
        }
    }
}

impl GeneratorConfig {
    fn default_criteria(&self) -> Vec<Criterion> {
        let mut out = Vec::new();
        for (i, b) in [30.0, 40.0].into_iter().enumerate().take(self.tumors) {
            out.push(Criterion {
                structure: format!("tumor{}", i + 1),
                direction: Direction::Underdose,
                dose: b,
                fraction: 0.05,
                tau_bounds: None,
            });
        }
        if self.organs > 0 {
            out.push(Criterion {
                structure: "organ1".into(),
                direction: Direction::Overdose,
                dose: 200.0,
                fraction: 0.05,
                tau_bounds: None,
            });
        }
        out
    }
}

/// Draw a box of integer side lengths in `side` voxels, with its x-range inside `x_range`.
fn random_box(
    rng: &mut ChaCha8Rng,
    s: usize,
    sides: [(usize, usize); 3],
    x_range: (usize, usize),
) -> [(usize, usize); 3] {
    let mut out = [(0, 0); 3];
    for (axis, (lo, hi)) in sides.iter().enumerate() {
        let (from, to) = if axis == 0 { x_range } else { (0, s) };
        let width = rng.gen_range(*lo..=*hi).min(to - from).max(1);
        let start = rng.gen_range(from..=to - width);
        out[axis] = (start, start + width);
    }
    out
}

pub fn generate(cfg: &GeneratorConfig) -> Result<ImrtInstance> {
    let mut geometry = Geometry {
        half_length: cfg.half_length,
        voxel_size: cfg.voxel_size,
        structures: Vec::new(),
        angles_deg: even_angles(cfg.angles),
        rows: cfg.rows,
        cols: cfg.cols,
        leaf_model: cfg.leaf_model,
        dose_rate: cfg.dose_rate.unwrap_or(1.0),
    };
    geometry.validate()?;
    let s = geometry.per_axis();
    let (l, delta) = (cfg.half_length, cfg.voxel_size);
    // Keep tumors inside the columns that can open.
    let (c_lo, c_hi) = cfg
        .leaf_model
        .open_range(cfg.cols)
        .unwrap_or((0, cfg.cols - 1));
    let col_w = 2.0 * l / cfg.cols as f64;
    let to_vox = |x: f64| ((x + l) / delta).round() as usize;
    let mut x_range = (
        to_vox(-l + c_lo as f64 * col_w).min(s),
        to_vox(-l + (c_hi + 1) as f64 * col_w).min(s),
    );
    if x_range.1 <= x_range.0 {
        x_range = (0, s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tumor_side = (s / 8 + 1, s / 4 + 1);
    let organ_side = (s / 8 + 1, s / 4 + 2);
    let mut boxes: Vec<[(usize, usize); 3]> = Vec::new();
    let plan: Vec<(StructureKind, String)> = (0..cfg.tumors)
        .map(|i| (StructureKind::Tumor, format!("tumor{}", i + 1)))
        .chain((0..cfg.organs).map(|i| (StructureKind::Organ, format!("organ{}", i + 1))))
        .collect();
    for (kind, name) in plan {
        let (sides, xr) = match kind {
            StructureKind::Tumor => {
                let t = rng.gen_range(tumor_side.0..=tumor_side.1);
                ([(t, t); 3], x_range)
            }
            StructureKind::Organ => ([organ_side; 3], (0, s)),
        };
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let b = random_box(&mut rng, s, sides, xr);
            let clash = boxes
                .iter()
                .any(|o| (0..3).all(|k| b[k].0 < o[k].1 && o[k].0 < b[k].1));
            if !clash {
                placed = Some(b);
                break;
            }
        }
        let Some(b) = placed else {
            return invalid(format!(
                "could not place structure '{name}' without overlap"
            ));
        };
        boxes.push(b);
        let edge = |i: usize| -l + i as f64 * delta;
        geometry.structures.push(Structure {
            name,
            kind,
            bounds: Cuboid {
                lo: [edge(b[0].0), edge(b[1].0), edge(b[2].0)],
                hi: [edge(b[0].1), edge(b[1].1), edge(b[2].1)],
            },
        });
    }

    let dose = DoseMatrix::compute(&geometry)?;
    if cfg.dose_rate.is_none() {
        let vox = geometry.structure_voxels()?;
        let tumor_vox: Vec<u32> = geometry
            .structures
            .iter()
            .zip(&vox)
            .filter(|(st, _)| st.kind == StructureKind::Tumor)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        if !tumor_vox.is_empty() {
            let n_a = geometry.angles_deg.len();
            let mut mean = 0.0;
            for a in 0..n_a {
                let z = dose.full_open(&geometry, a);
                mean += tumor_vox.iter().map(|v| z[*v as usize]).sum::<f64>();
            }
            mean /= (n_a * tumor_vox.len()) as f64;
            if mean > 0.0 {
                geometry.dose_rate = 2.0 * cfg.prescription / mean;
            }
        }
    }
    let spec = InstanceSpec {
        geometry,
        criteria: cfg
            .criteria
            .clone()
            .unwrap_or_else(|| cfg.default_criteria()),
        phi: cfg.phi,
        prescription: cfg.prescription,
        weights: cfg.weights.clone(),
        seed: Some(cfg.seed),
    };
    spec.validate()?;
    spec.geometry.structure_voxels()?;
    Ok(ImrtInstance { spec, dose })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            half_length: 4.0,
            angles: 12,
            rows: 2,
            cols: 5,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.spec.geometry.structures, c.spec.geometry.structures);
    }

    #[test]
    fn structures_are_disjoint_and_nonempty() {
        let inst = generate(&small(11)).unwrap();
        let g = &inst.spec.geometry;
        let vox = g.structure_voxels().unwrap();
        assert_eq!(vox.len(), 4);
        for i in 0..g.structures.len() {
            for j in 0..i {
                assert!(!g.structures[i].bounds.overlaps(&g.structures[j].bounds));
            }
        }
        assert!(g.dose_rate > 0.0);
    }
}
