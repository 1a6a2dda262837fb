//! Voxelized body cube, structures and beam angles.
//!
//! The body is `[−l, l]³` cut into cubes of edge `δ`. Beams rotate around the
//! x-axis; for angle `θ` the source direction is `(0, cos θ, sin θ)` and the
//! aperture plane sits at distance `2l` from the origin with in-plane axes
//! `e_x` (columns) and `(0, −sin θ, cos θ)` (rows).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Tumor,
    Organ,
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Cuboid {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    pub fn overlaps(&self, o: &Cuboid) -> bool {
        (0..3).all(|i| self.lo[i] < o.hi[i] && o.lo[i] < self.hi[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub name: String,
    pub kind: StructureKind,
    pub bounds: Cuboid,
}

/// Which leaf positions a row of the collimator allows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafModel {
    /// Leaves sit on columns `1..=n` and open the columns strictly between
    /// them, so the outermost columns never open: `n(n−1)/2` leaf pairs per row.
    #[default]
    Interior,
    /// Any contiguous run of columns, or none.
    Full,
}

impl LeafModel {
    /// Inclusive range of columns that can open in a row of `n` columns.
    pub fn open_range(self, n: usize) -> Option<(usize, usize)> {
        match self {
            LeafModel::Interior if n >= 3 => Some((1, n - 2)),
            LeafModel::Interior => None,
            LeafModel::Full if n >= 1 => Some((0, n - 1)),
            LeafModel::Full => None,
        }
    }

    /// Number of leaf configurations of one row.
    pub fn row_configurations(self, n: usize) -> u128 {
        let n = n as u128;
        match self {
            LeafModel::Interior => n * n.saturating_sub(1) / 2,
            LeafModel::Full => n * (n + 1) / 2 + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// `l`
    pub half_length: f64,
    /// `δ`
    pub voxel_size: f64,
    pub structures: Vec<Structure>,
    pub angles_deg: Vec<f64>,
    /// Collimator grid rows `m`.
    pub rows: usize,
    /// Collimator grid columns `n`.
    pub cols: usize,
    #[serde(default)]
    pub leaf_model: LeafModel,
    /// Dose rate `R`.
    pub dose_rate: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_length > 0.0 && self.voxel_size > 0.0) {
            return invalid("half length and voxel size must be positive");
        }
        let ratio = 2.0 * self.half_length / self.voxel_size;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return invalid(format!(
                "voxel size {} does not divide the body width {}",
                self.voxel_size,
                2.0 * self.half_length
            ));
        }
        if self.angles_deg.is_empty() {
            return invalid("at least one beam angle is required");
        }
        if self.rows == 0 || self.leaf_model.open_range(self.cols).is_none() {
            return invalid(format!(
                "a {}x{} collimator grid has no openable beamlets",
                self.rows, self.cols
            ));
        }
        if !(self.dose_rate > 0.0 && self.dose_rate.is_finite()) {
            return invalid("dose rate must be positive");
        }
        Ok(())
    }

    /// Voxels per axis.
    pub fn per_axis(&self) -> usize {
        (2.0 * self.half_length / self.voxel_size).round() as usize
    }

    pub fn voxel_count(&self) -> usize {
        self.per_axis().pow(3)
    }

    /// Leaf configurations per angle, `(n(n−1)/2)^m` for interior leaves.
    pub fn apertures_per_angle(&self) -> u128 {
        self.leaf_model
            .row_configurations(self.cols)
            .saturating_pow(self.rows as u32)
    }

    pub fn aperture_count(&self) -> u128 {
        self.apertures_per_angle()
            .saturating_mul(self.angles_deg.len() as u128)
    }

    /// Voxel index `i + s(j + s·k)` for grid coordinates along x, y, z.
    pub fn voxel_index(&self, i: usize, j: usize, k: usize) -> usize {
        let s = self.per_axis();
        i + s * (j + s * k)
    }

    pub fn voxel_center(&self, v: usize) -> [f64; 3] {
        let s = self.per_axis();
        let (i, j, k) = (v % s, (v / s) % s, v / (s * s));
        let c = |t: usize| -self.half_length + (t as f64 + 0.5) * self.voxel_size;
        [c(i), c(j), c(k)]
    }

    /// `(cos θ, sin θ)` of beam `a`.
    pub fn direction(&self, a: usize) -> (f64, f64) {
        let t = self.angles_deg[a].to_radians();
        (t.cos(), t.sin())
    }

    /// Distance from a point to the aperture plane of beam `a`.
    pub fn plane_distance(&self, a: usize, p: [f64; 3]) -> f64 {
        let (c, s) = self.direction(a);
        2.0 * self.half_length - (p[1] * c + p[2] * s)
    }

    /// Structure label of every voxel: the first structure containing its center.
    pub fn labels(&self) -> Vec<Option<usize>> {
        (0..self.voxel_count())
            .map(|v| {
                let c = self.voxel_center(v);
                self.structures.iter().position(|s| s.bounds.contains(c))
            })
            .collect()
    }

    /// Voxels of each structure, failing on a structure that discretizes to nothing.
    pub fn structure_voxels(&self) -> Result<Vec<Vec<u32>>> {
        let mut out = vec![Vec::new(); self.structures.len()];
        for (v, l) in self.labels().into_iter().enumerate() {
            if let Some(s) = l {
                out[s].push(v as u32);
            }
        }
        for (s, vox) in self.structures.iter().zip(&out) {
            if vox.is_empty() {
                return invalid(format!("structure '{}' contains no voxel", s.name));
            }
        }
        Ok(out)
    }

    pub fn structure_index(&self, name: &str) -> Option<usize> {
        self.structures.iter().position(|s| s.name == name)
    }
}

/// `count` angles evenly spaced over the full circle, starting at 0°.
pub fn even_angles(count: usize) -> Vec<f64> {
    (0..count)
        .map(|a| 360.0 * a as f64 / count as f64)
        .collect()
}
