//! Plan-quality functions on the voxel dose: penalty objective, CVaR
//! criteria, the per-angle sparsity measure and dose-volume histograms.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::smoothing::{entropy_max, DualSet, MaxFormFunction};

/// Default intensity below which an angle counts as unused.
pub const ANGLE_FLOOR: f64 = 1e-6;

/// Quadratic penalty outside per-voxel dose bands, averaged over voxels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelPenalty {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub under_weight: Vec<f64>,
    pub over_weight: Vec<f64>,
}

impl VoxelPenalty {
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// `(1/N)Σ w̲[T̲ − z]₊² + w̄[z − T̄]₊²` and its gradient in `z`.
    pub fn value_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let inv = 1.0 / self.len() as f64;
        let mut f = 0.0;
        let mut g = vec![0.0; z.len()];
        for v in 0..z.len() {
            let under = (self.lower[v] - z[v]).max(0.0);
            let over = (z[v] - self.upper[v]).max(0.0);
            f += self.under_weight[v] * under * under + self.over_weight[v] * over * over;
            g[v] = 2.0 * inv * (self.over_weight[v] * over - self.under_weight[v] * under);
        }
        (f * inv, g)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.value_grad(z).0
    }

    /// Curvature bound in the dose variables, `2·max w / N`.
    pub fn curvature(&self) -> f64 {
        let w = self
            .under_weight
            .iter()
            .chain(&self.over_weight)
            .fold(0.0f64, |m, v| m.max(*v));
        2.0 * w / self.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Mean of the hottest `p` fraction must stay below `b`.
    Overdose,
    /// Mean of the coldest `p` fraction must stay above `b`.
    Underdose,
}

/// A dose-volume criterion on one structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub structure: String,
    pub direction: Direction,
    /// Dose threshold `b` in Gy.
    pub dose: f64,
    /// Tail fraction `p`.
    pub fraction: f64,
    /// Bounds on the threshold variable in units of `b`; defaults to `[1, 1.5]`
    /// for underdose and `[0, 1]` for overdose.
    #[serde(default)]
    pub tau_bounds: Option<[f64; 2]>,
}

impl Criterion {
    pub fn scaled_tau_bounds(&self) -> [f64; 2] {
        self.tau_bounds.unwrap_or(match self.direction {
            Direction::Underdose => [1.0, 1.5],
            Direction::Overdose => [0.0, 1.0],
        })
    }
}

/// Unnormalized CVaR constraint value in Gy.
///
/// Overdose: `τ + Σ[z − τ]₊/(pN) − b`; underdose: `−τ + Σ[τ − z]₊/(pN) + b`.
pub fn cvar_value(direction: Direction, z: &[f64], tau: f64, b: f64, p: f64) -> f64 {
    let scale = 1.0 / (p * z.len() as f64);
    match direction {
        Direction::Overdose => tau + scale * z.iter().map(|v| (v - tau).max(0.0)).sum::<f64>() - b,
        Direction::Underdose => {
            -tau + scale * z.iter().map(|v| (tau - v).max(0.0)).sum::<f64>() + b
        }
    }
}

/// CVaR constraint divided by `b`, as a max-form function of `(z_S, τ/b)`.
///
/// One hinge per voxel with a unit-box dual, so the quadratic prox yields a
/// Huber smoothing.
pub fn cvar_max_form(
    direction: Direction,
    voxels: usize,
    b: f64,
    p: f64,
) -> Result<MaxFormFunction> {
    let w = 1.0 / (p * voxels as f64);
    let sign = match direction {
        Direction::Overdose => 1.0,
        Direction::Underdose => -1.0,
    };
    let mut entries = Vec::with_capacity(2 * voxels);
    for v in 0..voxels {
        entries.push((v, v, sign * w / b));
        entries.push((v, voxels, -sign * w));
    }
    let map = Matrix::from_triplets(voxels, voxels + 1, &entries)?;
    let mut linear = vec![0.0; voxels + 1];
    linear[voxels] = sign;
    MaxFormFunction::new(map, DualSet::UnitBox { size: voxels })?.with_affine(linear, -sign)
}

/// `Σ_a max_t y^{a,t} − Φ` over each angle's active weights (absent atoms count as 0).
pub fn group_sparsity_value(groups: &[Vec<f64>], phi: f64) -> f64 {
    groups
        .iter()
        .map(|g| g.iter().fold(0.0f64, |m, v| m.max(*v)))
        .sum::<f64>()
        - phi
}

/// Smoothed normalized sparsity measure `Σ_a smax_η(y^a/Φ, 0) − 1`.
///
/// Each angle takes an entropy-smoothed maximum over its active weights and
/// one implicit zero atom. Returns the value and, per angle, the maximizer:
/// weights for the active atoms followed by the zero atom's weight. With
/// `eta = 0` the exact maximum is used and the maximizer is one-hot on the
/// first maximal entry, the zero atom winning ties.
pub fn group_smoothed(groups: &[Vec<f64>], phi: f64, eta: f64) -> (f64, Vec<Vec<f64>>) {
    let mut total = -1.0;
    let mut duals = Vec::with_capacity(groups.len());
    for g in groups {
        let mut w: Vec<f64> = g.iter().map(|y| y / phi).collect();
        w.push(0.0);
        let mut s = vec![0.0; w.len()];
        if eta > 0.0 {
            total += entropy_max(&w, eta, &mut s);
        } else {
            let last = w.len() - 1;
            let mut best = last;
            for (t, v) in w.iter().enumerate().take(last) {
                if *v > w[best] {
                    best = t;
                }
            }
            total += w[best];
            s[best] = 1.0;
        }
        duals.push(s);
    }
    (total, duals)
}

/// Dose grid `0, 0.1, …, 80` Gy.
pub fn default_dose_grid() -> Vec<f64> {
    (0..=800).map(|i| i as f64 / 10.0).collect()
}

/// Fraction of `voxels` receiving at least each grid dose.
pub fn dvh_curve(z: &[f64], voxels: &[u32], grid: &[f64]) -> Vec<(f64, f64)> {
    let mut doses: Vec<f64> = voxels.iter().map(|v| z[*v as usize]).collect();
    doses.sort_by(f64::total_cmp);
    let n = doses.len() as f64;
    grid.iter()
        .map(|d| {
            let below = doses.partition_point(|x| x < d);
            (*d, (doses.len() - below) as f64 / n)
        })
        .collect()
}

/// Number of distinct angles whose summed intensity exceeds `floor`.
pub fn count_selected_angles<I: IntoIterator<Item = (u32, f64)>>(atoms: I, floor: f64) -> usize {
    let mut per_angle = std::collections::BTreeMap::<u32, f64>::new();
    for (a, y) in atoms {
        *per_angle.entry(a).or_insert(0.0) += y;
    }
    per_angle.values().filter(|y| **y > floor).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lower: f64, upper: f64, n: usize) -> VoxelPenalty {
        VoxelPenalty {
            lower: vec![lower; n],
            upper: vec![upper; n],
            under_weight: vec![1.0; n],
            over_weight: vec![1.0; n],
        }
    }

    #[test]
    fn penalty_examples() {
        let (f, g) = band(56.0, 56.0, 1).value_grad(&[58.0]);
        assert_eq!((f, g[0]), (4.0, 4.0));
        assert_eq!(band(56.0, 56.0, 1).value(&[0.0]), 56.0 * 56.0);
        let (f, g) = band(10.0, 20.0, 2).value_grad(&[12.0, 20.0]);
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cvar_examples() {
        assert_eq!(
            cvar_value(Direction::Overdose, &[10.0, 0.0], 10.0, 8.0, 0.5),
            2.0
        );
        assert_eq!(
            cvar_value(Direction::Underdose, &[5.0; 4], 5.0, 5.0, 0.2),
            0.0
        );
        assert_eq!(
            cvar_value(Direction::Overdose, &[0.0, 0.0], 0.0, 1.0, 0.5),
            -1.0
        );
    }

    #[test]
    fn max_form_matches_direct_value() {
        let z = [3.0, 9.0, 14.0];
        for dir in [Direction::Overdose, Direction::Underdose] {
            let f = cvar_max_form(dir, 3, 8.0, 0.4).unwrap();
            for tau in [0.0, 5.0, 8.0, 12.0] {
                let mut x = z.to_vec();
                x.push(tau / 8.0);
                let direct = cvar_value(dir, &z, tau, 8.0, 0.4) / 8.0;
                assert!((f.exact_value(&x).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn group_examples() {
        assert_eq!(group_sparsity_value(&[], 0.2), -0.2);
        assert!((group_sparsity_value(&[vec![0.3, 0.1]], 0.2) - 0.1).abs() < 1e-15);
        let (v, s) = group_smoothed(&[vec![0.3, 0.1]], 0.2, 0.0);
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(s[0], vec![1.0, 0.0, 0.0]);
        // Smoothing only lowers the centered entropy max by at most η ln T.
        let (vs, _) = group_smoothed(&[vec![0.3, 0.1]], 0.2, 0.01);
        assert!(vs <= v + 1e-12 && vs >= v - 0.01 * 3f64.ln() - 1e-12);
    }

    #[test]
    fn dvh_examples() {
        let z = [56.0; 4];
        let vox = [0, 1, 2, 3];
        let c = dvh_curve(&z, &vox, &default_dose_grid());
        assert_eq!(c[0], (0.0, 1.0));
        assert_eq!(c[560], (56.0, 1.0));
        assert_eq!(c[561].1, 0.0);
        let c = dvh_curve(&[40.0, 60.0], &[0, 1], &[50.0]);
        assert_eq!(c[0].1, 0.5);
    }

    #[test]
    fn angle_counts() {
        assert_eq!(count_selected_angles(Vec::new(), ANGLE_FLOOR), 0);
        assert_eq!(
            count_selected_angles(vec![(3, 0.1), (3, 0.2), (7, 0.3)], ANGLE_FLOOR),
            2
        );
    }
}
