//! Sparse beamlet-to-voxel dose matrix, built by tracing beamlet center lines.
//!
//! Every collimator cell is sampled by a lattice of lines perpendicular to the
//! aperture plane, spaced about one voxel apart. A voxel crossed by any of
//! those lines receives `2/d` Gy per unit intensity, where `d` is its distance
//! to the aperture plane.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::geometry::Geometry;
use crate::error::{invalid, Result};

const MAGIC: &[u8; 8] = b"CXDOSE\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DoseMatrix {
    n_angles: usize,
    cells_per_angle: usize,
    n_voxels: usize,
    /// Indexed by `angle · cells_per_angle + row · cols + col`; voxels ascending.
    cells: Vec<Vec<(u32, f64)>>,
}

impl DoseMatrix {
    /// Trace every beamlet of every angle (angles in parallel).
    pub fn compute(geom: &Geometry) -> Result<Self> {
        geom.validate()?;
        let per_angle: Vec<Vec<Vec<(u32, f64)>>> = (0..geom.angles_deg.len())
            .into_par_iter()
            .map(|a| trace_angle(geom, a))
            .collect();
        Ok(Self {
            n_angles: geom.angles_deg.len(),
            cells_per_angle: geom.rows * geom.cols,
            n_voxels: geom.voxel_count(),
            cells: per_angle.into_iter().flatten().collect(),
        })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn cells_per_angle(&self) -> usize {
        self.cells_per_angle
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn nnz(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// Dose entries of one beamlet cell.
    pub fn cell(&self, angle: usize, cell: usize) -> &[(u32, f64)] {
        &self.cells[angle * self.cells_per_angle + cell]
    }

    /// Check that the matrix fits a geometry.
    pub fn check_against(&self, geom: &Geometry) -> Result<()> {
        if self.n_angles != geom.angles_deg.len()
            || self.cells_per_angle != geom.rows * geom.cols
            || self.n_voxels != geom.voxel_count()
        {
            return invalid(format!(
                "dose matrix ({} angles x {} cells, {} voxels) does not match the geometry",
                self.n_angles, self.cells_per_angle, self.n_voxels
            ));
        }
        Ok(())
    }

    /// Little-endian COO: magic, version, rows, cols, nnz, then
    /// `(row: u64, col: u64, value: f64)` triplets in row order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.cells.len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_voxels as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (row, entries) in self.cells.iter().enumerate() {
            for (v, d) in entries {
                w.write_all(&(row as u64).to_le_bytes())?;
                w.write_all(&u64::from(*v).to_le_bytes())?;
                w.write_all(&d.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, n_angles: usize) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return invalid("not a dose matrix file");
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return invalid(format!("unsupported dose file version {version}"));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let nnz = read_u64(&mut r)? as usize;
        if n_angles == 0 || !rows.is_multiple_of(n_angles) {
            return invalid(format!(
                "{rows} dose rows cannot be split over {n_angles} angles"
            ));
        }
        let mut cells = vec![Vec::new(); rows];
        for _ in 0..nnz {
            let row = read_u64(&mut r)? as usize;
            let col = read_u64(&mut r)? as usize;
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            let val = f64::from_le_bytes(b8);
            if row >= rows || col >= cols || !(val >= 0.0 && val.is_finite()) {
                return invalid(format!("bad dose entry ({row}, {col}, {val})"));
            }
            cells[row].push((col as u32, val));
        }
        Ok(Self {
            n_angles,
            cells_per_angle: rows / n_angles,
            n_voxels: cols,
            cells,
        })
    }

    /// Dose of the widest aperture of angle `a` (every openable cell open), unit intensity.
    pub fn full_open(&self, geom: &Geometry, a: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.n_voxels];
        if let Some((lo, hi)) = geom.leaf_model.open_range(geom.cols) {
            for i in 0..geom.rows {
                for j in lo..=hi {
                    for (v, d) in self.cell(a, i * geom.cols + j) {
                        z[*v as usize] += d;
                    }
                }
            }
        }
        z
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Sample positions splitting `[lo, lo + width]` into about `width/δ` pieces.
fn samples(lo: f64, width: f64, delta: f64) -> impl Iterator<Item = f64> {
    let k = ((width / delta).round() as usize).max(1);
    (0..k).map(move |t| lo + (t as f64 + 0.5) * width / k as f64)
}

fn trace_angle(geom: &Geometry, a: usize) -> Vec<Vec<(u32, f64)>> {
    let l = geom.half_length;
    let delta = geom.voxel_size;
    let s = geom.per_axis();
    let (c, sn) = geom.direction(a);
    let wx = 2.0 * l / geom.cols as f64;
    let wu = 2.0 * l / geom.rows as f64;
    let mut yz = Vec::new();
    let mut out = Vec::with_capacity(geom.rows * geom.cols);
    for i in 0..geom.rows {
        let u_lo = l - (i as f64 + 1.0) * wu;
        for j in 0..geom.cols {
            let x_lo = -l + j as f64 * wx;
            let mut voxels: Vec<u32> = Vec::new();
            for x in samples(x_lo, wx, delta) {
                let ix = grid_index(x, l, delta, s);
                for u in samples(u_lo, wu, delta) {
                    yz.clear();
                    traverse_plane([-u * sn, u * c], [c, sn], l, delta, s, &mut yz);
                    voxels.extend(
                        yz.iter()
                            .map(|(jy, kz)| geom.voxel_index(ix, *jy, *kz) as u32),
                    );
                }
            }
            voxels.sort_unstable();
            voxels.dedup();
            out.push(
                voxels
                    .into_iter()
                    .map(|v| {
                        (
                            v,
                            2.0 / geom.plane_distance(a, geom.voxel_center(v as usize)),
                        )
                    })
                    .collect(),
            );
        }
    }
    out
}

fn grid_index(x: f64, l: f64, delta: f64, s: usize) -> usize {
    (((x + l) / delta).floor().max(0.0) as usize).min(s - 1)
}

/// Grid cells `(y, z)` of `[−l, l]²` crossed by the line `p + t·dir`.
///
/// Walks the slabs of the axis the line is most aligned with and, inside each
/// slab, every cell of the other axis between the line's entry and exit.
fn traverse_plane(
    p: [f64; 2],
    dir: [f64; 2],
    l: f64,
    delta: f64,
    s: usize,
    out: &mut Vec<(usize, usize)>,
) {
    let (major, minor) = if dir[0].abs() >= dir[1].abs() {
        (0, 1)
    } else {
        (1, 0)
    };
    for t in 0..s {
        let lo = -l + t as f64 * delta;
        let ta = (lo - p[major]) / dir[major];
        let tb = (lo + delta - p[major]) / dir[major];
        let ca = p[minor] + dir[minor] * ta;
        let cb = p[minor] + dir[minor] * tb;
        let (cmin, cmax) = (ca.min(cb), ca.max(cb));
        if cmax < -l || cmin > l {
            continue;
        }
        let first = ((cmin + l) / delta).floor();
        let last = if cmax > cmin {
            ((cmax + l) / delta).ceil() - 1.0
        } else {
            first
        };
        let first = first.max(0.0) as usize;
        let last = (last.max(0.0) as usize).min(s - 1);
        for m in first..=last.max(first).min(s - 1) {
            if major == 0 {
                out.push((t, m));
            } else {
                out.push((m, t));
            }
        }
    }
}
