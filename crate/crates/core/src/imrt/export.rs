//! Plan and dose-volume exports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::plan::{dvh_curve, ANGLE_FLOOR};
use super::problem::{ImrtProblem, PlanPoint};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApertureExport {
    pub angle: u32,
    pub angle_deg: f64,
    /// Leaf pair per row; columns strictly between them are open (1-based).
    pub leaves: Vec<(usize, usize)>,
    pub intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub apertures: Vec<ApertureExport>,
    /// CVaR thresholds in Gy.
    pub tau: Vec<f64>,
    /// Thresholds in units of each criterion's dose.
    pub tau_scaled: Vec<f64>,
    pub selected_angles: usize,
    pub total_intensity: f64,
}

pub fn export_plan(p: &ImrtProblem, x: &PlanPoint) -> PlanExport {
    let spec = &p.instance().spec;
    let geom = &spec.geometry;
    PlanExport {
        apertures: x
            .atoms
            .values()
            .map(|a| ApertureExport {
                angle: a.shape.angle,
                angle_deg: geom.angles_deg[a.shape.angle as usize],
                leaves: a.shape.leaf_pairs(geom.leaf_model),
                intensity: a.weight,
            })
            .collect(),
        tau: x
            .tau
            .iter()
            .zip(&spec.criteria)
            .map(|(t, c)| t * c.dose)
            .collect(),
        tau_scaled: x.tau.clone(),
        selected_angles: x.selected_angles(ANGLE_FLOOR),
        total_intensity: x.total_intensity(),
    }
}

/// CSV rows `structure,dose,fraction` for every structure over `grid`.
pub fn write_dvh_csv<W: Write>(p: &ImrtProblem, x: &PlanPoint, grid: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["structure", "dose", "fraction"])
        .map_err(std::io::Error::from)?;
    let geom = &p.instance().spec.geometry;
    for (st, vox) in geom.structures.iter().zip(p.structure_voxels()) {
        for (d, f) in dvh_curve(&x.dose, vox, grid) {
            out.write_record([st.name.as_str(), &d.to_string(), &f.to_string()])
                .map_err(std::io::Error::from)?;
        }
    }
    out.flush()?;
    Ok(())
}
