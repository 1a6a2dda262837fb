//! Instance description and its on-disk form (`instance.json` + `dose.bin`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dose::DoseMatrix;
use super::geometry::{Geometry, StructureKind};
use super::plan::{Criterion, VoxelPenalty};
use crate::error::{invalid, Result};

pub const INSTANCE_FILE: &str = "instance.json";
pub const DOSE_FILE: &str = "dose.bin";

/// Prescribed tumor dose in Gy.
pub const PRESCRIPTION: f64 = 56.0;

/// Penalty weights per structure kind, with optional per-structure overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyWeights {
    pub tumor: f64,
    pub organ: f64,
    /// Voxels outside every structure.
    pub body: f64,
    pub by_structure: BTreeMap<String, f64>,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self {
            tumor: 1.0,
            organ: 1.0,
            body: 1.0,
            by_structure: BTreeMap::new(),
        }
    }
}

fn default_prescription() -> f64 {
    PRESCRIPTION
}

/// Everything except the dose matrix; serialized as `instance.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub geometry: Geometry,
    pub criteria: Vec<Criterion>,
    /// Per-angle sparsity budget; `None` drops the constraint.
    pub phi: Option<f64>,
    #[serde(default = "default_prescription")]
    pub prescription: f64,
    #[serde(default)]
    pub weights: PenaltyWeights,
    /// Generator seed, if generated.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        for c in &self.criteria {
            if self.geometry.structure_index(&c.structure).is_none() {
                return invalid(format!(
                    "criterion refers to unknown structure '{}'",
                    c.structure
                ));
            }
            if !(c.fraction > 0.0 && c.fraction < 1.0) {
                return invalid(format!("tail fraction {} must lie in (0, 1)", c.fraction));
            }
            if !(c.dose > 0.0 && c.dose.is_finite()) {
                return invalid(format!("criterion dose {} must be positive", c.dose));
            }
            let [lo, hi] = c.scaled_tau_bounds();
            if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
                return invalid(format!("bad threshold bounds [{lo}, {hi}]"));
            }
        }
        if !(self.prescription > 0.0 && self.prescription.is_finite()) {
            return invalid(format!(
                "prescription {} must be positive",
                self.prescription
            ));
        }
        if let Some(phi) = self.phi {
            if !(phi > 0.0 && phi.is_finite()) {
                return invalid(format!("sparsity budget {phi} must be positive"));
            }
        }
        let w = &self.weights;
        if [w.tumor, w.organ, w.body]
            .iter()
            .chain(w.by_structure.values())
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return invalid("penalty weights must be finite and nonnegative");
        }
        Ok(())
    }

    /// Voxel penalty bands: the prescription on tumors, zero elsewhere.
    ///
    /// Deviations are measured in units of the prescription, so each weight
    /// is divided by its square and unit weights give values of order one.
    pub fn penalty(&self) -> VoxelPenalty {
        let labels = self.geometry.labels();
        let n = labels.len();
        let unit = self.prescription.powi(-2);
        let mut p = VoxelPenalty {
            lower: vec![0.0; n],
            upper: vec![0.0; n],
            under_weight: vec![self.weights.body * unit; n],
            over_weight: vec![self.weights.body * unit; n],
        };
        for (v, l) in labels.into_iter().enumerate() {
            let Some(s) = l else { continue };
            let st = &self.geometry.structures[s];
            let (t, w) = match st.kind {
                StructureKind::Tumor => (self.prescription, self.weights.tumor),
                StructureKind::Organ => (0.0, self.weights.organ),
            };
            let w = self
                .weights
                .by_structure
                .get(&st.name)
                .copied()
                .unwrap_or(w)
                * unit;
            p.lower[v] = t;
            p.upper[v] = t;
            p.under_weight[v] = w;
            p.over_weight[v] = w;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImrtInstance {
    pub spec: InstanceSpec,
    pub dose: DoseMatrix,
}

impl ImrtInstance {
    /// Trace the dose matrix for a description.
    pub fn build(spec: InstanceSpec) -> Result<Self> {
        spec.validate()?;
        let dose = DoseMatrix::compute(&spec.geometry)?;
        Ok(Self { spec, dose })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.spec)?;
        std::fs::write(dir.join(INSTANCE_FILE), json)?;
        self.dose
            .write_binary(BufWriter::new(File::create(dir.join(DOSE_FILE))?))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let spec: InstanceSpec =
            serde_json::from_str(&std::fs::read_to_string(dir.join(INSTANCE_FILE))?)?;
        spec.validate()?;
        let dose = DoseMatrix::read_binary(
            BufReader::new(File::open(dir.join(DOSE_FILE))?),
            spec.geometry.angles_deg.len(),
        )?;
        dose.check_against(&spec.geometry)?;
        Ok(Self { spec, dose })
    }
}
