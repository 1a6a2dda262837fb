//! Intensity-modulated radiation therapy planning on synthetic phantoms.
//!
//! The planning problem chooses intensities for collimator apertures across
//! beam angles. There are exponentially many apertures, so the problem is
//! solved over an implicit vertex set: the oracle assembles the best aperture
//! of each angle row by row from beamlet scores.

pub mod aperture;
pub mod dose;
pub mod explicit;
pub mod export;
pub mod generate;
pub mod geometry;
pub mod instance;
pub mod plan;
pub mod problem;

pub use aperture::Shape;
pub use dose::DoseMatrix;
pub use explicit::{explicit_problem, ExplicitProblem};
pub use export::{export_plan, write_dvh_csv, PlanExport};
pub use generate::{generate, GeneratorConfig};
pub use geometry::{Geometry, LeafModel, StructureKind};
pub use instance::{ImrtInstance, InstanceSpec, PenaltyWeights};
pub use plan::{Criterion, Direction};
pub use problem::{Atom, ImrtProblem, PlanPoint, PlanVertex};
