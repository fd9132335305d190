//! Boundary modification of a map near the edge of a compact piece of its
//! fixed-point curve: collars, locally blended maps, partition-of-unity
//! patching and checks of the resulting map.

mod bench;
mod blend;
mod collar;
mod verify;

pub use bench::{build_arc_surgery, ArcSurgeryConfig, FrameChoice, SurgeryBuild};
pub use blend::{
    blend_local, frame_respects, patch_partition, random_partition, rotate_columns, signed_splitting, splitting_frame,
    Chart, LocalBlend, Partition, PatchedMap, SignedSplitting, SubBundle,
};
pub use collar::{
    build_collar, compact_exclusion_radius, distance_lipschitz_excess, distance_to_samples, CollarSpec, End,
};
pub use verify::{linearization_change, verify_surgery, SamplePoint, SurgeryItem, SurgeryReport, VerifyGrid};

use thiserror::Error;

use crate::manifold::ManifoldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error("sample set is empty")]
    EmptySamples,
    #[error("collar depth {depth} is not below {limit}")]
    CollarTooDeep { depth: f64, limit: f64 },
    #[error("chart frame leaves its labelled sub-bundle (leak {leak})")]
    FrameNotSplitRespecting { leak: f64 },
    #[error("partition of unity misses one by {gap}")]
    PartitionGap { gap: f64 },
    #[error("normal Jacobian is not symmetric (asymmetry {asymmetry})")]
    NotSymmetric { asymmetry: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}
