//! Sampling estimates of Clarke derivatives of locally Lipschitz maps and
//! their use on the top Hessian eigenvalue across the bad set.

mod lambda;
mod sample;

pub use lambda::{
    lambda1_field, lambda1_lipschitz_probe, lambda1_path_profile, Lambda1Probe, MinimiserPath, PathProfile,
};
pub use sample::{
    clarke_opnorm, clarke_sigma_min, differentiable_jacobian, hull_sigma_min, lip_vs_clarke_check, sample_jacobians,
    semicontinuity_probe, ClarkeSampleSet, LipClarkeCheck, ProbeReport, SemicontinuityReport, SemicontinuityRung,
    AGREEMENT_FACTOR,
};

use thiserror::Error;

use crate::eos::EosError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClarkeError {
    #[error("all {count} samples failed the differentiability test")]
    NoDifferentiablePoints { count: usize },
    #[error("sample set is empty")]
    EmptySet,
    #[error("box has an empty or non-finite side")]
    DegenerateBox,
    #[error("path does not meet the bad set (smallest gap {min_gap})")]
    NoCrossingOnPath { min_gap: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Eos(#[from] EosError),
}
