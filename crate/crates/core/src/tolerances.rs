//! Numerical tolerances shared across modules.
//!
//! Values are absolute unless the name says otherwise.

/// Relative finite-difference step: `h = FD_STEP * max(1, |p|)`.
pub const FD_STEP: f64 = 1e-5;

/// Two finite-difference Jacobians agree when their gap is below this.
pub const FD_AGREEMENT: f64 = 1e-8;

/// Floor for treating a smallest singular value as zero.
pub const SINGULAR_FLOOR: f64 = 1e-12;

/// Default absolute Newton tolerance for the inversion step.
pub const NEWTON_TOL: f64 = 1e-11;

/// Default iteration cap for the inversion step.
pub const NEWTON_MAX_ITER: usize = 50;

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;

/// Maximum number of step halvings in the line search.
pub const ARMIJO_HALVINGS: usize = 20;

/// Default sup-norm stopping tolerance for the fixed-point loop.
pub const FIXED_POINT_TOL: f64 = 1e-10;

/// Identity checks on fixed sets.
pub const FIXED_SET: f64 = 1e-12;

/// Orthonormality of frames.
pub const FRAME_ORTHO: f64 = 1e-12;

/// Block structure checks on finite-difference Jacobians.
pub const BLOCK_STRUCTURE: f64 = 1e-8;

/// Symmetry checks on finite-difference Jacobians.
pub const SYMMETRY: f64 = 1e-8;

/// Relative gap required between eigenvalues when splitting a spectrum.
pub const SPECTRAL_GAP: f64 = 1e-6;

/// Spectra compared against closed forms.
pub const SPECTRUM_EXACT: f64 = 1e-12;

/// Spectra of lifted maps compared against closed forms.
pub const LIFTED_SPECTRUM: f64 = 1e-8;

/// Base-drift tolerance when certifying boundary fibres.
pub const BOUNDARY_DRIFT: f64 = 1e-12;

/// Sum of a partition of unity must be within this of one.
pub const PARTITION_SUM: f64 = 1e-12;
