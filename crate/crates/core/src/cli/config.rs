use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::eos::ScanParams;
use crate::manifold::{BlockSpec, ShearProfile};
use crate::surgery::{ArcSurgeryConfig, FrameChoice};

/// Reads a JSON config, or returns the command default when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldConfig {
    Circle,
    Arc { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapConfig {
    /// Block map conjugated by the shear `s -> s + psi(x, q)`.
    Shear { blocks: BlockSpec, shear: ShearProfile },
    /// The diagonal of `blocks` as a constant linear map on the fibres.
    Linear { blocks: BlockSpec },
}

impl MapConfig {
    pub fn blocks(&self) -> &BlockSpec {
        match self {
            MapConfig::Shear { blocks, .. } | MapConfig::Linear { blocks } => blocks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusProbeConfig {
    pub base_nodes: usize,
    pub shells: usize,
    pub random_directions: usize,
}

impl Default for RadiusProbeConfig {
    fn default() -> Self {
        RadiusProbeConfig {
            base_nodes: 32,
            shells: 4,
            random_directions: 8,
        }
    }
}

/// Sampling of `E(4r)` for the block bounds and C^1 distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundGridConfig {
    pub base_nodes: usize,
    pub per_axis: usize,
}

impl Default for BoundGridConfig {
    fn default() -> Self {
        BoundGridConfig {
            base_nodes: 16,
            per_axis: 9,
        }
    }
}

/// A map on a trivialised tube and the solver constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub manifold: ManifoldConfig,
    pub map: MapConfig,
    pub epsilon: f64,
    /// Defaults to `map.blocks.kappa`.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Working radius; when absent, the largest rung `r_max 2^-k` on which
    /// the block bounds hold.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub radius_probe: RadiusProbeConfig,
    #[serde(default)]
    pub bound_grid: BoundGridConfig,
}

impl ProblemConfig {
    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(self.map.blocks().kappa)
    }

    /// Rejects `(kappa, epsilon)` pairs outside the contraction regime.
    pub fn validate(&self) -> Result<(), CliError> {
        let e = self.epsilon;
        let k = self.kappa();
        if !(e > 0.0 && e < 0.5) {
            return Err(CliError::Config(format!("epsilon = {e} must lie in (0, 1/2)")));
        }
        if !(0.0..1.0).contains(&k) {
            return Err(CliError::Config(format!("kappa = {k} must lie in [0, 1)")));
        }
        let rate = (k + 2.0 * e) / (1.0 - 2.0 * e);
        if !(rate < 1.0) || (k + 2.0 * e) * (1.0 + e) / (1.0 - 2.0 * e) > 1.0 {
            return Err(CliError::Config(format!(
                "kappa = {k}, epsilon = {e} give contraction rate {rate:.6}, not below 1"
            )));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::Config(format!("r = {r} must be positive")));
            }
        }
        if self.bound_grid.base_nodes == 0 || self.bound_grid.per_axis == 0 {
            return Err(CliError::Config("bound grid is empty".into()));
        }
        if let ManifoldConfig::Arc { lo, hi } = self.manifold {
            if !(hi > lo) {
                return Err(CliError::Config(format!("arc [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            manifold: ManifoldConfig::Circle,
            map: MapConfig::Shear {
                blocks: BlockSpec {
                    unstable: vec![2.0],
                    centre: vec![1.0],
                    stable: vec![0.5],
                    kappa: 0.5,
                    base_drift: 0.3,
                    stable_cubic: 0.2,
                },
                shear: ShearProfile {
                    amplitude: 0.1,
                    modulation: 0.5,
                    direction: vec![1.0],
                },
            },
            epsilon: 0.05,
            kappa: None,
            r: None,
            radius_probe: RadiusProbeConfig::default(),
            bound_grid: BoundGridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveGridConfig {
    pub base_nodes: usize,
    pub fibre_nodes: usize,
    #[serde(default)]
    pub fixed_point_tol: Option<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
}

impl Default for SolveGridConfig {
    fn default() -> Self {
        SolveGridConfig {
            base_nodes: 33,
            fibre_nodes: 33,
            fixed_point_tol: None,
            max_sweeps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveChecksConfig {
    pub contraction_pairs: usize,
    /// Slack on the contraction rate.
    pub contraction_slack: f64,
    pub invariance_samples: usize,
    /// Tangency step as a multiple of the fibre spacing (at least 2).
    pub tangency_spacing_factor: f64,
    pub oracle_tolerance: f64,
    /// Invariance residual allowed as a multiple of the oracle error.
    pub invariance_factor: f64,
}

impl Default for SolveChecksConfig {
    fn default() -> Self {
        SolveChecksConfig {
            contraction_pairs: 20,
            contraction_slack: 0.02,
            invariance_samples: 2000,
            tangency_spacing_factor: 2.0,
            oracle_tolerance: 5e-3,
            invariance_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: SolveGridConfig,
    #[serde(default)]
    pub checks: SolveChecksConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Matrix,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosScanConfig {
    pub mode: ScanMode,
    /// Target matrix rows.
    pub y: [[f64; 2]; 2],
    /// Chart matrix `A`; the base point is `(A, Y A^{-1})`.
    pub a: [[f64; 2]; 2],
    pub scan: ScanParams,
    #[serde(default)]
    pub bisect: Option<BisectConfig>,
}

impl Default for EosScanConfig {
    fn default() -> Self {
        EosScanConfig {
            mode: ScanMode::Matrix,
            y: [[2.0, 0.0], [0.0, 1.0]],
            a: [[1.0, 0.0], [0.0, 2.0]],
            scan: ScanParams {
                eta_min: 0.2,
                eta_max: 0.3,
                eta_steps: 64,
                delta: 1e-3,
                n_steps: 20_000,
                burn_in: 10_000,
            },
            bisect: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeryConfig {
    #[serde(default)]
    pub arc: ArcSurgeryConfig,
    pub frames: FrameChoice,
    #[serde(default)]
    pub base_nodes: Option<usize>,
    #[serde(default)]
    pub fibre_samples: Option<usize>,
}

impl Default for SurgeryConfig {
    fn default() -> Self {
        SurgeryConfig {
            arc: ArcSurgeryConfig::default(),
            frames: FrameChoice::SignRespecting,
            base_nodes: None,
            fibre_samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Bounds,
    Contraction,
    Oracle,
    EosSpectrum,
    LiftedSpectrum,
    Surgery,
    Clarke,
}

impl SuiteName {
    pub const ALL: [SuiteName; 7] = [
        SuiteName::Bounds,
        SuiteName::Contraction,
        SuiteName::Oracle,
        SuiteName::EosSpectrum,
        SuiteName::LiftedSpectrum,
        SuiteName::Surgery,
        SuiteName::Clarke,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub suites: Vec<SuiteName>,
    /// Replaces the surgery frames by the mixed-sign control.
    #[serde(default)]
    pub inject_violation: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suites: SuiteName::ALL.to_vec(),
            inject_violation: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeFunction {
    /// `|x|` componentwise.
    Abs,
    /// `x |x|` componentwise.
    XAbsX,
    /// `(max(x0, 0) + x1, x0 - max(x1, 0))`.
    Relu2,
    /// Top Gauss-Newton eigenvalue at `vec(W1, W2)`.
    Lambda1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub function: ProbeFunction,
    pub center: Vec<f64>,
    pub radius: f64,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            function: ProbeFunction::Abs,
            center: vec![0.0],
            radius: 0.1,
            count: 1000,
            seed: 0,
        }
    }
}
