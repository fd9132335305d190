use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blend::{
    blend_local, patch_partition, random_partition, rotate_columns, signed_splitting, splitting_frame, Chart,
    PatchedMap, SubBundle,
};
use super::collar::{build_collar, CollarSpec};
use super::SurgeryError;
use crate::extension::BundleMap;
use crate::manifold::{make_arc_model, make_shear_benchmark, BlockSpec, ShearMap, ShearProfile};

/// Arc benchmark for the boundary modification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSurgeryConfig {
    pub arc: (f64, f64),
    pub depth: f64,
    pub r: Option<f64>,
    pub blocks: BlockSpec,
    pub shear: ShearProfile,
    pub charts_per_end: usize,
    pub seed: u64,
}

impl Default for ArcSurgeryConfig {
    fn default() -> Self {
        ArcSurgeryConfig {
            arc: (PI / 4.0, 3.0 * PI / 4.0),
            depth: 0.1,
            r: None,
            blocks: BlockSpec {
                unstable: vec![2.0],
                centre: vec![1.0, -1.0],
                stable: vec![0.5],
                kappa: 0.5,
                base_drift: 0.3,
                stable_cubic: 0.0,
            },
            shear: ShearProfile {
                amplitude: 0.1,
                modulation: 0.5,
                direction: vec![1.0],
            },
            charts_per_end: 3,
            seed: 0,
        }
    }
}

/// How chart frames are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameChoice {
    /// Eigenbases of `Df` with random sign flips; respects `E_c^+-`, `E_u^+-`.
    SignRespecting,
    /// The `E_c^+` and `E_c^-` columns rotated into each other by a random
    /// angle per chart; respects only `E_u | E_c | E_s`.
    MixedCentre,
}

pub struct SurgeryBuild {
    pub collar: CollarSpec,
    pub f: Arc<ShearMap>,
    pub patched: PatchedMap,
}

/// Builds `f` on `S''`, the collar, random charts and partition, and `f'`.
pub fn build_arc_surgery(cfg: &ArcSurgeryConfig, frames: FrameChoice) -> Result<SurgeryBuild, SurgeryError> {
    if cfg.charts_per_end == 0 {
        return Err(SurgeryError::InvalidInput("need at least one chart per end".into()));
    }
    let ranks = cfg.blocks.ranks()?;
    let model = make_arc_model(cfg.arc.0, cfg.arc.1, ranks)?;
    let collar = build_collar(&model, cfg.depth, cfg.r)?;
    let bench = make_shear_benchmark(&collar.model_s_double, cfg.blocks.clone(), cfg.shear.clone())?;
    let f: Arc<dyn BundleMap> = bench.map.clone();
    let partition = random_partition(cfg.charts_per_end, collar.r, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut blends = Vec::with_capacity(partition.intervals.len());
    for &(end, interval) in &partition.intervals {
        let x = collar.boundary(end);
        let split = signed_splitting(&f.normal_linearization(x))?;
        let (mut frame, labels) = splitting_frame(&split);
        for j in 0..frame.ncols() {
            if rng.random_bool(0.5) {
                let c = -frame.column(j).into_owned();
                frame.set_column(j, &c);
            }
        }
        if frames == FrameChoice::MixedCentre {
            let ip = labels.iter().position(|l| *l == SubBundle::CentrePlus);
            let im = labels.iter().position(|l| *l == SubBundle::CentreMinus);
            match (ip, im) {
                (Some(i), Some(j)) => {
                    frame = rotate_columns(&frame, i, j, rng.random_range(0.2..1.2));
                }
                _ => {
                    return Err(SurgeryError::InvalidInput(
                        "mixed frames need both E_c^+ and E_c^-".into(),
                    ))
                }
            }
        }
        let chart = Chart {
            end,
            interval,
            frame,
            labels,
        };
        blends.push(blend_local(
            f.clone(),
            &collar,
            chart,
            frames == FrameChoice::SignRespecting,
        )?);
    }
    let patched = patch_partition(f, &collar, blends, partition)?;
    Ok(SurgeryBuild {
        collar,
        f: bench.map,
        patched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::BundlePoint;
    use crate::surgery::{verify_surgery, End, VerifyGrid};

    fn small_grid() -> VerifyGrid {
        VerifyGrid {
            base_nodes: 16,
            fibre_samples: 8,
            margin: 2.0,
            seed: 1,
        }
    }

    #[test]
    fn sign_respecting_surgery_passes() {
        let cfg = ArcSurgeryConfig::default();
        let b = build_arc_surgery(&cfg, FrameChoice::SignRespecting).unwrap();
        let rep = verify_surgery(&b.patched, b.f.as_ref(), &b.collar, cfg.blocks.kappa, &small_grid()).unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert!(rep.original_boundary_drift > 1e-6);
    }

    #[test]
    fn mixed_frames_break_only_the_spectral_item() {
        let cfg = ArcSurgeryConfig::default();
        let b = build_arc_surgery(&cfg, FrameChoice::MixedCentre).unwrap();
        let rep = verify_surgery(&b.patched, b.f.as_ref(), &b.collar, cfg.blocks.kappa, &small_grid()).unwrap();
        for k in 1..=4 {
            assert!(rep.item(k).pass, "item {k}: {:?}", rep.item(k));
        }
        assert!(!rep.item(5).pass);
        assert!(rep.item(5).value > 1e-3);
    }

    #[test]
    fn boundary_fibre_bases_are_frozen() {
        let cfg = ArcSurgeryConfig::default();
        let b = build_arc_surgery(&cfg, FrameChoice::SignRespecting).unwrap();
        let r = b.collar.r;
        for blend in &b.patched.blends {
            let x = blend.boundary();
            let p = BundlePoint::from_slice(x, &[0.3 * r, -0.2 * r, 0.1 * r, 0.25 * r]);
            let y = blend.eval_at(&p, 0.0);
            assert_eq!(y.base, x);
        }
        let x = b.collar.boundary(End::Upper);
        let p = BundlePoint::from_slice(x, &[0.0, 0.0, 0.0, 0.45 * r]);
        assert!((b.patched.eval(&p).base - x).abs() <= 1e-12);
    }

    #[test]
    fn outside_the_tube_is_untouched() {
        let cfg = ArcSurgeryConfig::default();
        let b = build_arc_surgery(&cfg, FrameChoice::MixedCentre).unwrap();
        let r = b.collar.r;
        let x = b.collar.boundary(End::Lower);
        for p in [
            BundlePoint::from_slice(x, &[r, 0.0, 0.0, 0.0]),
            BundlePoint::from_slice(x + r, &[0.1 * r, 0.0, 0.0, 0.0]),
            BundlePoint::from_slice(1.5, &[0.1 * r, 0.2 * r, 0.0, 0.0]),
        ] {
            assert_eq!(b.patched.eval(&p), b.f.eval(&p));
        }
    }

    #[test]
    fn trivial_blend_changes_nothing() {
        let mut cfg = ArcSurgeryConfig::default();
        cfg.blocks.base_drift = 0.0;
        cfg.shear.amplitude = 0.0;
        let b = build_arc_surgery(&cfg, FrameChoice::SignRespecting).unwrap();
        let rep = verify_surgery(&b.patched, b.f.as_ref(), &b.collar, cfg.blocks.kappa, &small_grid()).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.original_boundary_drift, 0.0);
        for it in &rep.items {
            assert!(it.value <= 1e-8);
        }
    }
}
