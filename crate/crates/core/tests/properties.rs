use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use centerforge::cli::config::ProblemConfig;
use centerforge::cli::pipeline::{bounds_at, build_bundle, safe_radii, working_radius, Bundle};
use centerforge::eos::{
    bad_set_gap, classify_trajectory, lambda1, to_vec8, ClassifierThresholds, ScalarQuadratic, ScanParams,
    TrajectoryClass,
};
use centerforge::extension::{phi, ExtendedMap};
use centerforge::nonsmooth::{
    clarke_opnorm, clarke_sigma_min, hull_sigma_min, lambda1_field, lip_vs_clarke_check, sample_jacobians,
    semicontinuity_probe, ProbeReport,
};
use centerforge::transform::{
    base_speed, contraction_ratio, random_admissible_section, section_grid, TransformConfig, TransformError,
};

fn relu2(v: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![v[0].max(0.0) + v[1], v[0] - v[1].max(0.0)])
}

fn slopes_minus_one_three(v: &DVector<f64>) -> DVector<f64> {
    v.map(|a| if a >= 0.0 { 3.0 * a } else { -a })
}

struct Benchmark {
    bundle: Bundle,
    ext: ExtendedMap,
    r: f64,
}

fn benchmark() -> &'static Benchmark {
    static B: OnceLock<Benchmark> = OnceLock::new();
    B.get_or_init(|| {
        let p = ProblemConfig::default();
        let bundle = build_bundle(&p).unwrap();
        let radii = safe_radii(&bundle, &p, 0).unwrap();
        let r = working_radius(&bundle, &p, &radii).unwrap();
        let (ext, _) = bounds_at(&bundle, &p, &radii, r).unwrap();
        Benchmark { bundle, ext, r }
    })
}

fn scan_params() -> ScanParams {
    ScanParams {
        eta_min: 0.1,
        eta_max: 3.0,
        eta_steps: 2,
        delta: 1e-3,
        n_steps: 20_000,
        burn_in: 10_000,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clarke_norm_grows_with_sample_count(
        seed in any::<u64>(),
        x0 in -1.0..1.0f64,
        x1 in -1.0..1.0f64,
        small in 8usize..48,
        extra in 1usize..48,
    ) {
        let x = DVector::from_vec(vec![x0, x1]);
        let a = sample_jacobians(&relu2, &x, 0.5, small, seed).unwrap();
        let b = sample_jacobians(&relu2, &x, 0.5, small + extra, seed).unwrap();
        prop_assert!(clarke_opnorm(&a).unwrap() <= clarke_opnorm(&b).unwrap());
        prop_assert_eq!(&b.points[..a.points.len()], &a.points[..]);
    }

    #[test]
    fn smooth_maps_have_a_single_jacobian(
        entries in prop::array::uniform4(-2.0..2.0f64),
        x0 in -3.0..3.0f64,
        x1 in -3.0..3.0f64,
        seed in any::<u64>(),
    ) {
        let a = DMatrix::from_row_slice(2, 2, &entries);
        let f = |v: &DVector<f64>| &a * v + v.map(|t| 0.1 * t.sin());
        let x = DVector::from_vec(vec![x0, x1]);
        let want = &a + DMatrix::from_diagonal(&x.map(|t| 0.1 * t.cos()));
        let set = sample_jacobians(&f, &x, 1e-4, 16, seed).unwrap();
        prop_assert_eq!(set.discarded, 0);
        for j in &set.jacobians {
            prop_assert!((j - &want).amax() < 1e-5);
        }
    }

    #[test]
    fn bad_set_detects_scaled_rotations(angle in 0.0..std::f64::consts::TAU, scale in 0.2..3.0f64, t in 0.05..1.0f64) {
        let rot = Matrix2::new(angle.cos(), -angle.sin(), angle.sin(), angle.cos());
        let w1 = rot * scale;
        let w2 = Matrix2::new(1.0 + t, 0.0, 0.0, 1.0) * rot;
        let gap = bad_set_gap(&w1, &w2);
        prop_assert!(gap.is_member);
        prop_assert!(gap.g1 <= 1e-12);
        prop_assert!((gap.g2 - t).abs() <= 1e-12);
        // lambda_1 = |W2|^2 + |W1|^2 with both norms known in closed form
        prop_assert!((lambda1(&w1, &w2) - (scale * scale + (1.0 + t).powi(2))).abs() <= 1e-12);
    }

    #[test]
    fn cutoff_is_monotone_between_one_and_two(t in 0.0..3.0f64, dt in 0.0..0.5f64) {
        let v = phi(t);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(phi(t + dt) <= v);
        if t <= 1.0 {
            prop_assert_eq!(v, 1.0);
        }
        if t >= 2.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn scalar_descent_splits_at_two(below in 0.05..1.95f64, above in 2.05..2.9f64) {
        let th = ClassifierThresholds::default();
        let p = scan_params();
        let lo = classify_trajectory(&ScalarQuadratic, &[0.0], &[1.0], below, &p, &th);
        let hi = classify_trajectory(&ScalarQuadratic, &[0.0], &[1.0], above, &p, &th);
        prop_assert_eq!(lo.class, TrajectoryClass::Converged);
        prop_assert_ne!(hi.class, TrajectoryClass::Converged);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn graph_transform_contracts(seed in any::<u64>(), l1 in 0.1..1.0f64, l2 in 0.1..1.0f64) {
        let b = benchmark();
        let (eps, kappa) = (0.05, 0.5);
        let tc = TransformConfig::new(b.r, eps, kappa, 9, 9);
        let grid = section_grid(&b.bundle.model, &tc).unwrap();
        let ranks = b.bundle.model.ranks();
        let speed = base_speed(&b.bundle.model);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = random_admissible_section(&grid, b.r, ranks, l1, speed, &mut rng);
        let s2 = random_admissible_section(&grid, b.r, ranks, l2, speed, &mut rng);
        match contraction_ratio(&b.ext, &s1, &s2, &tc) {
            Ok(q) => prop_assert!(q <= (kappa + 2.0 * eps) / (1.0 - 2.0 * eps) + 0.02, "ratio {}", q),
            Err(TransformError::IdenticalSections) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }
}

#[test]
fn relu2_samples_every_branch() {
    let set = sample_jacobians(&relu2, &DVector::zeros(2), 0.1, 400, 5).unwrap();
    for (a, b) in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
        let m = DMatrix::from_row_slice(2, 2, &[a, 1.0, 1.0, -b]);
        assert!(set.contains_near(&m, 1e-9), "missing branch {m}");
    }
}

#[test]
fn hull_minimum_can_fall_below_the_sample_minimum() {
    let set = sample_jacobians(&slopes_minus_one_three, &DVector::zeros(1), 0.1, 200, 1).unwrap();
    assert!((clarke_sigma_min(&set).unwrap() - 1.0).abs() < 1e-9);
    assert!((clarke_opnorm(&set).unwrap() - 3.0).abs() < 1e-9);
    // 0 = (3/4)(-1) + (1/4)(3) lies in the hull
    assert!(hull_sigma_min(&set, 4, 400).unwrap() < 1e-9);
    let rep = ProbeReport::from_set(&set);
    assert!(rep.caveats.iter().any(|c| c.contains("infimum over the convex hull")));
}

#[test]
fn x_abs_x_lipschitz_matches_clarke_sup() {
    let f = |v: &DVector<f64>| v.map(|a| a * a.abs());
    let c = lip_vs_clarke_check(&f, &[(-1.0, 1.0)], 10_000, 99).unwrap();
    assert!(c.gap <= 1e-3, "gap {}", c.gap);
    assert!(c.consistent(1e-3));
}

#[test]
fn lambda1_clarke_norm_is_upper_semicontinuous_at_identity() {
    let y = Matrix2::new(2.0, 0.0, 0.0, 1.0);
    let x = DVector::from_column_slice(to_vec8(&Matrix2::identity(), &y).as_slice());
    let rep = semicontinuity_probe(&lambda1_field, &x, &[0.1, 0.05, 0.025], 4, 64, 20.0, 8).unwrap();
    assert_eq!(rep.violations, 0, "{:?}", rep.rungs);
}
