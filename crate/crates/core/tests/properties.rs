mod common;

use proptest::prelude::*;
use shsa_core::bounds::{implicit_holds, min_n_chernoff, min_n_implicit, removal_count, BoundParams};
use shsa_core::jlss::{sample_scenario, simulate, Trajectory, X0Distribution};
use shsa_core::metrics::{distance, DistanceKind, DistanceSpec, PointMetric};
use shsa_core::scenario::assess_scalar;
use shsa_core::{DMatrix, DVector};

const HAUSDORFF: DistanceSpec =
    DistanceSpec { kind: DistanceKind::DirectionalHausdorff, point_metric: PointMetric::Euclidean };

fn path(values: &[f64]) -> Trajectory {
    let len = values.len() / 2;
    let grid = (0..len).map(|k| k as f64).collect();
    Trajectory::new(grid, DMatrix::from_column_slice(2, len, &values[..2 * len]), None).unwrap()
}

fn paths() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..20).prop_flat_map(|len| {
        let v = || prop::collection::vec(-10.0..10.0f64, 2 * len);
        (v(), v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sup_distance_is_a_metric((a, b, c) in paths()) {
        let (a, b, c) = (path(&a), path(&b), path(&c));
        let s = DistanceSpec::SUP_EUCLIDEAN;
        let ab = distance(s, &a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(distance(s, &a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab, distance(s, &b, &a).unwrap());
        let (ac, cb) = (distance(s, &a, &c).unwrap(), distance(s, &c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn hausdorff_is_dominated_by_sup((a, b, _) in paths()) {
        let (a, b) = (path(&a), path(&b));
        let h = distance(HAUSDORFF, &a, &b).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= distance(DistanceSpec::SUP_EUCLIDEAN, &a, &b).unwrap());
        prop_assert_eq!(distance(HAUSDORFF, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn scenario_grid_invariants(rate in 0.0..3.0f64, horizon in 0.1..5.0f64, steps in 1usize..200, seed: u64) {
        let x0 = X0Distribution::standard(2);
        let sc = sample_scenario(&x0, horizon, rate, horizon / steps as f64, seed).unwrap();
        prop_assert_eq!(sc.grid[0], 0.0);
        prop_assert_eq!(sc.horizon(), horizon);
        prop_assert!(sc.grid.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(sc.steps() >= steps);
        prop_assert_eq!(sc.jump_steps().len(), sc.jump_times.len());
        for (&k, &tau) in sc.jump_steps().iter().zip(&sc.jump_times) {
            prop_assert_eq!(sc.grid[k], tau);
        }
        prop_assert_eq!(sample_scenario(&x0, horizon, rate, horizon / steps as f64, seed).unwrap(), sc);
    }

    #[test]
    fn outputs_are_linear_in_the_initial_state(seed: u64, scale in -3.0..3.0f64) {
        let sys = common::six_state_system();
        let sc = sample_scenario(&X0Distribution::standard(6), 1.0, 0.5, 1e-2, seed).unwrap();
        let y = simulate(&sys, &sc).unwrap();
        let ys = simulate(&sys, &sc.with_x0(&sc.x0 * scale)).unwrap();
        let residual = (&ys.values - &y.values * scale).amax();
        prop_assert!(residual <= 1e-9 * (1.0 + y.values.amax() * scale.abs()));
        let zero = simulate(&sys, &sc.with_x0(DVector::zeros(6))).unwrap();
        prop_assert_eq!(zero.values.amax(), 0.0);
    }

    #[test]
    fn chernoff_dominates_implicit(
        eps in 0.05..0.4f64,
        frac in 0.0..0.9f64,
        log_beta in -12.0..-2.0f64,
        r in 2usize..50,
    ) {
        let p = BoundParams::new(eps, 10f64.powf(log_beta), frac * eps, r).unwrap();
        let implicit = min_n_implicit(&p).unwrap();
        let chernoff = min_n_chernoff(&p).unwrap();
        prop_assert!(chernoff >= implicit);
        prop_assert!(implicit_holds(&p, chernoff));
        prop_assert!(implicit_holds(&p, implicit));
        prop_assert!(implicit == 1 || !implicit_holds(&p, implicit - 1));
    }

    #[test]
    fn scalar_assessment_violates_exactly_floor_alpha_n(
        d in prop::collection::vec(0.0..100.0f64, 1..80),
        alpha in 0.0..0.9f64,
    ) {
        let sol = assess_scalar(&d, alpha).unwrap();
        let k = removal_count(alpha, d.len());
        let h = match sol.accuracy {
            shsa_core::scenario::AccuracyModel::Scalar(h) => h,
            _ => unreachable!(),
        };
        let violated = d.iter().filter(|&&x| x * x > h).count();
        prop_assert_eq!(sol.removed.len(), k);
        prop_assert!(violated <= k);
        let mut sorted: Vec<f64> = d.iter().map(|x| x * x).collect();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(h, sorted[d.len() - 1 - k]);
    }
}
