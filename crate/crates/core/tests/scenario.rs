use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shsa_core::convex::Tolerances;
use shsa_core::jlss::{BasisTrajectories, Trajectory, X0Distribution};
use shsa_core::scenario::{
    assess_quadratic, assess_scalar, design_init_map, remove_constraints, scalar_program, AccuracyKind, AccuracyModel,
    DesignSample, InitialState, MomentData, RemovalRule, RemovalSettings,
};
use shsa_core::{DMatrix, DVector, Error, Sequential};

fn greedy() -> RemovalSettings {
    RemovalSettings::new(RemovalRule::Greedy, 0)
}

#[test]
fn greedy_on_ten_values() {
    let d: Vec<f64> = (1..=10).map(|v| (v as f64).sqrt()).collect();
    let out = remove_constraints(&scalar_program(&d), 2, &greedy(), &Sequential).unwrap();
    assert!((out.solution.objective - 8.0).abs() < 1e-12);
    assert_eq!(out.removed, vec![8, 9]);
}

#[test]
fn order_statistics_examples() {
    let sol = assess_scalar(&[3.0, 1.0, 2.0], 1.0 / 3.0).unwrap();
    assert_eq!(sol.accuracy, AccuracyModel::Scalar(4.0));
    assert_eq!(sol.removed, vec![0]);
    let sol = assess_scalar(&[3.0, 1.0, 2.0], 0.0).unwrap();
    assert_eq!(sol.objective, 9.0);
    assert!(sol.removed.is_empty());
    assert!(matches!(assess_scalar(&[], 0.1), Err(Error::Empty)));
}

#[test]
fn no_removal_solves_the_full_problem() {
    let d = [0.5, 2.0, 1.5];
    let out = remove_constraints(&scalar_program(&d), 0, &greedy(), &Sequential).unwrap();
    assert_eq!(out.solution.objective, 4.0);
    assert!(out.removed.is_empty());
    assert_eq!(out.objective_history.len(), 1);
}

#[test]
fn every_rule_removes_exactly_the_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..3.0)).collect();
    for rule in [RemovalRule::Greedy, RemovalRule::Random, RemovalRule::Block] {
        let settings = RemovalSettings::new(rule, 5);
        let out = remove_constraints(&scalar_program(&d), 9, &settings, &Sequential).unwrap();
        assert_eq!(out.removed.len(), 9, "{rule:?}");
        for (i, di) in d.iter().enumerate() {
            let violated = di * di > out.solution.objective;
            assert_eq!(violated, out.removed.contains(&i), "{rule:?} {i}");
        }
        assert!(out.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn single_scenario_quadratic_closed_form() {
    let x0 = DVector::from_vec(vec![0.4, -1.2, 0.7]);
    let d = 1.3;
    let moments = MomentData::from_distribution(&X0Distribution::standard(3));
    let states = [InitialState::continuous(x0.clone())];
    let sol = assess_quadratic(&states, &[d], 0.0, &moments, &greedy(), &Sequential).unwrap();
    let zz = x0.norm_squared() + 1.0;
    assert!((sol.objective - d * d / zz).abs() < 1e-6);
    // with standard moments the objective is the trace of Θ
    let AccuracyModel::QuadraticPerMode(t) = &sol.accuracy else { panic!() };
    assert!((t[0].trace() - sol.objective).abs() < 1e-9);
}

#[test]
fn quadratic_invariants_hold_after_removal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 2;
    let states: Vec<InitialState> =
        (0..80).map(|_| InitialState::continuous(DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5)))).collect();
    let d: Vec<f64> =
        states.iter().map(|s| s.continuous.norm() * rng.random_range(0.5..1.5) + rng.random_range(0.0..0.3)).collect();
    let moments = MomentData::from_distribution(&X0Distribution::standard(n));
    for rule in [RemovalRule::Greedy, RemovalRule::Random, RemovalRule::Block] {
        let settings = RemovalSettings::new(rule, 9);
        let sol = assess_quadratic(&states, &d, 0.1, &moments, &settings, &Sequential).unwrap();
        assert_eq!(sol.removed.len(), 8);
        let AccuracyModel::QuadraticPerMode(t) = &sol.accuracy else { panic!() };
        assert!(t[0].clone().symmetric_eigen().eigenvalues.min() >= -1e-8);
        for (i, s) in states.iter().enumerate() {
            let h = sol.accuracy.evaluate(s.continuous.as_slice(), 0).unwrap();
            let violated = d[i] * d[i] > h * (1.0 + 1e-8) + 1e-8;
            assert_eq!(violated, sol.removed.contains(&i), "{rule:?} scenario {i}");
        }
        assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()));
    }
}

#[test]
fn unknown_mode_is_rejected() {
    let moments = MomentData::from_distribution(&X0Distribution::standard(1));
    let states = [InitialState { continuous: DVector::from_vec(vec![1.0]), mode: 2 }];
    let r = assess_quadratic(&states, &[1.0], 0.0, &moments, &greedy(), &Sequential);
    assert!(matches!(r, Err(Error::UnknownMode(2))));
}

fn one_step_sample(x0: f64, y: [f64; 2], xi1: [f64; 4]) -> (InitialState, Trajectory, BasisTrajectories) {
    let grid = vec![0.0, 1.0];
    let ys = Trajectory::new(grid.clone(), DMatrix::from_row_slice(1, 2, &y), None).unwrap();
    let basis = BasisTrajectories { grid, xi: vec![DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &xi1)] };
    (InitialState::continuous(DVector::from_vec(vec![x0])), ys, basis)
}

#[test]
fn two_scenario_design_matches_grid_search() {
    let data = [
        one_step_sample(1.0, [1.0, 0.4], [0.5, 0.2, -0.1, 0.9]),
        one_step_sample(-0.6, [-0.5, 0.3], [1.1, 0.0, 0.3, 0.4]),
    ];
    let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.5]);
    let samples: Vec<DesignSample> =
        data.iter().map(|(s, y, b)| DesignSample { state: s, system_output: y, basis: b }).collect();
    let sol = design_init_map(&samples, &c, 0.0, &AccuracyKind::Scalar, &greedy(), &Sequential).unwrap();

    let worst = |l: [f64; 2]| {
        let mut m: f64 = 0.0;
        for (s, y, b) in &data {
            let w = DVector::from_vec(vec![l[0] * s.continuous[0], l[1] * s.continuous[0]]);
            for t in 0..2 {
                let r = y.values[(0, t)] - (&c * &b.xi[t] * &w)[0];
                m = m.max(r * r);
            }
        }
        m
    };
    let (mut center, mut radius, mut best) = ([0.0, 0.0], 4.0, f64::INFINITY);
    for _ in 0..40 {
        let mut next = center;
        for i in -50..=50 {
            for j in -50..=50 {
                let l = [center[0] + radius * i as f64 / 50.0, center[1] + radius * j as f64 / 50.0];
                let v = worst(l);
                if v < best {
                    best = v;
                    next = l;
                }
            }
        }
        center = next;
        radius /= 3.0;
    }
    assert!((sol.objective - best).abs() < 1e-6, "{} vs {best}", sol.objective);
    let l = sol.init_map.unwrap();
    assert!((worst([l[(0, 0)], l[(1, 0)]]) - best).abs() < 1e-6);
}

#[test]
fn exact_match_design_has_zero_accuracy() {
    // model equals the system: L = I reproduces the outputs exactly
    let xi1 = [0.9, 0.1, -0.2, 0.8];
    let c = DMatrix::from_row_slice(1, 2, &[1.0, -0.5]);
    let mut data = Vec::new();
    for x0 in [[1.0, 0.5], [-0.3, 0.8], [0.2, -1.0]] {
        let xi = DMatrix::from_row_slice(2, 2, &xi1);
        let x = DVector::from_vec(x0.to_vec());
        let y = [(&c * &x)[0], (&c * &xi * &x)[0]];
        let grid = vec![0.0, 1.0];
        data.push((
            InitialState::continuous(x),
            Trajectory::new(grid.clone(), DMatrix::from_row_slice(1, 2, &y), None).unwrap(),
            BasisTrajectories { grid, xi: vec![DMatrix::identity(2, 2), xi] },
        ));
    }
    let samples: Vec<DesignSample> =
        data.iter().map(|(s, y, b)| DesignSample { state: s, system_output: y, basis: b }).collect();
    let sol = design_init_map(&samples, &c, 0.0, &AccuracyKind::Scalar, &greedy(), &Sequential).unwrap();
    assert!(sol.objective < 1e-7, "{}", sol.objective);
}

#[test]
fn oracle_equivalence_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let settings = RemovalSettings { solver: Tolerances::default(), ..greedy() };
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let alpha = rng.random_range(0.0..0.5);
        let sorted = assess_scalar(&d, alpha).unwrap();
        let k = sorted.removed.len();
        let out = remove_constraints(&scalar_program(&d), k, &settings, &Sequential).unwrap();
        assert_eq!(out.solution.objective, sorted.objective);
        assert_eq!(out.removed, sorted.removed);
    }
}
