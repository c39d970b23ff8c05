use impulse_game::game_model::{
    simulate_trajectory, validate_assumptions, validate_assumptions_with, AssumptionId, AuditOptions, ControlPlan,
    GameProblem, ImpulseEvent, ScalarSpec, VectorSpec,
};
use impulse_game::grid_interp::{build_grid, AxisSpec, BoundaryPolicy, TimeSpaceGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line_grid(lo: f64, hi: f64, count: usize, h: f64) -> TimeSpaceGrid {
    build_grid((0.0, 1.0), h, &[AxisSpec { lo, hi, count }], BoundaryPolicy::Error).unwrap()
}

#[test]
fn zero_model_audit() {
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .build()
        .unwrap();
    let r = validate_assumptions(&p, &line_grid(-1.0, 1.0, 5, 0.25)).unwrap();
    assert_eq!(r.bound_m_estimate, 0.0);
    assert_eq!(r.cost_infimum, 1.0);
    assert!(r.terminal_no_impulse_ok);
    assert!(r.is_clean());
}

#[test]
fn tiny_cost_fails_positive_infimum() {
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![1e-9], vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .cost_max(ScalarSpec::FixedPlusProportional {
            fixed: 0.0,
            proportional: 1.0,
            base: Default::default(),
        })
        .build()
        .unwrap();
    let opts = AuditOptions {
        cost_tolerance: 1e-6,
        ..AuditOptions::default()
    };
    let r = validate_assumptions_with(&p, &line_grid(-1.0, 1.0, 5, 0.25), &opts).unwrap();
    assert!(r.cost_infimum <= 1e-9 + 1e-18);
    assert!(r.violations.iter().any(|v| v.assumption == AssumptionId::ImpulseCosts));
}

#[test]
fn profitable_terminal_impulse_is_flagged() {
    // G(y) = y, ξ = +0.5, c = 0.1: G(y + ξ) − c = y + 0.4 > G(y)
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .jump_max(VectorSpec::Affine {
            state: vec![],
            control: vec![vec![1.0]],
            time: vec![],
            offset: vec![],
        })
        .cost_max(ScalarSpec::Constant { value: 0.1 })
        .terminal_gain(ScalarSpec::Affine {
            state: vec![1.0],
            control: vec![],
            time: 0.0,
            offset: 0.0,
        })
        .build()
        .unwrap();
    let r = validate_assumptions(&p, &line_grid(0.0, 1.0, 5, 0.25)).unwrap();
    assert!(!r.terminal_no_impulse_ok);
    assert!(r.violations.iter().any(|v| v.assumption == AssumptionId::TerminalGain));
}

#[test]
fn bounded_drift_path_estimate() {
    // |b| ≤ 2 forces |y(s) − x| ≤ 2s
    let p = GameProblem::builder(1)
        .continuous_controls(vec![vec![-2.0], vec![2.0]])
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .dynamics(VectorSpec::Affine {
            state: vec![],
            control: vec![vec![1.0]],
            time: vec![],
            offset: vec![],
        })
        .build()
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 0.05;
    for _ in 0..50 {
        let plan = ControlPlan {
            continuous: (0..20).map(|_| vec![if rng.random_bool(0.5) { 2.0 } else { -2.0 }]).collect(),
            ..Default::default()
        };
        let rec = simulate_trajectory(&p, (0.0, &[0.0]), &plan, h, None).unwrap();
        for (s, y) in rec.times.iter().zip(&rec.states) {
            if *s <= 0.5 + 1e-12 {
                assert!(y[0].abs() <= 2.0 * s + 1e-12);
            }
        }
    }
}

#[test]
fn minimizer_jump_at_start() {
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.3]])
        .jump_min(VectorSpec::Affine {
            state: vec![],
            control: vec![vec![1.0]],
            time: vec![],
            offset: vec![],
        })
        .build()
        .unwrap();
    let plan = ControlPlan {
        continuous: vec![vec![0.0]; 4],
        min_impulses: vec![ImpulseEvent {
            time: 0.0,
            control: vec![-0.3],
            index: Some(0),
        }],
        ..Default::default()
    };
    let rec = simulate_trajectory(&p, (0.0, &[1.0]), &plan, 0.25, None).unwrap();
    assert!((rec.states[1][0] - 0.7).abs() < 1e-15);
}

#[test]
fn grid_examples() {
    let g = build_grid((0.0, 1.0), 0.25, &[AxisSpec { lo: 0.0, hi: 2.0, count: 5 }], BoundaryPolicy::Error).unwrap();
    assert_eq!(g.time_count(), 5);
    assert_eq!(g.axes()[0], vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    assert!(build_grid((0.0, 1.0), 0.3, &[AxisSpec { lo: 0.0, hi: 2.0, count: 5 }], BoundaryPolicy::Error).is_err());
    let g2 = build_grid((0.0, 2.0), 0.5, &[AxisSpec { lo: 0.0, hi: 1.0, count: 2 }], BoundaryPolicy::Error).unwrap();
    assert_eq!(g2.time_nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
}

#[test]
fn interpolation_examples() {
    let g = line_grid(0.0, 1.0, 2, 0.5);
    assert_eq!(g.interpolate(&[2.0, 4.0], &[0.5]).unwrap(), 3.0);
    let g = line_grid(0.0, 2.0, 5, 0.5);
    let slice = [0.1, -3.7, 1.0 / 3.0, 9.0, 2.5];
    assert_eq!(g.interpolate(&slice, &[1.0]).unwrap(), 1.0 / 3.0);
    assert!(g.interpolate(&slice, &[2.5]).is_err());
    let clamp = g.with_boundary(BoundaryPolicy::Clamp);
    assert_eq!(clamp.interpolate(&slice, &[2.5]).unwrap(), 2.5);
}

#[test]
fn bilinear_reproduces_affine_at_random_points() {
    let g = build_grid(
        (0.0, 1.0),
        0.5,
        &[AxisSpec { lo: -1.0, hi: 2.0, count: 7 }, AxisSpec { lo: 0.0, hi: 1.0, count: 4 }],
        BoundaryPolicy::Error,
    )
    .unwrap();
    let (a, b, c) = (0.7, -1.3, 2.2);
    let slice: Vec<f64> = g.nodes().iter().map(|y| a + b * y[0] + c * y[1]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let y = [rng.random_range(-1.0..2.0), rng.random_range(0.0..1.0)];
        let v = g.interpolate(&slice, &y).unwrap();
        assert!((v - (a + b * y[0] + c * y[1])).abs() < 1e-13);
    }
}
