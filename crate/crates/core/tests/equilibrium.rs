use impulse_game::game_model::{ControlPlan, GameProblem, ImpulseEvent, ScalarFn, ScalarSpec, VectorFn, VectorSpec};
use impulse_game::grid_interp::{BoundaryPolicy, Regime, TimeSpaceGrid};
use impulse_game::nash::{evaluate_payoff, extract_equilibrium, verify_equilibrium, VerifyOptions};
use impulse_game::solver::{backward_sweep, SolverConfig};

fn nodes(count: usize, h: f64) -> TimeSpaceGrid {
    TimeSpaceGrid::from_axes((0.0, 1.0), h, vec![(0..count).map(|k| k as f64 * 0.25).collect()], BoundaryPolicy::Clamp)
        .unwrap()
}

/// Drift equal to the control in {−1, 0, 1}, so with h = 1/4 every
/// Euler step lands on a node of the 0.25-spaced grid.
fn aligned(cost: f64) -> GameProblem {
    GameProblem::builder(1)
        .continuous_controls(vec![vec![-1.0], vec![0.0], vec![1.0]])
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .dynamics(VectorSpec::Affine {
            state: vec![],
            control: vec![vec![1.0]],
            time: vec![],
            offset: vec![],
        })
        .jump_max(VectorSpec::Reposition { fraction: 1.0 })
        .jump_min(VectorSpec::Reposition { fraction: 1.0 })
        .running_gain(ScalarSpec::Quadratic {
            state_weight: vec![-1.0],
            state_center: vec![1.5],
            control_weight: vec![-0.1],
            control_center: vec![],
            offset: 1.0,
        })
        .cost_max(ScalarSpec::Constant { value: cost })
        .cost_min(ScalarSpec::Constant { value: cost })
        .build()
        .unwrap()
}

#[test]
fn priced_out_impulses_give_a_pure_euler_path() {
    let p = aligned(100.0);
    let g = nodes(13, 0.25);
    let cfg = SolverConfig::with_step(0.25);
    let rep = backward_sweep(&p, &g, &cfg).unwrap();
    let (strategy, record) = extract_equilibrium(&p, &rep, &[1.0], &cfg).unwrap();
    assert!(strategy.max_impulses.is_empty() && strategy.min_impulses.is_empty());
    assert!(record.regimes[..4].iter().all(|r| *r == Regime::Continuous));
    for d in 0..4 {
        let theta = p.continuous_controls().get(strategy.continuous_timeline[d].unwrap())[0];
        assert_eq!(record.states[d + 1][0], record.states[d][0] + 0.25 * theta);
    }
    assert!(record.states[1][0] > 1.0, "the maximizer moves toward the peak of f at 1.5");
}

#[test]
fn path_values_follow_the_continuation_recursion() {
    let p = aligned(100.0);
    let g = nodes(13, 0.25);
    let cfg = SolverConfig::with_step(0.25);
    let rep = backward_sweep(&p, &g, &cfg).unwrap();
    let (strategy, record) = extract_equilibrium(&p, &rep, &[1.0], &cfg).unwrap();
    let h = 0.25;
    for i in 0..4 {
        let theta = p.continuous_controls().get(strategy.continuous_timeline[i].unwrap());
        let next = g.interpolate(rep.value_field.slice(i + 1), &record.states[i + 1]).unwrap();
        let rhs = (1.0 - h) * next + h * p.running_gain().eval(record.times[i], &record.states[i], theta);
        assert!((record.values[i] - rhs).abs() < 1e-8);
    }
}

#[test]
fn payoff_matches_value_on_aligned_continuous_path() {
    let p = aligned(100.0);
    let g = nodes(13, 0.25);
    let cfg = SolverConfig::with_step(0.25);
    let rep = backward_sweep(&p, &g, &cfg).unwrap();
    let ne = verify_equilibrium(&p, &rep, &[1.0], &VerifyOptions::default(), &cfg).unwrap();
    assert!(ne.payoff_gap <= 1e-6, "{ne:?}");
    assert!(ne.passed, "{ne:?}");
}

#[test]
fn cheap_minimizer_impulse_is_taken_first() {
    // b ≡ 0, f grows with y, jumping down to 0.5 costs little
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![1.0]])
        .min_impulses(vec![vec![0.5]])
        .jump_max(VectorSpec::Reposition { fraction: 1.0 })
        .jump_min(VectorSpec::Reposition { fraction: 1.0 })
        .running_gain(ScalarSpec::Affine {
            state: vec![4.0],
            control: vec![],
            time: 0.0,
            offset: 0.0,
        })
        .cost_max(ScalarSpec::Constant { value: 100.0 })
        .cost_min(ScalarSpec::Constant { value: 0.01 })
        .build()
        .unwrap();
    let g = nodes(13, 0.25);
    let cfg = SolverConfig::with_step(0.25);
    let rep = backward_sweep(&p, &g, &cfg).unwrap();
    let start = [2.5];
    let (strategy, record) = extract_equilibrium(&p, &rep, &start, &cfg).unwrap();
    // the test along the path: Φ·H⁻ at the start beats continuing
    let v0 = g.interpolate(rep.value_field.slice(0), &start).unwrap();
    let phi = (-0.25f64).exp();
    let jump_value = phi * (g.interpolate(rep.value_field.slice(0), &[0.5]).unwrap() + 0.01);
    assert!((v0 - jump_value).abs() < 1e-8);
    let first = &strategy.min_impulses[0];
    assert_eq!((first.step, first.time, first.index), (0, 0.0, 0));
    assert_eq!(record.states[1][0], 0.5);
}

#[test]
fn discrete_payoff_examples() {
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .running_gain(ScalarSpec::Constant { value: 1.0 })
        .build()
        .unwrap();
    let plan = ControlPlan {
        continuous: vec![vec![0.0]; 2],
        ..Default::default()
    };
    assert!((evaluate_payoff(&p, (0.0, &[0.0]), &plan, 0.5).unwrap() - 0.75).abs() < 1e-15);

    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .cost_min(ScalarSpec::Constant { value: 2.0 })
        .build()
        .unwrap();
    let lone = ControlPlan {
        continuous: vec![vec![0.0]; 4],
        min_impulses: vec![ImpulseEvent {
            time: 0.0,
            control: vec![-0.5],
            index: Some(0),
        }],
        ..Default::default()
    };
    assert_eq!(evaluate_payoff(&p, (0.0, &[0.0]), &lone, 0.25).unwrap(), 2.0);
}

#[test]
fn gratuitous_minimizer_impulse_costs_its_discounted_price() {
    let p = GameProblem::builder(1)
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .running_gain(ScalarSpec::Constant { value: 1.0 })
        .cost_min(ScalarSpec::Constant { value: 0.3 })
        .build()
        .unwrap();
    let h = 0.25;
    let base = ControlPlan {
        continuous: vec![vec![0.0]; 4],
        ..Default::default()
    };
    let j0 = evaluate_payoff(&p, (0.0, &[0.0]), &base, h).unwrap();
    for d in 0..4 {
        let mut plan = base.clone();
        plan.min_impulses.push(ImpulseEvent {
            time: d as f64 * h,
            control: vec![-0.5],
            index: Some(0),
        });
        let j = evaluate_payoff(&p, (0.0, &[0.0]), &plan, h).unwrap();
        assert!(j > j0);
        assert!((j - j0 - (1.0 - h).powi(d) * 0.3).abs() < 1e-14);
    }
}

#[test]
fn single_theta_deviations_lower_the_maximizer_payoff() {
    // b ≡ 0 and f concave in θ with its peak at θ = 0
    let p = GameProblem::builder(1)
        .continuous_controls(vec![vec![-1.0], vec![0.0], vec![1.0]])
        .max_impulses(vec![vec![0.5]])
        .min_impulses(vec![vec![-0.5]])
        .running_gain(ScalarFn::custom(|_, y, th| y[0] - th[0] * th[0]))
        .cost_max(ScalarSpec::Constant { value: 1e3 })
        .cost_min(ScalarSpec::Constant { value: 1e3 })
        .dynamics(VectorFn::zero())
        .build()
        .unwrap();
    let g = nodes(5, 0.25);
    let cfg = SolverConfig::with_step(0.25);
    let rep = backward_sweep(&p, &g, &cfg).unwrap();
    let (strategy, _) = extract_equilibrium(&p, &rep, &[0.5], &cfg).unwrap();
    let plan = strategy.to_plan(&p);
    let j_star = evaluate_payoff(&p, (0.0, &[0.5]), &plan, 0.25).unwrap();
    for d in 0..plan.continuous.len() {
        for theta in [-1.0, 1.0] {
            let mut dev = plan.clone();
            dev.continuous[d] = vec![theta];
            assert!(evaluate_payoff(&p, (0.0, &[0.5]), &dev, 0.25).unwrap() < j_star);
        }
    }
}
