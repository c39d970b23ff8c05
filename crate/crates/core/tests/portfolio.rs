mod common;

use common::{interp, max_abs_diff};
use impulse_game::game_model::{simulate_trajectory, ControlPlan, Curve};
use impulse_game::grid_interp::{build_grid, AxisSpec, BoundaryPolicy, TimeSpaceGrid};
use impulse_game::portfolio::{
    build_portfolio_game, simplex_weights, solve_portfolio, HoldingCost, MarketModel, PortfolioProblem,
    TerminalGain, TransactionCost, Utility, WeightGrids,
};
use impulse_game::solver::SolverConfig;

fn wealth_grid(lo: f64, hi: f64, count: usize) -> TimeSpaceGrid {
    build_grid((0.0, 1.0), 0.25, &[AxisSpec { lo, hi, count }], BoundaryPolicy::Clamp).unwrap()
}

fn desk(returns: Vec<Curve>, market_fixed: f64, investor_fixed: f64) -> PortfolioProblem {
    let n = returns.len();
    PortfolioProblem {
        market: MarketModel { returns, prices: vec![] },
        weights: WeightGrids::shared(simplex_weights(n, 2)),
        holding: HoldingCost::Quadratic { weight: 0.01 },
        utility: Utility::Log {
            scale: 0.1,
            floor: 0.5,
            ceiling: 1.5,
        },
        market_cost: TransactionCost {
            fixed: market_fixed,
            proportional: 0.01,
        },
        investor_cost: TransactionCost {
            fixed: investor_fixed,
            proportional: 0.005,
        },
        terminal: TerminalGain::Linear { rate: -1.0 },
        discount: 0.5,
        horizon: (0.0, 1.0),
        jump_scale: 0.25,
    }
}

fn two_stocks() -> Vec<Curve> {
    vec![
        Curve::Constant { value: 0.08 },
        Curve::Table {
            times: vec![0.0, 1.0],
            values: vec![-0.1, 0.2],
        },
    ]
}

/// Continuation recursion alone: max over market weights, no impulses.
fn continuous_worst_case(pp: &PortfolioProblem, grid: &TimeSpaceGrid) -> Vec<f64> {
    let game = build_portfolio_game(pp).unwrap();
    let nodes = grid.axes()[0].clone();
    let h = grid.step();
    let mut v: Vec<f64> = nodes.iter().map(|&w| game.terminal(&[w])).collect();
    for i in (0..grid.time_count() - 1).rev() {
        let s = grid.time(i);
        v = nodes
            .iter()
            .map(|&w| {
                game.continuous_controls()
                    .iter()
                    .map(|om| {
                        let b = game.dynamics().eval(s, &[w], om)[0];
                        (1.0 - pp.discount * h) * interp(&nodes, &v, w + h * b)
                            + h * game.running_gain().eval(s, &[w], om)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    v
}

#[test]
fn single_asset_compounds() {
    let mut pp = desk(vec![Curve::Constant { value: 0.2 }], 1.0, 1.0);
    pp.weights = WeightGrids::shared(vec![vec![1.0]]);
    let game = build_portfolio_game(&pp).unwrap();
    let plan = ControlPlan {
        continuous: vec![vec![1.0]; 8],
        ..Default::default()
    };
    let rec = simulate_trajectory(&game, (0.0, &[1.0]), &plan, 0.125, None).unwrap();
    for (k, w) in rec.states.iter().enumerate() {
        assert!((w[0] - (1.0 + 0.125 * 0.2f64).powi(k as i32)).abs() < 1e-14);
    }
}

#[test]
fn dead_market_keeps_wealth_still() {
    let pp = PortfolioProblem {
        terminal: TerminalGain::Constant { value: 0.0 },
        ..desk(vec![Curve::Constant { value: 0.0 }, Curve::Constant { value: 0.0 }], 0.05, 0.05)
    };
    let game = build_portfolio_game(&pp).unwrap();
    for om in game.continuous_controls().iter() {
        assert_eq!(game.dynamics().eval(0.3, &[1.2], om)[0], 0.0);
        assert_eq!(game.jump_max().eval(0.3, &[1.2], om)[0], 0.0);
    }
    let grid = wealth_grid(0.5, 1.5, 9);
    let sol = solve_portfolio(&pp, &grid, &SolverConfig::with_step(0.25), 1.0).unwrap();
    // f(w) = 0.01 w² − 0.1 ln w constant along the path
    let f = 0.01 - 0.1 * 1.0f64.ln();
    let a: f64 = 1.0 - 0.5 * 0.25;
    let expected = 0.25 * f * (0..4).map(|k| a.powi(k)).sum::<f64>();
    assert!((sol.summary.worst_case_loss - expected).abs() < 1e-8);
    assert!(sol.trajectory.states.iter().all(|w| w[0] == 1.0));
}

#[test]
fn priced_out_costs_reduce_to_the_continuous_worst_case() {
    let pp = desk(two_stocks(), 1e3, 1e3);
    let grid = wealth_grid(0.5, 1.5, 9);
    let sol = solve_portfolio(&pp, &grid, &SolverConfig::with_step(0.25), 1.0).unwrap();
    assert!(sol.summary.market_impulses.is_empty() && sol.summary.investor_impulses.is_empty());
    let oracle = continuous_worst_case(&pp, &grid);
    assert!(max_abs_diff(sol.report.value_field.slice(0), &oracle) < 1e-10);
}

#[test]
fn investor_only_rebalancing() {
    let pp = desk(two_stocks(), 1e3, 0.001);
    let grid = wealth_grid(0.5, 1.5, 9);
    let sol = solve_portfolio(&pp, &grid, &SolverConfig::with_step(0.25), 1.0).unwrap();
    assert!(sol.summary.market_impulses.is_empty());
    for c in &sol.summary.compositions {
        assert_ne!(c.regime, impulse_game::grid_interp::Regime::MaxImpulse);
    }
}

#[test]
fn extracted_weights_lie_on_the_grid_and_sum_to_one() {
    let pp = desk(two_stocks(), 0.02, 0.01);
    let grid = wealth_grid(0.5, 1.5, 9);
    let sol = solve_portfolio(&pp, &grid, &SolverConfig::with_step(0.25), 1.0).unwrap();
    let allowed = simplex_weights(2, 2);
    for c in &sol.summary.compositions {
        assert!(allowed.contains(&c.weights), "{:?}", c.weights);
    }
    for e in sol.summary.market_impulses.iter().chain(&sol.summary.investor_impulses) {
        assert!(allowed.contains(&e.weights));
    }
    assert!(sol.summary.max_weight_sum_error <= 1e-12);
    assert!(sol.summary.step_return_product < 1.0);
    assert!(sol.trajectory.states.iter().all(|w| w[0] > 0.0));
}

#[test]
fn linear_model_scales_with_wealth() {
    let linear = |scale: f64| PortfolioProblem {
        holding: HoldingCost::Linear { rate: 0.02 },
        utility: Utility::Linear { rate: 0.05 },
        terminal: TerminalGain::Linear { rate: -1.0 },
        market_cost: TransactionCost {
            fixed: 0.02 * scale,
            proportional: 0.01,
        },
        investor_cost: TransactionCost {
            fixed: 0.01 * scale,
            proportional: 0.005,
        },
        ..desk(two_stocks(), 1.0, 1.0)
    };
    let cfg = SolverConfig {
        tolerance: 1e-13,
        max_iterations: 100_000,
        ..SolverConfig::with_step(0.25)
    };
    let small = solve_portfolio(&linear(1.0), &wealth_grid(0.5, 1.5, 9), &cfg, 1.0).unwrap();
    let large = solve_portfolio(&linear(2.0), &wealth_grid(1.0, 3.0, 9), &cfg, 2.0).unwrap();
    let doubled: Vec<f64> = small.report.value_field.values().iter().map(|v| 2.0 * v).collect();
    let d = max_abs_diff(large.report.value_field.values(), &doubled);
    assert!(d < 1e-11, "{d:e}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let grid = wealth_grid(0.0, 1.5, 9);
    let pp = desk(two_stocks(), 0.02, 0.01);
    assert!(solve_portfolio(&pp, &grid, &SolverConfig::with_step(0.25), 1.0).is_err());
    let mut empty = pp.clone();
    empty.weights = WeightGrids::shared(vec![]);
    assert!(build_portfolio_game(&empty).is_err());
}
