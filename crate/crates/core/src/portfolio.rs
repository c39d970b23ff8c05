//! Worst-case portfolio model: the market moves wealth continuously and
//! through occasional shocks, the investor rebalances by impulses, and the
//! value is the investor's discounted loss.
//!
//! The market is the maximizer (continuous weights and shock impulses), the
//! investor the minimizer.  Wealth `w` is the one-dimensional state with
//! `b(s,w;ω) = w·Σ ω_i r_i(s)` and jumps `g(s,w;ω') = Δ·w·Σ ω'_i r_i(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game_model::{Curve, GameProblem, ProportionalBase, ScalarSpec, VectorSpec};
use crate::grid_interp::{Regime, TimeSpaceGrid};
use crate::nash::{extract_equilibrium, NashStrategy};
use crate::game_model::TrajectoryRecord;
use crate::solver::{backward_sweep, SolveReport, SolverConfig};

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    /// Instantaneous return per unit time of each stock.
    pub returns: Vec<Curve>,
    /// Initial prices, reporting only.
    #[serde(default)]
    pub prices: Vec<f64>,
}

impl MarketModel {
    pub fn num_stocks(&self) -> usize {
        self.returns.len()
    }

    /// Sampled `max_i sup_s |r_i(s)|` on the given times.
    pub fn return_bound(&self, times: &[f64]) -> f64 {
        self.returns
            .iter()
            .flat_map(|r| times.iter().map(move |&s| r.eval(s).abs()))
            .fold(0.0, f64::max)
    }
}

/// Holding cost `l(w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HoldingCost {
    /// `weight·w²`.
    Quadratic { weight: f64 },
    /// `rate·w`.
    Linear { rate: f64 },
}

/// Utility `u(w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Utility {
    /// `scale·ln(w)` with `w` clipped to `[floor, ceiling]`.
    Log { scale: f64, floor: f64, ceiling: f64 },
    /// `rate·w`.
    Linear { rate: f64 },
}

/// `fixed + proportional·w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionCost {
    pub fixed: f64,
    #[serde(default)]
    pub proportional: f64,
}

/// Terminal gain `G(w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalGain {
    Linear { rate: f64 },
    Constant { value: f64 },
}

impl Default for TerminalGain {
    fn default() -> Self {
        TerminalGain::Constant { value: 0.0 }
    }
}

/// Candidate weight vectors per role; `None` roles use `shared`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightGrids {
    pub shared: Vec<Vec<f64>>,
    pub continuous: Option<Vec<Vec<f64>>>,
    pub market_impulses: Option<Vec<Vec<f64>>>,
    pub investor_impulses: Option<Vec<Vec<f64>>>,
}

impl WeightGrids {
    pub fn shared(weights: Vec<Vec<f64>>) -> Self {
        Self {
            shared: weights,
            continuous: None,
            market_impulses: None,
            investor_impulses: None,
        }
    }

    pub fn continuous(&self) -> &[Vec<f64>] {
        self.continuous.as_deref().unwrap_or(&self.shared)
    }
    pub fn market_impulses(&self) -> &[Vec<f64>] {
        self.market_impulses.as_deref().unwrap_or(&self.shared)
    }
    pub fn investor_impulses(&self) -> &[Vec<f64>] {
        self.investor_impulses.as_deref().unwrap_or(&self.shared)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    pub market: MarketModel,
    pub weights: WeightGrids,
    pub holding: HoldingCost,
    pub utility: Utility,
    /// Cost of a market shock impulse.
    pub market_cost: TransactionCost,
    /// Cost of an investor rebalancing impulse.
    pub investor_cost: TransactionCost,
    pub terminal: TerminalGain,
    pub discount: f64,
    pub horizon: (f64, f64),
    /// Length `Δ` of the return increment applied at an impulse.
    pub jump_scale: f64,
}

/// All weight vectors with entries `k/D`, `k ∈ {0..D}`, summing to one,
/// in lexicographic order of the numerators.
pub fn simplex_weights(num_stocks: usize, denominator: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, slots: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&k| k as f64 / d as f64).collect());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(left - k, slots - 1, d, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if num_stocks > 0 && denominator > 0 {
        rec(denominator, num_stocks, denominator, &mut Vec::new(), &mut out);
    }
    out
}

impl PortfolioProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.market.num_stocks();
        if n == 0 {
            return Err(GameError::config("market needs at least one stock"));
        }
        for r in &self.market.returns {
            r.validate()?;
        }
        if !self.market.prices.is_empty() && self.market.prices.len() != n {
            return Err(GameError::Dimension {
                context: "initial prices".into(),
                expected: n,
                found: self.market.prices.len(),
            });
        }
        if self.market.prices.iter().any(|&p| !(p > 0.0)) {
            return Err(GameError::config("initial prices must be positive"));
        }
        for (role, grid) in [
            ("continuous", self.weights.continuous()),
            ("market impulse", self.weights.market_impulses()),
            ("investor impulse", self.weights.investor_impulses()),
        ] {
            if grid.is_empty() {
                return Err(GameError::config(format!("{role} weight grid is empty")));
            }
            for w in grid {
                if w.len() != n {
                    return Err(GameError::Dimension {
                        context: format!("{role} weight vector"),
                        expected: n,
                        found: w.len(),
                    });
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL || w.iter().any(|&x| x < 0.0) {
                    return Err(GameError::config(format!(
                        "{role} weights {w:?} are not on the simplex (sum {sum})"
                    )));
                }
            }
        }
        for (who, c) in [("market", self.market_cost), ("investor", self.investor_cost)] {
            if !(c.fixed > 0.0) || c.proportional < 0.0 {
                return Err(GameError::config(format!(
                    "{who} transaction cost needs fixed > 0 and proportional ≥ 0"
                )));
            }
        }
        if let Utility::Log { floor, ceiling, .. } = self.utility {
            if !(floor > 0.0 && ceiling >= floor) {
                return Err(GameError::config("log utility needs 0 < floor ≤ ceiling"));
            }
        }
        if !(self.jump_scale >= 0.0) {
            return Err(GameError::config("jump_scale must be non-negative"));
        }
        Ok(())
    }
}

fn cost_spec(c: TransactionCost) -> ScalarSpec {
    ScalarSpec::FixedPlusProportional {
        fixed: c.fixed,
        proportional: c.proportional,
        base: ProportionalBase::State,
    }
}

/// The running gain `l(w) − u(w)` as a catalog function.
fn running_gain(pp: &PortfolioProblem) -> ScalarSpec {
    let holding = match pp.holding {
        HoldingCost::Quadratic { weight } => ScalarSpec::Quadratic {
            state_weight: vec![weight],
            state_center: vec![],
            control_weight: vec![],
            control_center: vec![],
            offset: 0.0,
        },
        HoldingCost::Linear { rate } => ScalarSpec::Affine {
            state: vec![rate],
            control: vec![],
            time: 0.0,
            offset: 0.0,
        },
    };
    let utility = match pp.utility {
        Utility::Log { scale, floor, ceiling } => ScalarSpec::LogState {
            scale: -scale,
            floor,
            ceiling,
            axis: 0,
        },
        Utility::Linear { rate } => ScalarSpec::Affine {
            state: vec![-rate],
            control: vec![],
            time: 0.0,
            offset: 0.0,
        },
    };
    ScalarSpec::Sum {
        terms: vec![holding, utility],
    }
}

/// Wealth game: state `w`, market = maximizer, investor = minimizer.
pub fn build_portfolio_game(pp: &PortfolioProblem) -> Result<GameProblem> {
    pp.validate()?;
    let returns = pp.market.returns.clone();
    let terminal = match pp.terminal {
        TerminalGain::Linear { rate } => ScalarSpec::Affine {
            state: vec![rate],
            control: vec![],
            time: 0.0,
            offset: 0.0,
        },
        TerminalGain::Constant { value } => ScalarSpec::Constant { value },
    };
    GameProblem::builder(1)
        .continuous_controls(pp.weights.continuous().to_vec())
        .max_impulses(pp.weights.market_impulses().to_vec())
        .min_impulses(pp.weights.investor_impulses().to_vec())
        .dynamics(VectorSpec::WealthWeighted {
            returns: returns.clone(),
            scale: 1.0,
        })
        .jump_max(VectorSpec::WealthWeighted {
            returns: returns.clone(),
            scale: pp.jump_scale,
        })
        .jump_min(VectorSpec::WealthWeighted {
            returns,
            scale: pp.jump_scale,
        })
        .running_gain(running_gain(pp))
        .cost_max(cost_spec(pp.market_cost))
        .cost_min(cost_spec(pp.investor_cost))
        .terminal_gain(terminal)
        .discount(pp.discount)
        .horizon(pp.horizon.0, pp.horizon.1)
        .build()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionStep {
    pub time: f64,
    pub wealth: f64,
    pub regime: Regime,
    /// Weights acting on this step: the market's continuous composition or
    /// the impulse weights of whoever intervened.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightImpulse {
    pub time: f64,
    pub index: usize,
    pub weights: Vec<f64>,
}

/// The investor's strategy and worst-case loss from the initial wealth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSummary {
    pub initial_time: f64,
    pub initial_wealth: f64,
    /// `v(t, w)`.
    pub worst_case_loss: f64,
    pub compositions: Vec<CompositionStep>,
    pub market_impulses: Vec<WeightImpulse>,
    pub investor_impulses: Vec<WeightImpulse>,
    /// `max |Σ ω_i − 1|` over every reported weight vector.
    pub max_weight_sum_error: f64,
    /// Sampled return bound times `h`; below one keeps Euler wealth positive.
    pub step_return_product: f64,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct PortfolioSolution {
    pub game: GameProblem,
    pub report: SolveReport,
    pub strategy: NashStrategy,
    pub trajectory: TrajectoryRecord,
    pub summary: PortfolioSummary,
}

/// Solve the wealth game on `grid` and package the extracted strategy.
pub fn solve_portfolio(
    pp: &PortfolioProblem,
    grid: &TimeSpaceGrid,
    config: &SolverConfig,
    initial_wealth: f64,
) -> Result<PortfolioSolution> {
    if grid.space_dim() != 1 {
        return Err(GameError::Dimension {
            context: "wealth grid".into(),
            expected: 1,
            found: grid.space_dim(),
        });
    }
    if !(grid.axes()[0][0] > 0.0) {
        return Err(GameError::config("wealth grid must be strictly positive"));
    }
    let game = build_portfolio_game(pp)?;
    let report = backward_sweep(&game, grid, config)?;
    let (strategy, trajectory) = extract_equilibrium(&game, &report, &[initial_wealth], config)?;
    let value = grid.interpolate(report.value_field.slice(0), &[initial_wealth])?;

    let cont = game.continuous_controls();
    let mut sum_err = 0.0f64;
    let mut note = |w: &[f64]| sum_err = sum_err.max((w.iter().sum::<f64>() - 1.0).abs());
    let mut compositions = Vec::with_capacity(strategy.continuous_timeline.len());
    let at_step = |list: &[crate::nash::TimedImpulse], d: usize| {
        list.iter().find(|e| e.step == d).map(|e| e.control.clone())
    };
    for (d, theta) in strategy.continuous_timeline.iter().enumerate() {
        let regime = trajectory.regimes[d];
        let weights = match (theta, regime) {
            (Some(k), _) => cont.get(*k).to_vec(),
            (None, Regime::MinImpulse) => at_step(&strategy.min_impulses, d).unwrap_or_default(),
            (None, _) => at_step(&strategy.max_impulses, d).unwrap_or_default(),
        };
        note(&weights);
        compositions.push(CompositionStep {
            time: strategy.times[d],
            wealth: trajectory.states[d][0],
            regime,
            weights,
        });
    }
    let lift = |list: &[crate::nash::TimedImpulse]| -> Vec<WeightImpulse> {
        list.iter()
            .map(|e| WeightImpulse {
                time: e.time,
                index: e.index,
                weights: e.control.clone(),
            })
            .collect()
    };
    let market_impulses = lift(&strategy.max_impulses);
    let investor_impulses = lift(&strategy.min_impulses);
    for e in market_impulses.iter().chain(&investor_impulses) {
        note(&e.weights);
    }
    let summary = PortfolioSummary {
        initial_time: grid.start(),
        initial_wealth,
        worst_case_loss: value,
        compositions,
        market_impulses,
        investor_impulses,
        max_weight_sum_error: sum_err,
        step_return_product: pp.market.return_bound(&grid.time_nodes()) * grid.step(),
        truncated: trajectory.truncated,
    };
    Ok(PortfolioSolution {
        game,
        report,
        strategy,
        trajectory,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_grid_enumerates_compositions() {
        let w = simplex_weights(2, 2);
        assert_eq!(w, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(simplex_weights(3, 4).len(), 15);
        for v in simplex_weights(4, 7) {
            assert!((v.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    fn two_asset() -> PortfolioProblem {
        PortfolioProblem {
            market: MarketModel {
                returns: vec![Curve::Constant { value: 0.1 }, Curve::Constant { value: -0.1 }],
                prices: vec![],
            },
            weights: WeightGrids::shared(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]),
            holding: HoldingCost::Linear { rate: 0.0 },
            utility: Utility::Linear { rate: 0.0 },
            market_cost: TransactionCost { fixed: 0.1, proportional: 0.0 },
            investor_cost: TransactionCost { fixed: 0.1, proportional: 0.0 },
            terminal: TerminalGain::default(),
            discount: 1.0,
            horizon: (0.0, 1.0),
            jump_scale: 0.25,
        }
    }

    #[test]
    fn drift_is_the_weighted_return() {
        let g = build_portfolio_game(&two_asset()).unwrap();
        let b = |w: &[f64]| g.dynamics().eval(0.0, &[2.0], w)[0];
        assert!((b(&[1.0, 0.0]) - 0.2).abs() < 1e-15);
        assert!((b(&[0.0, 1.0]) + 0.2).abs() < 1e-15);
        assert_eq!(b(&[0.5, 0.5]), 0.0);
    }

    #[test]
    fn off_simplex_weights_are_rejected() {
        let mut pp = two_asset();
        pp.weights = WeightGrids::shared(vec![vec![0.6, 0.6]]);
        assert!(build_portfolio_game(&pp).is_err());
        pp.weights = WeightGrids::shared(vec![]);
        assert!(build_portfolio_game(&pp).is_err());
        let mut pp = two_asset();
        pp.investor_cost.fixed = 0.0;
        assert!(build_portfolio_game(&pp).is_err());
    }
}
