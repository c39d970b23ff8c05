use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game_model::{Curve, Damping, GameProblem, ScalarSpec, VectorSpec};
use crate::grid_interp::{build_grid, AxisSpec, BoundaryPolicy, TimeSpaceGrid};
use crate::nash::VerifyOptions;
use crate::portfolio::{
    simplex_weights, HoldingCost, MarketModel, PortfolioProblem, TerminalGain, TransactionCost, Utility,
    WeightGrids,
};
use crate::solver::SolverConfig;

/// The whole run configuration, one TOML document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: Option<ProblemSection>,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub refine: RefineSection,
    pub portfolio: Option<PortfolioSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub state_dim: usize,
    #[serde(default = "one")]
    pub discount: f64,
    #[serde(default = "unit_horizon")]
    pub horizon: [f64; 2],
    #[serde(default)]
    pub damping: Damping,
    pub continuous_controls: Vec<Vec<f64>>,
    pub max_impulses: Vec<Vec<f64>>,
    pub min_impulses: Vec<Vec<f64>>,
    #[serde(default = "zero_vector")]
    pub dynamics: VectorSpec,
    #[serde(default = "zero_vector")]
    pub jump_max: VectorSpec,
    #[serde(default = "zero_vector")]
    pub jump_min: VectorSpec,
    #[serde(default = "zero_scalar")]
    pub running_gain: ScalarSpec,
    #[serde(default = "unit_scalar")]
    pub cost_max: ScalarSpec,
    #[serde(default = "unit_scalar")]
    pub cost_min: ScalarSpec,
    #[serde(default = "zero_scalar")]
    pub terminal_gain: ScalarSpec,
    /// Start state for extraction and verification; defaults to the centre
    /// of the space box.
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    /// Uniform axes; exclusive with `nodes`.
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    /// Explicit node lists per axis.
    #[serde(default)]
    pub nodes: Vec<Vec<f64>>,
    #[serde(default)]
    pub boundary: BoundaryPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySection {
    pub deviations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        Self {
            deviations: d.deviations,
            tolerance: d.tolerance,
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineSection {
    /// Strictly decreasing steps; each a multiple of the last.
    pub h_list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSection {
    pub returns: Vec<Curve>,
    #[serde(default)]
    pub prices: Vec<f64>,
    /// Simplex resolution `D` for the shared weight grid when `weights` is absent.
    pub resolution: Option<usize>,
    pub weights: Option<Vec<Vec<f64>>>,
    pub continuous_weights: Option<Vec<Vec<f64>>>,
    pub market_weights: Option<Vec<Vec<f64>>>,
    pub investor_weights: Option<Vec<Vec<f64>>>,
    pub holding: Option<HoldingCost>,
    /// Log utility defaults to clipping at the wealth box.
    pub utility: Option<Utility>,
    pub market_cost: TransactionCost,
    pub investor_cost: TransactionCost,
    #[serde(default)]
    pub terminal: TerminalGain,
    #[serde(default = "one")]
    pub discount: f64,
    #[serde(default = "unit_horizon")]
    pub horizon: [f64; 2],
    /// Return increment length at impulses; defaults to the time step.
    pub jump_scale: Option<f64>,
    pub initial_wealth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: String,
    pub emit_plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "output".into(),
            emit_plots: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn unit_horizon() -> [f64; 2] {
    [0.0, 1.0]
}
fn zero_vector() -> VectorSpec {
    VectorSpec::Zero
}
fn zero_scalar() -> ScalarSpec {
    ScalarSpec::Constant { value: 0.0 }
}
fn unit_scalar() -> ScalarSpec {
    ScalarSpec::Constant { value: 1.0 }
}

const DEFAULT_HOLDING_WEIGHT: f64 = 0.01;
const DEFAULT_LOG_SCALE: f64 = 0.1;

impl RunConfig {
    /// Parse TOML; any key the schema does not know is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))?;
        if !unknown.is_empty() {
            return Err(GameError::UnknownKeys(unknown));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| GameError::config(format!("{} is not UTF-8: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }

    pub fn horizon(&self) -> Result<(f64, f64)> {
        match (&self.problem, &self.portfolio) {
            (_, Some(p)) => Ok((p.horizon[0], p.horizon[1])),
            (Some(p), None) => Ok((p.horizon[0], p.horizon[1])),
            (None, None) => Err(GameError::config("config needs a [problem] or [portfolio] section")),
        }
    }

    /// The grid at the configured solver step.
    pub fn build_grid(&self) -> Result<TimeSpaceGrid> {
        self.grid_at(self.solver.h)
    }

    pub fn grid_at(&self, h: f64) -> Result<TimeSpaceGrid> {
        let horizon = self.horizon()?;
        let g = &self.grid;
        match (g.axes.is_empty(), g.nodes.is_empty()) {
            (false, true) => build_grid(horizon, h, &g.axes, g.boundary),
            (true, false) => TimeSpaceGrid::from_axes(horizon, h, g.nodes.clone(), g.boundary),
            _ => Err(GameError::config("[grid] needs exactly one of `axes` or `nodes`")),
        }
    }

    pub fn build_problem(&self) -> Result<GameProblem> {
        if self.portfolio.is_some() {
            let grid = self.build_grid()?;
            return crate::portfolio::build_portfolio_game(&self.portfolio_problem(&grid)?);
        }
        let p = self
            .problem
            .as_ref()
            .ok_or_else(|| GameError::config("config needs a [problem] section"))?;
        GameProblem::builder(p.state_dim)
            .continuous_controls(p.continuous_controls.clone())
            .max_impulses(p.max_impulses.clone())
            .min_impulses(p.min_impulses.clone())
            .dynamics(p.dynamics.clone())
            .jump_max(p.jump_max.clone())
            .jump_min(p.jump_min.clone())
            .running_gain(p.running_gain.clone())
            .cost_max(p.cost_max.clone())
            .cost_min(p.cost_min.clone())
            .terminal_gain(p.terminal_gain.clone())
            .discount(p.discount)
            .horizon(p.horizon[0], p.horizon[1])
            .damping(p.damping)
            .build()
    }

    /// Start state: configured, the initial wealth, or the box centre.
    pub fn initial_state(&self, grid: &TimeSpaceGrid) -> Vec<f64> {
        if let Some(p) = &self.portfolio {
            return vec![p.initial_wealth];
        }
        if let Some(x) = self.problem.as_ref().and_then(|p| p.initial_state.clone()) {
            return x;
        }
        grid.axes().iter().map(|a| 0.5 * (a[0] + a[a.len() - 1])).collect()
    }

    pub fn portfolio_problem(&self, grid: &TimeSpaceGrid) -> Result<PortfolioProblem> {
        let p = self
            .portfolio
            .as_ref()
            .ok_or_else(|| GameError::config("config needs a [portfolio] section"))?;
        if grid.space_dim() != 1 {
            return Err(GameError::Dimension {
                context: "portfolio wealth grid".into(),
                expected: 1,
                found: grid.space_dim(),
            });
        }
        let n = p.returns.len();
        let shared = match (&p.weights, p.resolution) {
            (Some(w), None) => w.clone(),
            (None, Some(d)) => simplex_weights(n, d),
            (None, None) => simplex_weights(n, 1),
            (Some(_), Some(_)) => {
                return Err(GameError::config("[portfolio] takes `weights` or `resolution`, not both"))
            }
        };
        let axis = &grid.axes()[0];
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        Ok(PortfolioProblem {
            market: MarketModel {
                returns: p.returns.clone(),
                prices: p.prices.clone(),
            },
            weights: WeightGrids {
                shared,
                continuous: p.continuous_weights.clone(),
                market_impulses: p.market_weights.clone(),
                investor_impulses: p.investor_weights.clone(),
            },
            holding: p.holding.unwrap_or(HoldingCost::Quadratic {
                weight: DEFAULT_HOLDING_WEIGHT,
            }),
            utility: p.utility.unwrap_or(Utility::Log {
                scale: DEFAULT_LOG_SCALE,
                floor: lo.max(f64::MIN_POSITIVE),
                ceiling: hi,
            }),
            market_cost: p.market_cost,
            investor_cost: p.investor_cost,
            terminal: p.terminal,
            discount: p.discount,
            horizon: (p.horizon[0], p.horizon[1]),
            jump_scale: p.jump_scale.unwrap_or(grid.step()),
        })
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            deviations: self.verify.deviations,
            tolerance: self.verify.tolerance,
            seed: self.verify.seed,
        }
    }
}
