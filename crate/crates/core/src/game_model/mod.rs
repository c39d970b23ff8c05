//! Game instances as data, plus sampled audits of the standing assumptions.
//!
//! A [`GameProblem`] bundles the state dynamics, the two jump maps, the
//! running gain, both impulse costs and the terminal gain together with the
//! discount rate, horizon, damping function and the finite candidate grids
//! each player chooses from.  It is immutable once built.

mod audit;
pub mod catalog;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use audit::{validate_assumptions, validate_assumptions_with, AssumptionId, AssumptionReport, AuditOptions, Violation};
pub use catalog::{Curve, ProportionalBase, ScalarFn, ScalarSpec, VectorFn, VectorSpec};
pub use trajectory::{simulate_trajectory, ControlPlan, ImpulseEvent, TrajectoryRecord};

use crate::error::{GameError, Result};

/// Finite set of candidate control vectors of a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    dim: usize,
    points: Vec<f64>,
}

impl ControlGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.is_empty() || dim == 0 {
            return Err(GameError::config("control grid must contain at least one non-empty vector"));
        }
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(GameError::Dimension {
                    context: "control grid element".into(),
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(GameError::config("control grid entries must be finite"));
            }
            flat.extend_from_slice(p);
        }
        Ok(Self { dim, points: flat })
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, index: usize) -> &[f64] {
        &self.points[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    fn contains_zero(&self) -> Option<usize> {
        self.iter().position(|p| p.iter().all(|&v| v == 0.0))
    }
}

/// The damping function applied to both impulse operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Damping {
    /// `exp(-λh)`.
    #[default]
    Exponential,
    /// `1 / (1 + λh)`.
    Rational,
    /// A fixed factor independent of `h`.
    Constant { value: f64 },
}

impl Damping {
    pub fn factor(&self, discount: f64, h: f64) -> f64 {
        match *self {
            Damping::Exponential => (-discount * h).exp(),
            Damping::Rational => 1.0 / (1.0 + discount * h),
            Damping::Constant { value } => value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: f64,
    pub end: f64,
}

impl Horizon {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// A fully specified instance of the impulse game.
#[derive(Clone, Debug)]
pub struct GameProblem {
    state_dim: usize,
    continuous_controls: ControlGrid,
    max_impulses: ControlGrid,
    min_impulses: ControlGrid,
    dynamics: VectorFn,
    jump_max: VectorFn,
    jump_min: VectorFn,
    running_gain: ScalarFn,
    cost_max: ScalarFn,
    cost_min: ScalarFn,
    terminal_gain: ScalarFn,
    discount: f64,
    horizon: Horizon,
    damping: Damping,
}

impl GameProblem {
    pub fn builder(state_dim: usize) -> GameProblemBuilder {
        GameProblemBuilder::new(state_dim)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
    pub fn continuous_controls(&self) -> &ControlGrid {
        &self.continuous_controls
    }
    pub fn max_impulses(&self) -> &ControlGrid {
        &self.max_impulses
    }
    pub fn min_impulses(&self) -> &ControlGrid {
        &self.min_impulses
    }
    pub fn dynamics(&self) -> &VectorFn {
        &self.dynamics
    }
    pub fn jump_max(&self) -> &VectorFn {
        &self.jump_max
    }
    pub fn jump_min(&self) -> &VectorFn {
        &self.jump_min
    }
    pub fn running_gain(&self) -> &ScalarFn {
        &self.running_gain
    }
    pub fn cost_max(&self) -> &ScalarFn {
        &self.cost_max
    }
    pub fn cost_min(&self) -> &ScalarFn {
        &self.cost_min
    }
    pub fn terminal_gain(&self) -> &ScalarFn {
        &self.terminal_gain
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }
    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
    pub fn damping(&self) -> Damping {
        self.damping
    }

    #[inline]
    pub fn terminal(&self, y: &[f64]) -> f64 {
        self.terminal_gain.eval(self.horizon.end, y, &[])
    }

    /// `Φ(h)` for this problem's discount rate.
    pub fn damping_factor(&self, h: f64) -> f64 {
        self.damping.factor(self.discount, h)
    }

    /// Per-step continuation factor `1 − λh`.
    pub fn step_discount(&self, h: f64) -> f64 {
        1.0 - self.discount * h
    }

    /// Checks `0 < Φ(h) < 1` and `λh < 1`; with `allow_large_step == false`
    /// the stricter `λh ≤ 1/2` is enforced as well.
    pub fn check_step(&self, h: f64, allow_large_step: bool) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GameError::config(format!("time step must be positive, got {h}")));
        }
        let lh = self.discount * h;
        if lh >= 1.0 {
            return Err(GameError::config(format!(
                "λh = {lh} must be below 1 (λ = {}, h = {h})",
                self.discount
            )));
        }
        if !allow_large_step && lh > 0.5 {
            return Err(GameError::config(format!(
                "λh = {lh} exceeds 1/2; choose h ≤ {} or set allow_large_step",
                0.5 / self.discount
            )));
        }
        let phi = self.damping_factor(h);
        if !(phi > 0.0 && phi < 1.0) {
            return Err(GameError::config(format!("damping Φ(h) = {phi} must lie in (0, 1)")));
        }
        Ok(())
    }

    /// Same problem with a different horizon start, used when re-solving a
    /// sub-interval.
    pub fn with_horizon(&self, start: f64, end: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(end > start) || start < 0.0 {
            return Err(GameError::config("horizon must satisfy 0 ≤ t < T"));
        }
        p.horizon = Horizon { start, end };
        Ok(p)
    }

    pub fn with_damping(&self, damping: Damping) -> Self {
        let mut p = self.clone();
        p.damping = damping;
        p
    }
}

/// Builder for [`GameProblem`]; unset model functions default to zero
/// dynamics, zero gains and unit impulse costs.
#[derive(Clone, Debug)]
pub struct GameProblemBuilder {
    state_dim: usize,
    continuous_controls: Option<Vec<Vec<f64>>>,
    max_impulses: Option<Vec<Vec<f64>>>,
    min_impulses: Option<Vec<Vec<f64>>>,
    dynamics: VectorFn,
    jump_max: VectorFn,
    jump_min: VectorFn,
    running_gain: ScalarFn,
    cost_max: ScalarFn,
    cost_min: ScalarFn,
    terminal_gain: ScalarFn,
    discount: f64,
    horizon: Horizon,
    damping: Damping,
}

impl GameProblemBuilder {
    fn new(state_dim: usize) -> Self {
        Self {
            state_dim,
            continuous_controls: None,
            max_impulses: None,
            min_impulses: None,
            dynamics: VectorFn::zero(),
            jump_max: VectorFn::zero(),
            jump_min: VectorFn::zero(),
            running_gain: ScalarFn::constant(0.0),
            cost_max: ScalarFn::constant(1.0),
            cost_min: ScalarFn::constant(1.0),
            terminal_gain: ScalarFn::constant(0.0),
            discount: 1.0,
            horizon: Horizon { start: 0.0, end: 1.0 },
            damping: Damping::Exponential,
        }
    }

    pub fn continuous_controls(mut self, grid: Vec<Vec<f64>>) -> Self {
        self.continuous_controls = Some(grid);
        self
    }
    pub fn max_impulses(mut self, grid: Vec<Vec<f64>>) -> Self {
        self.max_impulses = Some(grid);
        self
    }
    pub fn min_impulses(mut self, grid: Vec<Vec<f64>>) -> Self {
        self.min_impulses = Some(grid);
        self
    }
    pub fn dynamics(mut self, f: impl Into<VectorFn>) -> Self {
        self.dynamics = f.into();
        self
    }
    pub fn jump_max(mut self, f: impl Into<VectorFn>) -> Self {
        self.jump_max = f.into();
        self
    }
    pub fn jump_min(mut self, f: impl Into<VectorFn>) -> Self {
        self.jump_min = f.into();
        self
    }
    pub fn running_gain(mut self, f: impl Into<ScalarFn>) -> Self {
        self.running_gain = f.into();
        self
    }
    pub fn cost_max(mut self, f: impl Into<ScalarFn>) -> Self {
        self.cost_max = f.into();
        self
    }
    pub fn cost_min(mut self, f: impl Into<ScalarFn>) -> Self {
        self.cost_min = f.into();
        self
    }
    pub fn terminal_gain(mut self, f: impl Into<ScalarFn>) -> Self {
        self.terminal_gain = f.into();
        self
    }
    pub fn discount(mut self, lambda: f64) -> Self {
        self.discount = lambda;
        self
    }
    pub fn horizon(mut self, start: f64, end: f64) -> Self {
        self.horizon = Horizon { start, end };
        self
    }
    pub fn damping(mut self, damping: Damping) -> Self {
        self.damping = damping;
        self
    }

    pub fn build(self) -> Result<GameProblem> {
        let n = self.state_dim;
        if n == 0 {
            return Err(GameError::config("state dimension must be positive"));
        }
        if !(self.discount > 0.0) || !self.discount.is_finite() {
            return Err(GameError::config("discount λ must be positive"));
        }
        let Horizon { start, end } = self.horizon;
        if !(start >= 0.0 && end > start && end.is_finite()) {
            return Err(GameError::config("horizon must satisfy 0 ≤ t < T < ∞"));
        }
        if let Damping::Constant { value } = self.damping {
            if !(value > 0.0 && value < 1.0) {
                return Err(GameError::config("constant damping must lie in (0, 1)"));
            }
        }
        let continuous = ControlGrid::new(self.continuous_controls.unwrap_or_else(|| vec![vec![0.0]]))?;
        let max_impulses = ControlGrid::new(
            self.max_impulses
                .ok_or_else(|| GameError::config("maximizer impulse grid is required"))?,
        )?;
        let min_impulses = ControlGrid::new(
            self.min_impulses
                .ok_or_else(|| GameError::config("minimizer impulse grid is required"))?,
        )?;
        for (name, grid) in [("maximizer", &max_impulses), ("minimizer", &min_impulses)] {
            if let Some(k) = grid.contains_zero() {
                return Err(GameError::config(format!(
                    "{name} impulse grid element {k} is the zero vector; impulses must be non-zero"
                )));
            }
        }
        let l = continuous.dim();
        let validate_vec = |name: &str, f: &VectorFn, m: usize| -> Result<()> {
            match f.spec() {
                Some(spec) => spec.validate(n, m).map_err(|e| prefixed(name, e)),
                None => Ok(()),
            }
        };
        let validate_scalar = |name: &str, f: &ScalarFn, m: usize| -> Result<()> {
            match f.spec() {
                Some(spec) => spec.validate(n, m).map_err(|e| prefixed(name, e)),
                None => Ok(()),
            }
        };
        validate_vec("dynamics", &self.dynamics, l)?;
        validate_vec("jump_max", &self.jump_max, max_impulses.dim())?;
        validate_vec("jump_min", &self.jump_min, min_impulses.dim())?;
        validate_scalar("running_gain", &self.running_gain, l)?;
        validate_scalar("cost_max", &self.cost_max, max_impulses.dim())?;
        validate_scalar("cost_min", &self.cost_min, min_impulses.dim())?;
        validate_scalar("terminal_gain", &self.terminal_gain, 0)?;

        Ok(GameProblem {
            state_dim: n,
            continuous_controls: continuous,
            max_impulses,
            min_impulses,
            dynamics: self.dynamics,
            jump_max: self.jump_max,
            jump_min: self.jump_min,
            running_gain: self.running_gain,
            cost_max: self.cost_max,
            cost_min: self.cost_min,
            terminal_gain: self.terminal_gain,
            discount: self.discount,
            horizon: self.horizon,
            damping: self.damping,
        })
    }
}

fn prefixed(name: &str, err: GameError) -> GameError {
    match err {
        GameError::Config(msg) => GameError::Config(format!("{name}: {msg}")),
        GameError::Dimension { context, expected, found } => GameError::Dimension {
            context: format!("{name}: {context}"),
            expected,
            found,
        },
        other => other,
    }
}
