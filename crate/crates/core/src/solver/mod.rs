//! Backward sweep over time slices, slice-level value and policy iteration,
//! and step-refinement studies.

mod iteration;
mod refine;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use iteration::{
    policy_iteration_max, policy_iteration_min, value_iteration, Iterate, PolicyOutcome, Side, SliceOperator,
};
pub use refine::{refinement_study, RefinementRow, RefinementTable};

use crate::error::{GameError, Result};
use crate::game_model::GameProblem;
use crate::grid_interp::{BoundaryPolicy, NodePolicy, Regime, TimeSpaceGrid, ValueField};
use crate::operators::SliceKernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Time step; must equal the grid step.
    pub h: f64,
    /// Fixed-point and policy-loop tolerance ε.
    pub tolerance: f64,
    /// Cap for every inner loop.
    pub max_iterations: usize,
    /// Dead band for the regime tests along the extracted path; `None`
    /// means the solver tolerance.
    pub switch_tolerance: Option<f64>,
    pub record_convergence: bool,
    /// Permit `1/2 < λh < 1`.
    pub allow_large_step: bool,
    /// Read path values from the nearest grid node instead of
    /// interpolating at the exact path point.
    pub nearest_node: bool,
    /// Optional initial maximizer placeholder impulse index.
    pub max_placeholder: Option<usize>,
    /// Optional initial minimizer placeholder impulse index.
    pub min_placeholder: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.1,
            tolerance: 1e-8,
            max_iterations: 10_000,
            switch_tolerance: None,
            record_convergence: false,
            allow_large_step: false,
            nearest_node: false,
            max_placeholder: None,
            min_placeholder: None,
        }
    }
}

impl SolverConfig {
    pub fn with_step(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    pub fn switch_tolerance(&self) -> f64 {
        self.switch_tolerance.unwrap_or(self.tolerance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(GameError::config("solver tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(GameError::config("max_iterations must be at least 1"));
        }
        if let Some(t) = self.switch_tolerance {
            if !(t >= 0.0) {
                return Err(GameError::config("switch_tolerance must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Solver stage, used to label iteration counts and warnings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    MinPolicy,
    MaxPolicy,
    Reconcile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverWarning {
    MaxIterations {
        slice: usize,
        stage: Stage,
        last_delta: Option<f64>,
    },
    ResidualAboveTolerance { slice: usize, residual: f64 },
    ClampedInterpolation { count: usize },
    BoundExceeded { norm: f64, budget: f64 },
}

impl std::fmt::Display for SolverWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverWarning::MaxIterations { slice, stage, last_delta } => {
                write!(f, "slice {slice}: {stage:?} hit the iteration cap")?;
                if let Some(d) = last_delta {
                    write!(f, " (last change {d:e})")?;
                }
                Ok(())
            }
            SolverWarning::ResidualAboveTolerance { slice, residual } => {
                write!(f, "slice {slice}: composite residual {residual:e} above tolerance")
            }
            SolverWarning::ClampedInterpolation { count } => {
                write!(f, "{count} interpolation targets were clamped onto the space box")
            }
            SolverWarning::BoundExceeded { norm, budget } => {
                write!(f, "‖V‖∞ = {norm} exceeds the budget ‖f‖∞/λ + ‖G‖∞ = {budget}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceStats {
    pub slice: usize,
    pub time: f64,
    pub min_policy_iterations: usize,
    pub min_evaluation_iterations: usize,
    pub max_policy_iterations: usize,
    pub max_evaluation_iterations: usize,
    pub reconcile_iterations: usize,
    /// `max_j |v_j − F(v)_j|` after reconciliation.
    pub residual: f64,
    pub clamped: usize,
}

/// The continuation value and both intervention values with their policies, on
/// every node (terminal slice holds `G`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateFields {
    pub continuation: Vec<f64>,
    pub min_impulse: Vec<f64>,
    pub max_impulse: Vec<f64>,
    pub min_policy: Vec<usize>,
    pub max_policy: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value_norm: f64,
    pub gain_norm: f64,
    pub terminal_norm: f64,
    /// `gain_norm/λ + terminal_norm`.
    pub budget: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub slice: usize,
    pub stage: Stage,
    pub iteration: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub grid: TimeSpaceGrid,
    pub config: SolverConfig,
    pub damping: f64,
    pub value_field: ValueField,
    pub candidates: CandidateFields,
    pub slices: Vec<SliceStats>,
    /// Largest composite residual over all non-terminal nodes.
    pub max_residual: f64,
    pub bound: BoundCheck,
    pub clamped_interpolations: usize,
    pub warnings: Vec<SolverWarning>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub history: Vec<IterationRecord>,
    /// Not serialized so that reports stay reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl SolveReport {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Solve the scheme on `grid`, slice by slice from `T` back to `t`.
///
/// Per slice: the continuation values `B` and controls; the minimizer's
/// and maximizer's intervention values by policy iteration; then the
/// published slice, the fixed point of the Bellman map started from `B`.
pub fn backward_sweep(problem: &GameProblem, grid: &TimeSpaceGrid, config: &SolverConfig) -> Result<SolveReport> {
    let clock = Instant::now();
    config.validate()?;
    if grid.space_dim() != problem.state_dim() {
        return Err(GameError::Dimension {
            context: "grid space dimension vs state dimension".into(),
            expected: problem.state_dim(),
            found: grid.space_dim(),
        });
    }
    let h = grid.step();
    if (h - config.h).abs() > 1e-12 * h.max(config.h) {
        return Err(GameError::config(format!(
            "solver step h = {} differs from the grid step {h}",
            config.h
        )));
    }
    let horizon = problem.horizon();
    if (grid.start() - horizon.start).abs() > 1e-12 || (grid.end() - horizon.end).abs() > 1e-12 {
        return Err(GameError::config(format!(
            "grid horizon [{}, {}] differs from the problem horizon [{}, {}]",
            grid.start(),
            grid.end(),
            horizon.start,
            horizon.end
        )));
    }
    problem.check_step(h, config.allow_large_step)?;

    let count = grid.space_count();
    let last = grid.time_count() - 1;
    let phi = problem.damping_factor(h);
    let mut field = ValueField::for_grid(grid);
    let total = grid.time_count() * count;
    let mut candidates = CandidateFields {
        continuation: vec![0.0; total],
        min_impulse: vec![0.0; total],
        max_impulse: vec![0.0; total],
        min_policy: vec![0; total],
        max_policy: vec![0; total],
    };

    let terminal: Vec<f64> = (0..count).map(|j| problem.terminal(&grid.node(j))).collect();
    let terminal_policy = vec![
        NodePolicy {
            regime: Regime::Terminal,
            ..Default::default()
        };
        count
    ];
    field.set_slice(last, &terminal, &terminal_policy);
    let off = last * count;
    candidates.continuation[off..off + count].copy_from_slice(&terminal);
    candidates.min_impulse[off..off + count].copy_from_slice(&terminal);
    candidates.max_impulse[off..off + count].copy_from_slice(&terminal);

    let mut warnings = Vec::new();
    let mut slices = Vec::with_capacity(last);
    let mut history = Vec::new();
    let mut clamped_total = 0;
    let mut gain_norm = 0.0f64;
    let mut max_residual = 0.0f64;

    for i in (0..last).rev() {
        let kernel = SliceKernel::build(problem, grid, i)?;
        clamped_total += kernel.clamped();
        gain_norm = gain_norm.max(kernel.max_abs_gain() / h);
        let next = field.slice(i + 1).to_vec();

        let (cont, theta) = kernel.continuation(&next);

        let min_out = policy_iteration_min(&kernel, kernel.improve_min(&cont, 0.0), &cont, config);
        let max_out = policy_iteration_max(&kernel, kernel.improve_max(&cont, 0.0), &cont, config);
        for (stage, ok) in [(Stage::MinPolicy, min_out.converged), (Stage::MaxPolicy, max_out.converged)] {
            if !ok {
                warnings.push(SolverWarning::MaxIterations {
                    slice: i,
                    stage,
                    last_delta: None,
                });
            }
        }

        let rec = iteration::fixed_point(|v| kernel.bellman_values(v, &cont), &cont, phi, config);
        if !rec.converged {
            warnings.push(SolverWarning::MaxIterations {
                slice: i,
                stage: Stage::Reconcile,
                last_delta: Some(rec.last_delta),
            });
        }
        if config.record_convergence {
            history.extend(rec.deltas.iter().enumerate().map(|(k, &delta)| IterationRecord {
                slice: i,
                stage: Stage::Reconcile,
                iteration: k + 1,
                delta,
            }));
        }
        let values = rec.values;

        let nodes: Vec<_> = (0..count).map(|j| kernel.bellman_node(&values, cont[j], theta[j], j)).collect();
        let residual = nodes
            .iter()
            .zip(&values)
            .fold(0.0f64, |m, (r, v)| m.max((v - r.value).abs()));
        max_residual = max_residual.max(residual);
        if residual > config.tolerance {
            warnings.push(SolverWarning::ResidualAboveTolerance { slice: i, residual });
        }
        let policies: Vec<NodePolicy> = nodes
            .iter()
            .enumerate()
            .map(|(j, r)| NodePolicy {
                theta: Some(theta[j]),
                xi: (r.branch == Regime::MaxImpulse).then(|| r.index).flatten(),
                eta: (r.branch == Regime::MinImpulse).then(|| r.index).flatten(),
                regime: r.branch,
            })
            .collect();
        field.set_slice(i, &values, &policies);

        let off = i * count;
        candidates.continuation[off..off + count].copy_from_slice(&cont);
        candidates.min_impulse[off..off + count].copy_from_slice(&min_out.values);
        candidates.max_impulse[off..off + count].copy_from_slice(&max_out.values);
        candidates.min_policy[off..off + count].copy_from_slice(&min_out.policy);
        candidates.max_policy[off..off + count].copy_from_slice(&max_out.policy);

        slices.push(SliceStats {
            slice: i,
            time: grid.time(i),
            min_policy_iterations: min_out.outer_iterations,
            min_evaluation_iterations: min_out.evaluation_iterations,
            max_policy_iterations: max_out.outer_iterations,
            max_evaluation_iterations: max_out.evaluation_iterations,
            reconcile_iterations: rec.iterations,
            residual,
            clamped: kernel.clamped(),
        });
    }
    slices.reverse();

    if clamped_total > 0 && grid.boundary() == BoundaryPolicy::Clamp {
        warnings.push(SolverWarning::ClampedInterpolation { count: clamped_total });
    }
    let terminal_norm = terminal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let value_norm = field.max_abs();
    let budget = gain_norm / problem.discount() + terminal_norm;
    let within = value_norm <= budget + config.tolerance;
    if !within {
        warnings.push(SolverWarning::BoundExceeded {
            norm: value_norm,
            budget,
        });
    }

    Ok(SolveReport {
        grid: grid.clone(),
        config: config.clone(),
        damping: phi,
        value_field: field,
        candidates,
        slices,
        max_residual,
        bound: BoundCheck {
            value_norm,
            gain_norm,
            terminal_norm,
            budget,
            within,
        },
        clamped_interpolations: clamped_total,
        warnings,
        history,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
    })
}
