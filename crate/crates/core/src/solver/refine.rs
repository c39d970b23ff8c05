use serde::{Deserialize, Serialize};

use super::{backward_sweep, SolveReport, SolverConfig};
use crate::error::{GameError, Result};
use crate::game_model::GameProblem;
use crate::grid_interp::TimeSpaceGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub h: f64,
    /// `‖v_h − v_finest‖∞` over the time nodes shared with the finest grid.
    pub max_diff: f64,
    /// Values on the first time slice.
    pub start_values: Vec<f64>,
    pub value_iterations: usize,
    pub policy_iterations: usize,
    pub bound_within: bool,
    pub warnings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Differences to the finest solution never grow as `h` decreases.
    pub monotone: bool,
}

/// Solve at every step of `h_list` (strictly decreasing) on the space grid
/// of `space_grid` and compare each solution with the finest one.
pub fn refinement_study(
    problem: &GameProblem,
    space_grid: &TimeSpaceGrid,
    h_list: &[f64],
    config: &SolverConfig,
) -> Result<RefinementTable> {
    if h_list.is_empty() {
        return Err(GameError::config("refinement study needs at least one step"));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(GameError::config("refinement steps must be strictly decreasing"));
    }
    let finest = *h_list.last().unwrap();
    for &h in h_list {
        let r = h / finest;
        if (r - r.round()).abs() > 1e-9 * r {
            return Err(GameError::config(format!(
                "h = {h} is not a multiple of the finest step {finest}; time nodes would not be shared"
            )));
        }
    }
    let horizon = problem.horizon();
    let solve = |h: f64| -> Result<SolveReport> {
        let grid = space_grid.with_horizon(horizon.start, horizon.end)?.with_step(h)?;
        backward_sweep(problem, &grid, &SolverConfig { h, ..config.clone() })
    };
    let reports = h_list.iter().map(|&h| solve(h)).collect::<Result<Vec<_>>>()?;
    let reference = reports.last().unwrap();
    let mut rows = Vec::with_capacity(reports.len());
    for (rep, &h) in reports.iter().zip(h_list) {
        let ratio = (h / finest).round() as usize;
        let mut diff = 0.0f64;
        for i in 0..rep.grid.time_count() {
            let a = rep.value_field.slice(i);
            let b = reference.value_field.slice(i * ratio);
            diff = a.iter().zip(b).fold(diff, |m, (x, y)| m.max((x - y).abs()));
        }
        rows.push(RefinementRow {
            h,
            max_diff: diff,
            start_values: rep.value_field.slice(0).to_vec(),
            value_iterations: rep
                .slices
                .iter()
                .map(|s| s.reconcile_iterations + s.min_evaluation_iterations + s.max_evaluation_iterations)
                .sum(),
            policy_iterations: rep
                .slices
                .iter()
                .map(|s| s.min_policy_iterations + s.max_policy_iterations)
                .sum(),
            bound_within: rep.bound.within,
            warnings: rep.warnings.len(),
        });
    }
    let coarse = &rows[..rows.len() - 1];
    let monotone = coarse.windows(2).all(|w| w[1].max_diff <= w[0].max_diff);
    Ok(RefinementTable { rows, monotone })
}
