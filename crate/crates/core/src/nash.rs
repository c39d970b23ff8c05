//! Forward extraction of equilibrium controls along the optimal path, the
//! discrete payoff `J_h`, and a seeded unilateral-deviation audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game_model::{simulate_trajectory, ControlPlan, GameProblem, ImpulseEvent, TrajectoryRecord};
use crate::grid_interp::{BoundaryPolicy, Regime};
use crate::operators::{approximate_hamiltonian, max_cost_operator, min_cost_operator};
use crate::solver::{SolveReport, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedImpulse {
    pub time: f64,
    pub step: usize,
    pub index: usize,
    pub control: Vec<f64>,
}

/// The initial intervention marker each player carries before the first
/// real impulse; `index = None` is a no-op.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placeholder {
    pub time: f64,
    pub index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashStrategy {
    /// Start time of every step.
    pub times: Vec<f64>,
    /// Continuous control index per step, `None` on impulse steps.
    pub continuous_timeline: Vec<Option<usize>>,
    pub max_impulses: Vec<TimedImpulse>,
    pub min_impulses: Vec<TimedImpulse>,
    pub max_placeholder: Placeholder,
    pub min_placeholder: Placeholder,
}

impl NashStrategy {
    /// Explicit controls for [`simulate_trajectory`].  On impulse steps the
    /// running gain still accrues, with the most recent continuous control
    /// (index 0 before the first one).
    pub fn to_plan(&self, problem: &GameProblem) -> ControlPlan {
        let grid = problem.continuous_controls();
        let mut last = 0;
        let continuous = self
            .continuous_timeline
            .iter()
            .map(|k| {
                if let Some(k) = k {
                    last = *k;
                }
                grid.get(last).to_vec()
            })
            .collect();
        let events = |list: &[TimedImpulse]| {
            list.iter()
                .map(|e| ImpulseEvent {
                    time: e.time,
                    control: e.control.clone(),
                    index: Some(e.index),
                })
                .collect()
        };
        ControlPlan {
            continuous,
            max_impulses: events(&self.max_impulses),
            min_impulses: events(&self.min_impulses),
        }
    }
}

/// Discrete payoff of an explicit control pair from `(t, x)`.
pub fn evaluate_payoff(problem: &GameProblem, start: (f64, &[f64]), plan: &ControlPlan, h: f64) -> Result<f64> {
    Ok(simulate_trajectory(problem, start, plan, h, None)?.payoff)
}

/// Walk forward from `x` at the grid start, choosing at each step between
/// a minimizer impulse, a maximizer impulse and a continuous step by
/// re-evaluating the operators at the current path point.
///
/// A path that leaves the box under the error policy yields a truncated
/// record with a diagnostic rather than an error.
pub fn extract_equilibrium(
    problem: &GameProblem,
    report: &SolveReport,
    start: &[f64],
    config: &SolverConfig,
) -> Result<(NashStrategy, TrajectoryRecord)> {
    let grid = &report.grid;
    let field = &report.value_field;
    let n = problem.state_dim();
    if start.len() != n {
        return Err(GameError::Dimension {
            context: "start state".into(),
            expected: n,
            found: start.len(),
        });
    }
    grid.check_inside(start)?;
    let h = grid.step();
    let phi = problem.damping_factor(h);
    let eps = config.switch_tolerance();
    let last = grid.time_count() - 1;
    let t0 = grid.start();

    let mut strategy = NashStrategy {
        times: (0..last).map(|i| grid.time(i)).collect(),
        continuous_timeline: Vec::with_capacity(last),
        max_impulses: Vec::new(),
        min_impulses: Vec::new(),
        max_placeholder: Placeholder {
            time: t0,
            index: config.max_placeholder,
        },
        min_placeholder: Placeholder {
            time: t0,
            index: config.min_placeholder,
        },
    };
    let mut states = vec![start.to_vec()];
    let mut regimes = Vec::with_capacity(last + 1);
    let mut values = Vec::with_capacity(last + 1);
    let mut diagnostic = None;
    let mut y = start.to_vec();
    let mut buf = vec![0.0; n];

    for i in 0..last {
        let s = grid.time(i);
        let at = if config.nearest_node {
            grid.node(grid.nearest_node(&y))
        } else {
            y.clone()
        };
        let evaluated = approximate_hamiltonian(problem, grid, field.slice(i + 1), s, &at).and_then(|c| {
            let sup = max_cost_operator(problem, grid, field.slice(i), s, &at)?;
            let inf = min_cost_operator(problem, grid, field.slice(i), s, &at)?;
            Ok((c, sup, inf))
        });
        let (cont, sup, inf) = match evaluated {
            Ok(v) => v,
            Err(e) if e.is_out_of_domain() => {
                diagnostic = Some(format!("operators not resolvable on the path: {}", e.at_step(i)));
                break;
            }
            Err(e) => return Err(e),
        };
        let lower = phi * sup.value;
        let upper = phi * inf.value;
        let mut next = y.clone();
        if cont.value.max(lower) > upper + eps {
            let k = inf.index.expect("impulse grid is non-empty");
            let eta = problem.min_impulses().get(k);
            problem.jump_min().eval_into(s, &y, eta, &mut buf);
            for d in 0..n {
                next[d] += buf[d];
            }
            strategy.min_impulses.push(TimedImpulse {
                time: s,
                step: i,
                index: k,
                control: eta.to_vec(),
            });
            strategy.continuous_timeline.push(None);
            regimes.push(Regime::MinImpulse);
            values.push(upper);
        } else if lower > cont.value + eps {
            let k = sup.index.expect("impulse grid is non-empty");
            let xi = problem.max_impulses().get(k);
            problem.jump_max().eval_into(s, &y, xi, &mut buf);
            for d in 0..n {
                next[d] += buf[d];
            }
            strategy.max_impulses.push(TimedImpulse {
                time: s,
                step: i,
                index: k,
                control: xi.to_vec(),
            });
            strategy.continuous_timeline.push(None);
            regimes.push(Regime::MaxImpulse);
            values.push(lower);
        } else {
            let k = cont.index.expect("control grid is non-empty");
            let theta = problem.continuous_controls().get(k);
            problem.dynamics().eval_into(s, &y, theta, &mut buf);
            for d in 0..n {
                next[d] += h * buf[d];
            }
            strategy.continuous_timeline.push(Some(k));
            regimes.push(Regime::Continuous);
            values.push(cont.value);
        }
        if grid.boundary() == BoundaryPolicy::Error {
            if let Err(e) = grid.check_inside(&next) {
                states.push(next);
                diagnostic = Some(format!("path left the space domain: {}", e.at_step(i + 1)));
                break;
            }
        }
        states.push(next.clone());
        y = next;
    }

    if let Some(msg) = diagnostic {
        let steps = regimes.len();
        let record = TrajectoryRecord {
            times: (0..states.len()).map(|i| grid.time(i)).collect(),
            states,
            regimes,
            values,
            payoff: f64::NAN,
            truncated: true,
            diagnostic: Some(msg),
        };
        strategy.times.truncate(steps);
        return Ok((strategy, record));
    }

    let plan = strategy.to_plan(problem);
    let mut record = simulate_trajectory(problem, (t0, start), &plan, h, Some(grid))?;
    debug_assert_eq!(record.states, states);
    values.push(problem.terminal(&y));
    record.values = values;
    Ok((strategy, record))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Deviations generated per player.
    pub deviations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            deviations: 100,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub description: String,
    pub payoff: f64,
    /// Gain for the deviating player relative to the equilibrium payoff.
    pub improvement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideAudit {
    pub deviations: usize,
    pub worst_improvement: f64,
    pub passed: bool,
    /// Largest improvements first, at most five.
    pub worst: Vec<DeviationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NEReport {
    pub start_time: f64,
    pub start_state: Vec<f64>,
    pub value_at_start: f64,
    pub payoff: f64,
    pub payoff_gap: f64,
    pub payoff_ok: bool,
    pub maximizer: SideAudit,
    pub minimizer: SideAudit,
    pub tolerance: f64,
    pub seed: u64,
    pub trajectory_truncated: bool,
    pub passed: bool,
}

/// Compare the equilibrium payoff with the value at the start, then try
/// seeded unilateral deviations drawn from the control grids for each
/// player in turn.
pub fn verify_equilibrium(
    problem: &GameProblem,
    report: &SolveReport,
    start: &[f64],
    options: &VerifyOptions,
    config: &SolverConfig,
) -> Result<NEReport> {
    let (strategy, record) = extract_equilibrium(problem, report, start, config)?;
    let grid = &report.grid;
    let value = grid.interpolate(report.value_field.slice(0), start)?;
    let t0 = grid.start();
    let h = grid.step();
    let empty = |passed| SideAudit {
        deviations: 0,
        worst_improvement: f64::NAN,
        passed,
        worst: Vec::new(),
    };
    if record.truncated {
        return Ok(NEReport {
            start_time: t0,
            start_state: start.to_vec(),
            value_at_start: value,
            payoff: f64::NAN,
            payoff_gap: f64::NAN,
            payoff_ok: false,
            maximizer: empty(false),
            minimizer: empty(false),
            tolerance: options.tolerance,
            seed: options.seed,
            trajectory_truncated: true,
            passed: false,
        });
    }
    let plan = strategy.to_plan(problem);
    let payoff = record.payoff;
    let gap = (payoff - value).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let max_devs: Vec<_> = (0..options.deviations)
        .map(|_| deviate(problem, &plan, t0, h, Player::Max, &mut rng))
        .collect();
    let min_devs: Vec<_> = (0..options.deviations)
        .map(|_| deviate(problem, &plan, t0, h, Player::Min, &mut rng))
        .collect();
    let audit = |devs: Vec<(String, ControlPlan)>, sign: f64| -> Result<SideAudit> {
        let mut rows = devs
            .into_par_iter()
            .map(|(description, p)| {
                let j = evaluate_payoff(problem, (t0, start), &p, h)?;
                Ok(DeviationRecord {
                    description,
                    payoff: j,
                    improvement: sign * (j - payoff),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let worst_improvement = rows.iter().map(|r| r.improvement).fold(f64::NEG_INFINITY, f64::max);
        rows.sort_by(|a, b| b.improvement.total_cmp(&a.improvement));
        rows.truncate(5);
        Ok(SideAudit {
            deviations: options.deviations,
            worst_improvement,
            passed: !(worst_improvement > options.tolerance),
            worst: rows,
        })
    };
    let maximizer = audit(max_devs, 1.0)?;
    let minimizer = audit(min_devs, -1.0)?;
    let payoff_ok = gap <= options.tolerance;
    Ok(NEReport {
        start_time: t0,
        start_state: start.to_vec(),
        value_at_start: value,
        payoff,
        payoff_gap: gap,
        payoff_ok,
        passed: payoff_ok && maximizer.passed && minimizer.passed,
        maximizer,
        minimizer,
        tolerance: options.tolerance,
        seed: options.seed,
        trajectory_truncated: false,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Player {
    Max,
    Min,
}

/// One random unilateral change of `player`'s part of `plan`.
fn deviate(
    problem: &GameProblem,
    plan: &ControlPlan,
    t0: f64,
    h: f64,
    player: Player,
    rng: &mut ChaCha8Rng,
) -> (String, ControlPlan) {
    let mut p = plan.clone();
    let steps = p.continuous.len();
    let (grid, label) = match player {
        Player::Max => (problem.max_impulses(), "max"),
        Player::Min => (problem.min_impulses(), "min"),
    };
    let own_len = match player {
        Player::Max => p.max_impulses.len(),
        Player::Min => p.min_impulses.len(),
    };
    let kinds = if player == Player::Max { 6 } else { 4 };
    let mut kind = rng.random_range(0..kinds);
    if own_len == 0 && kind < 3 {
        kind = 3;
    }
    let time_of = |d: usize| t0 + d as f64 * h;
    let description;
    {
        let list = match player {
            Player::Max => &mut p.max_impulses,
            Player::Min => &mut p.min_impulses,
        };
        match kind {
            0 => {
                let m = rng.random_range(0..own_len);
                let d = rng.random_range(0..steps);
                description = format!("shift {label} impulse {m} to step {d}");
                list[m].time = time_of(d);
            }
            1 => {
                let m = rng.random_range(0..own_len);
                description = format!("remove {label} impulse {m}");
                list.remove(m);
            }
            2 => {
                let m = rng.random_range(0..own_len);
                let k = rng.random_range(0..grid.len());
                description = format!("resize {label} impulse {m} to grid element {k}");
                list[m].control = grid.get(k).to_vec();
                list[m].index = Some(k);
            }
            3 => {
                let d = rng.random_range(0..steps);
                let k = rng.random_range(0..grid.len());
                description = format!("add {label} impulse {k} at step {d}");
                list.push(ImpulseEvent {
                    time: time_of(d),
                    control: grid.get(k).to_vec(),
                    index: Some(k),
                });
                list.sort_by(|a, b| a.time.total_cmp(&b.time));
            }
            4 => {
                let d = rng.random_range(0..steps);
                let k = rng.random_range(0..problem.continuous_controls().len());
                description = format!("continuous control {k} at step {d}");
                p.continuous[d] = problem.continuous_controls().get(k).to_vec();
            }
            _ => {
                let changes = rng.random_range(1..=steps);
                for _ in 0..changes {
                    let d = rng.random_range(0..steps);
                    let k = rng.random_range(0..problem.continuous_controls().len());
                    p.continuous[d] = problem.continuous_controls().get(k).to_vec();
                }
                description = format!("perturb continuous timeline at up to {changes} steps");
            }
        }
    }
    (description, p)
}
