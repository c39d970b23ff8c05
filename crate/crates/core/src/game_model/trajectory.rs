use serde::{Deserialize, Serialize};

use super::GameProblem;
use crate::error::{GameError, Result};
use crate::grid_interp::{BoundaryPolicy, Regime, TimeSpaceGrid};

/// One intervention: time and impulse vector, plus the grid index it was
/// taken from when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEvent {
    pub time: f64,
    pub control: Vec<f64>,
    #[serde(default)]
    pub index: Option<usize>,
}

/// Explicit open-loop controls for both players.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    /// Continuous control applied on step `d`, i.e. on `[t + dh, t + (d+1)h)`.
    pub continuous: Vec<Vec<f64>>,
    pub max_impulses: Vec<ImpulseEvent>,
    pub min_impulses: Vec<ImpulseEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Active regime on each step; the last entry is `Terminal`.
    pub regimes: Vec<Regime>,
    /// Realised values along the path (empty for plain simulations).
    pub values: Vec<f64>,
    /// Discrete payoff `J_h` of the plan.
    pub payoff: f64,
    pub truncated: bool,
    pub diagnostic: Option<String>,
}

/// Number of `h`-steps in `[t, T]`, rejecting steps that do not divide it.
pub(crate) fn step_count(t: f64, end: f64, h: f64) -> Result<usize> {
    let ratio = (end - t) / h;
    let d = ratio.round();
    if !(d >= 1.0) || (ratio - d).abs() > 1e-9 * ratio.max(1.0) {
        return Err(GameError::config(format!(
            "h = {h} does not divide the remaining horizon {}",
            end - t
        )));
    }
    Ok(d as usize)
}

/// Step whose interval `[t + dh, t + (d+1)h)` contains `time`, or `None`
/// when `time` is the horizon end.
pub(crate) fn step_of(time: f64, t: f64, h: f64, steps: usize) -> Option<usize> {
    let d = ((time - t) / h + 1e-9).floor();
    if d < 0.0 {
        return Some(0);
    }
    let d = d as usize;
    (d < steps).then_some(d)
}

fn same_time(a: f64, b: f64, h: f64) -> bool {
    (a - b).abs() <= 1e-9 * h
}

/// Explicit-Euler state recursion with impulses and the discrete payoff.
///
/// An impulse in step `d` replaces that step's drift; jumps of both players
/// are evaluated at the pre-jump state, and a maximizer impulse at the same
/// instant as a minimizer impulse has no effect and costs nothing. When
/// `domain` is given with the error policy, a state outside its box aborts
/// with the offending step.
pub fn simulate_trajectory(
    problem: &GameProblem,
    start: (f64, &[f64]),
    plan: &ControlPlan,
    h: f64,
    domain: Option<&TimeSpaceGrid>,
) -> Result<TrajectoryRecord> {
    let (t, x) = start;
    let n = problem.state_dim();
    if x.len() != n {
        return Err(GameError::Dimension {
            context: "start state".into(),
            expected: n,
            found: x.len(),
        });
    }
    let end = problem.horizon().end;
    let lh = problem.discount() * h;
    if !(lh < 1.0) || !(h > 0.0) {
        return Err(GameError::config(format!("λh = {lh} must lie in (0, 1)")));
    }
    let steps = step_count(t, end, h)?;
    if plan.continuous.len() != steps {
        return Err(GameError::Dimension {
            context: "continuous control timeline".into(),
            expected: steps,
            found: plan.continuous.len(),
        });
    }
    for ev in plan.max_impulses.iter().chain(&plan.min_impulses) {
        if !(ev.time >= t - 1e-9 * h && ev.time <= end + 1e-9 * h) {
            return Err(GameError::config(format!(
                "impulse time {} outside [{t}, {end}]",
                ev.time
            )));
        }
    }
    let check = |y: &[f64], d: usize| -> Result<()> {
        match domain {
            Some(g) if g.boundary() == BoundaryPolicy::Error => g.check_inside(y).map_err(|e| e.at_step(d)),
            _ => Ok(()),
        }
    };
    check(x, 0)?;

    let mut by_step_max: Vec<Vec<&super::ImpulseEvent>> = vec![Vec::new(); steps];
    let mut by_step_min: Vec<Vec<&super::ImpulseEvent>> = vec![Vec::new(); steps];
    for ev in &plan.max_impulses {
        if let Some(d) = step_of(ev.time, t, h, steps) {
            by_step_max[d].push(ev);
        }
    }
    for ev in &plan.min_impulses {
        if let Some(d) = step_of(ev.time, t, h, steps) {
            by_step_min[d].push(ev);
        }
    }

    let disc = 1.0 - lh;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut regimes = Vec::with_capacity(steps + 1);
    let mut y = x.to_vec();
    let mut next = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut running = 0.0;
    let mut costs = 0.0;
    let mut factor = 1.0;
    for d in 0..steps {
        let s = t + d as f64 * h;
        times.push(s);
        states.push(y.clone());
        let theta = &plan.continuous[d];
        running += h * problem.running_gain().eval(s, &y, theta) * factor;

        let mins = &by_step_min[d];
        let maxs = &by_step_max[d];
        next.copy_from_slice(&y);
        let mut any_max_effect = false;
        for ev in maxs.iter() {
            if mins.iter().any(|m| same_time(m.time, ev.time, h)) {
                continue;
            }
            any_max_effect = true;
            costs -= problem.cost_max().eval(s, &y, &ev.control) * factor;
            problem.jump_max().eval_into(s, &y, &ev.control, &mut tmp);
            for (a, b) in next.iter_mut().zip(&tmp) {
                *a += *b;
            }
        }
        for ev in mins.iter() {
            costs += problem.cost_min().eval(s, &y, &ev.control) * factor;
            problem.jump_min().eval_into(s, &y, &ev.control, &mut tmp);
            for (a, b) in next.iter_mut().zip(&tmp) {
                *a += *b;
            }
        }
        if mins.is_empty() && maxs.is_empty() {
            problem.dynamics().eval_into(s, &y, theta, &mut tmp);
            for (a, b) in next.iter_mut().zip(&tmp) {
                *a += h * *b;
            }
        }
        regimes.push(if !mins.is_empty() {
            Regime::MinImpulse
        } else if any_max_effect {
            Regime::MaxImpulse
        } else {
            Regime::Continuous
        });
        check(&next, d + 1)?;
        std::mem::swap(&mut y, &mut next);
        factor *= disc;
    }
    times.push(end);
    let terminal = problem.terminal(&y) * factor;
    states.push(y);
    regimes.push(Regime::Terminal);
    Ok(TrajectoryRecord {
        times,
        states,
        regimes,
        values: Vec::new(),
        payoff: running + costs + terminal,
        truncated: false,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::{ScalarSpec, VectorSpec};

    fn problem(b: f64) -> GameProblem {
        GameProblem::builder(1)
            .dynamics(VectorSpec::Constant { value: vec![b] })
            .jump_min(VectorSpec::Affine {
                state: vec![],
                control: vec![vec![1.0]],
                time: vec![],
                offset: vec![],
            })
            .jump_max(VectorSpec::Affine {
                state: vec![],
                control: vec![vec![1.0]],
                time: vec![],
                offset: vec![],
            })
            .max_impulses(vec![vec![0.5]])
            .min_impulses(vec![vec![-0.3]])
            .horizon(0.0, 0.1)
            .build()
            .unwrap()
    }

    fn ev(time: f64, v: f64) -> ImpulseEvent {
        ImpulseEvent {
            time,
            control: vec![v],
            index: None,
        }
    }

    #[test]
    fn single_euler_step() {
        let p = problem(2.0);
        let plan = ControlPlan {
            continuous: vec![vec![0.0]],
            ..Default::default()
        };
        let r = simulate_trajectory(&p, (0.0, &[1.0]), &plan, 0.1, None).unwrap();
        assert!((r.states[1][0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn additive_min_jump_and_collision() {
        let p = problem(0.0);
        let mut plan = ControlPlan {
            continuous: vec![vec![0.0]],
            min_impulses: vec![ev(0.0, -0.3)],
            ..Default::default()
        };
        let r = simulate_trajectory(&p, (0.0, &[1.0]), &plan, 0.1, None).unwrap();
        assert!((r.states[1][0] - 0.7).abs() < 1e-15);
        assert_eq!(r.payoff, 1.0);
        plan.max_impulses = vec![ev(0.0, 0.5)];
        let c = simulate_trajectory(&p, (0.0, &[1.0]), &plan, 0.1, None).unwrap();
        assert_eq!(c.states, r.states);
        assert_eq!(c.payoff, r.payoff);
        assert_eq!(c.regimes[0], Regime::MinImpulse);
    }

    #[test]
    fn discounted_running_gain() {
        let p = GameProblem::builder(1)
            .running_gain(ScalarSpec::Constant { value: 1.0 })
            .max_impulses(vec![vec![1.0]])
            .min_impulses(vec![vec![1.0]])
            .build()
            .unwrap();
        let plan = ControlPlan {
            continuous: vec![vec![0.0]; 2],
            ..Default::default()
        };
        let r = simulate_trajectory(&p, (0.0, &[0.0]), &plan, 0.5, None).unwrap();
        assert_eq!(r.payoff, 0.75);
    }
}
