use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::operators::SliceKernel;

/// Which player's impulse equation is being solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Min,
    Max,
}

/// Operator iterated by [`value_iteration`].
#[derive(Clone, Copy, Debug)]
pub enum SliceOperator<'a> {
    /// Frozen impulse index per node.
    Policy(&'a [usize]),
    /// Optimal impulse at every node.
    Optimal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Last sup-norm change `‖V^{k+1} − V^k‖∞`.
    pub last_delta: f64,
    /// Every sup-norm change, kept only when the config records convergence.
    pub deltas: Vec<f64>,
}

/// Iterate a contraction with factor `kappa` from `initial`.
///
/// Stops once `kappa/(1−kappa)·δ < ε/2`, which places the returned iterate
/// within `ε/2` of the fixed point.
pub(crate) fn fixed_point(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    initial: &[f64],
    kappa: f64,
    config: &SolverConfig,
) -> Iterate {
    let gain = kappa / (1.0 - kappa);
    let mut current = initial.to_vec();
    let mut deltas = Vec::new();
    let mut iterations = 0;
    loop {
        let next = apply(&current);
        iterations += 1;
        let delta = current
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        if config.record_convergence {
            deltas.push(delta);
        }
        let done = gain * delta < 0.5 * config.tolerance;
        if done || iterations >= config.max_iterations {
            return Iterate {
                values: current,
                iterations,
                converged: done,
                last_delta: delta,
                deltas,
            };
        }
    }
}

/// Solve one player's impulse equation on a slice,
/// `V_j = Φ·(I[V](y_j + g(u_j)) ± cost)`, with `+χ` on the min side and
/// `−c` on the max side.
pub fn value_iteration(
    kernel: &SliceKernel,
    side: Side,
    operator: SliceOperator<'_>,
    initial: &[f64],
    config: &SolverConfig,
) -> Iterate {
    let phi = kernel.phi();
    match (side, operator) {
        (Side::Min, SliceOperator::Policy(p)) => fixed_point(|v| kernel.min_policy_values(v, p), initial, phi, config),
        (Side::Max, SliceOperator::Policy(p)) => fixed_point(|v| kernel.max_policy_values(v, p), initial, phi, config),
        (Side::Min, SliceOperator::Optimal) => fixed_point(|v| kernel.min_operator_values(v), initial, phi, config),
        (Side::Max, SliceOperator::Optimal) => fixed_point(|v| kernel.max_operator_values(v), initial, phi, config),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutcome {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub outer_iterations: usize,
    pub evaluation_iterations: usize,
    pub converged: bool,
    /// Evaluated values after each outer iteration (recorded runs only).
    pub history: Vec<Vec<f64>>,
}

/// Evaluate/improve until the policy repeats.
///
/// The improvement step keeps a node's current impulse when it is within
/// the solver tolerance of the best candidate, so evaluation noise on tied
/// candidates cannot make the loop cycle.
fn policy_iteration(
    kernel: &SliceKernel,
    side: Side,
    initial_policy: Vec<usize>,
    initial_values: &[f64],
    config: &SolverConfig,
) -> PolicyOutcome {
    let mut policy = initial_policy;
    let mut values = initial_values.to_vec();
    let mut evaluation_iterations = 0;
    let mut history = Vec::new();
    let mut outer = 0;
    let mut evaluation_ok = true;
    loop {
        outer += 1;
        let eval = value_iteration(kernel, side, SliceOperator::Policy(&policy), &values, config);
        evaluation_iterations += eval.iterations;
        evaluation_ok &= eval.converged;
        values = eval.values;
        if config.record_convergence {
            history.push(values.clone());
        }
        let improved = improve(kernel, side, &values, &policy, config.tolerance);
        let stable = improved == policy;
        policy = improved;
        if stable || outer >= config.max_iterations {
            return PolicyOutcome {
                values,
                policy,
                outer_iterations: outer,
                evaluation_iterations,
                converged: stable && evaluation_ok,
                history,
            };
        }
    }
}

fn improve(kernel: &SliceKernel, side: Side, v: &[f64], current: &[usize], band: f64) -> Vec<usize> {
    let greedy = match side {
        Side::Min => kernel.improve_min(v, 0.0),
        Side::Max => kernel.improve_max(v, 0.0),
    };
    greedy
        .into_iter()
        .enumerate()
        .map(|(j, best)| {
            let keep = match side {
                Side::Min => kernel.min_candidate(v, j, current[j]) <= kernel.min_candidate(v, j, best) + band,
                Side::Max => kernel.max_candidate(v, j, current[j]) >= kernel.max_candidate(v, j, best) - band,
            };
            if keep {
                current[j]
            } else {
                best
            }
        })
        .collect()
}

/// Minimizer's intervention value and policy on a slice.
pub fn policy_iteration_min(
    kernel: &SliceKernel,
    initial_policy: Vec<usize>,
    initial_values: &[f64],
    config: &SolverConfig,
) -> PolicyOutcome {
    policy_iteration(kernel, Side::Min, initial_policy, initial_values, config)
}

/// Maximizer's intervention value and policy on a slice.
pub fn policy_iteration_max(
    kernel: &SliceKernel,
    initial_policy: Vec<usize>,
    initial_values: &[f64],
    config: &SolverConfig,
) -> PolicyOutcome {
    policy_iteration(kernel, Side::Max, initial_policy, initial_values, config)
}
