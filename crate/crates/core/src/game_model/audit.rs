use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ControlGrid, GameProblem, ScalarFn, VectorFn};
use crate::error::{GameError, Result};
use crate::grid_interp::TimeSpaceGrid;

/// Standing assumption labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssumptionId {
    #[serde(rename = "H_b")]
    Dynamics,
    #[serde(rename = "H_g")]
    Jumps,
    #[serde(rename = "H_f")]
    RunningGain,
    #[serde(rename = "H_c_chi")]
    ImpulseCosts,
    #[serde(rename = "H_G")]
    TerminalGain,
}

/// One failed check with the first sampled point that fails it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: AssumptionId,
    pub check: String,
    pub time: f64,
    pub state: Vec<f64>,
    pub control: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `max(dynamics_bound, gain_bound)`.
    pub bound_m_estimate: f64,
    /// Sampled `sup ‖b‖∞`.
    pub dynamics_bound: f64,
    /// Sampled `sup |f|`.
    pub gain_bound: f64,
    /// Sampled `sup |G|`.
    pub terminal_bound: f64,
    pub lipschitz_estimates: BTreeMap<String, f64>,
    pub cost_infimum: f64,
    pub terminal_no_impulse_ok: bool,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditOptions {
    /// Costs at or below this value fail the positive-infimum check.
    pub cost_tolerance: f64,
    /// Slack allowed in the terminal no-impulse inequalities.
    pub terminal_slack: f64,
    /// Above this many space nodes the Lipschitz estimate only uses pairs of
    /// axis neighbours instead of all pairs.
    pub all_pairs_limit: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            cost_tolerance: 1e-6,
            terminal_slack: 1e-12,
            all_pairs_limit: 256,
        }
    }
}

pub fn validate_assumptions(problem: &GameProblem, sample: &TimeSpaceGrid) -> Result<AssumptionReport> {
    validate_assumptions_with(problem, sample, &AuditOptions::default())
}

/// Audit every assumption on all (time node, space node, control) triples
/// of `sample`.
pub fn validate_assumptions_with(
    problem: &GameProblem,
    sample: &TimeSpaceGrid,
    opts: &AuditOptions,
) -> Result<AssumptionReport> {
    let n = problem.state_dim();
    if sample.space_dim() != n {
        return Err(GameError::Dimension {
            context: "sample grid vs state dimension".into(),
            expected: n,
            found: sample.space_dim(),
        });
    }
    let mut audit = Audit {
        violations: BTreeMap::new(),
    };
    let times = sample.time_nodes();
    let nodes = sample.nodes();
    let pairs = lipschitz_pairs(sample, opts.all_pairs_limit);

    let mut lipschitz = BTreeMap::new();

    let continuous = problem.continuous_controls();
    let (dynamics_bound, lb) = audit.vector(
        AssumptionId::Dynamics,
        problem.dynamics(),
        continuous,
        &times,
        &nodes,
        &pairs,
        n,
    );
    lipschitz.insert("b".to_string(), lb);
    let (_, lg) = audit.vector(
        AssumptionId::Jumps,
        problem.jump_max(),
        problem.max_impulses(),
        &times,
        &nodes,
        &pairs,
        n,
    );
    lipschitz.insert("g_xi".to_string(), lg);
    let (_, lg) = audit.vector(
        AssumptionId::Jumps,
        problem.jump_min(),
        problem.min_impulses(),
        &times,
        &nodes,
        &pairs,
        n,
    );
    lipschitz.insert("g_eta".to_string(), lg);

    let (gain_bound, _, lf) =
        audit.scalar(AssumptionId::RunningGain, problem.running_gain(), continuous, &times, &nodes, &pairs);
    lipschitz.insert("f".to_string(), lf);
    let (_, inf_c, lc) =
        audit.scalar(AssumptionId::ImpulseCosts, problem.cost_max(), problem.max_impulses(), &times, &nodes, &pairs);
    lipschitz.insert("c".to_string(), lc);
    let (_, inf_chi, lchi) =
        audit.scalar(AssumptionId::ImpulseCosts, problem.cost_min(), problem.min_impulses(), &times, &nodes, &pairs);
    lipschitz.insert("chi".to_string(), lchi);
    let cost_infimum = inf_c.min(inf_chi);

    for (name, cost, grid) in [
        ("c", problem.cost_max(), problem.max_impulses()),
        ("chi", problem.cost_min(), problem.min_impulses()),
    ] {
        audit.cost_positivity(name, cost, grid, &times, &nodes, opts.cost_tolerance);
        audit.subadditivity(name, cost, grid, &times, &nodes);
    }

    let t_end = problem.horizon().end;
    let terminal: Vec<f64> = nodes.iter().map(|y| problem.terminal(y)).collect();
    let terminal_bound = terminal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(j) = terminal.iter().position(|v| !v.is_finite()) {
        audit.record(AssumptionId::TerminalGain, "bounded", t_end, &nodes[j], None, "G is not finite".into());
    }
    let mut lg_term = 0.0f64;
    for &(a, b) in &pairs {
        let d = dist(&nodes[a], &nodes[b]);
        lg_term = lg_term.max((terminal[a] - terminal[b]).abs() / d);
    }
    lipschitz.insert("G".to_string(), lg_term);

    let terminal_no_impulse_ok = audit.terminal_condition(problem, &nodes, &terminal, opts.terminal_slack);

    Ok(AssumptionReport {
        bound_m_estimate: dynamics_bound.max(gain_bound),
        dynamics_bound,
        gain_bound,
        terminal_bound,
        lipschitz_estimates: lipschitz,
        cost_infimum,
        terminal_no_impulse_ok,
        violations: audit.violations.into_values().collect(),
    })
}

struct Audit {
    violations: BTreeMap<(AssumptionId, String), Violation>,
}

impl Audit {
    fn record(&mut self, id: AssumptionId, check: &str, time: f64, state: &[f64], control: Option<usize>, detail: String) {
        self.violations
            .entry((id, check.to_string()))
            .or_insert_with(|| Violation {
                assumption: id,
                check: check.to_string(),
                time,
                state: state.to_vec(),
                control,
                detail,
            });
    }

    /// Returns (sup ‖·‖∞, Lipschitz estimate in y).
    #[allow(clippy::too_many_arguments)]
    fn vector(
        &mut self,
        id: AssumptionId,
        func: &VectorFn,
        controls: &ControlGrid,
        times: &[f64],
        nodes: &[Vec<f64>],
        pairs: &[(usize, usize)],
        n: usize,
    ) -> (f64, f64) {
        let mut bound = 0.0f64;
        let mut lip = 0.0f64;
        let mut vals = vec![vec![0.0; n]; nodes.len()];
        for &s in times {
            for (k, u) in controls.iter().enumerate() {
                for (j, y) in nodes.iter().enumerate() {
                    func.eval_into(s, y, u, &mut vals[j]);
                    if vals[j].iter().any(|v| !v.is_finite()) {
                        self.record(id, "finite", s, y, Some(k), format!("non-finite value {:?}", vals[j]));
                    }
                    bound = bound.max(vals[j].iter().fold(0.0f64, |m, v| m.max(v.abs())));
                }
                for &(a, b) in pairs {
                    let num = dist(&vals[a], &vals[b]);
                    lip = lip.max(num / dist(&nodes[a], &nodes[b]));
                }
            }
        }
        (bound, lip)
    }

    /// Returns (sup |·|, inf, Lipschitz estimate in y).
    fn scalar(
        &mut self,
        id: AssumptionId,
        func: &ScalarFn,
        controls: &ControlGrid,
        times: &[f64],
        nodes: &[Vec<f64>],
        pairs: &[(usize, usize)],
    ) -> (f64, f64, f64) {
        let mut bound = 0.0f64;
        let mut inf = f64::INFINITY;
        let mut lip = 0.0f64;
        let mut vals = vec![0.0; nodes.len()];
        for &s in times {
            for (k, u) in controls.iter().enumerate() {
                for (j, y) in nodes.iter().enumerate() {
                    let v = func.eval(s, y, u);
                    if !v.is_finite() {
                        self.record(id, "finite", s, y, Some(k), format!("non-finite value {v}"));
                    }
                    vals[j] = v;
                    bound = bound.max(v.abs());
                    inf = inf.min(v);
                }
                for &(a, b) in pairs {
                    lip = lip.max((vals[a] - vals[b]).abs() / dist(&nodes[a], &nodes[b]));
                }
            }
        }
        (bound, inf, lip)
    }

    fn cost_positivity(
        &mut self,
        name: &str,
        cost: &ScalarFn,
        grid: &ControlGrid,
        times: &[f64],
        nodes: &[Vec<f64>],
        tol: f64,
    ) {
        for &s in times {
            for (k, u) in grid.iter().enumerate() {
                for y in nodes {
                    let v = cost.eval(s, y, u);
                    if !(v > tol) {
                        self.record(
                            AssumptionId::ImpulseCosts,
                            &format!("{name}_positive_infimum"),
                            s,
                            y,
                            Some(k),
                            format!("{name} = {v} is not above {tol}"),
                        );
                        return;
                    }
                }
            }
        }
    }

    fn subadditivity(&mut self, name: &str, cost: &ScalarFn, grid: &ControlGrid, times: &[f64], nodes: &[Vec<f64>]) {
        let mut sum = vec![0.0; grid.dim()];
        for &s in times {
            for y in nodes {
                for a in 0..grid.len() {
                    let ca = cost.eval(s, y, grid.get(a));
                    for b in a..grid.len() {
                        for (d, v) in sum.iter_mut().enumerate() {
                            *v = grid.get(a)[d] + grid.get(b)[d];
                        }
                        let cb = cost.eval(s, y, grid.get(b));
                        let cs = cost.eval(s, y, &sum);
                        if cs > ca + cb + 1e-12 * (ca.abs() + cb.abs()).max(1.0) {
                            self.record(
                                AssumptionId::ImpulseCosts,
                                &format!("{name}_subadditive"),
                                s,
                                y,
                                Some(a),
                                format!("{name}(u{a} + u{b}) = {cs} > {ca} + {cb}"),
                            );
                            return;
                        }
                    }
                }
            }
        }
    }

    fn terminal_condition(&mut self, p: &GameProblem, nodes: &[Vec<f64>], terminal: &[f64], slack: f64) -> bool {
        let t = p.horizon().end;
        let mut ok = true;
        let mut target = vec![0.0; p.state_dim()];
        let mut jump = vec![0.0; p.state_dim()];
        for (y, &gy) in nodes.iter().zip(terminal) {
            let tol = slack * gy.abs().max(1.0);
            for (k, xi) in p.max_impulses().iter().enumerate() {
                p.jump_max().eval_into(t, y, xi, &mut jump);
                for d in 0..target.len() {
                    target[d] = y[d] + jump[d];
                }
                let gain = p.terminal(&target) - p.cost_max().eval(t, y, xi);
                if gain > gy + tol {
                    ok = false;
                    self.record(
                        AssumptionId::TerminalGain,
                        "no_terminal_max_impulse",
                        t,
                        y,
                        Some(k),
                        format!("G(y + g_xi) − c = {gain} > G(y) = {gy}"),
                    );
                }
            }
            for (k, eta) in p.min_impulses().iter().enumerate() {
                p.jump_min().eval_into(t, y, eta, &mut jump);
                for d in 0..target.len() {
                    target[d] = y[d] + jump[d];
                }
                let cost = p.terminal(&target) + p.cost_min().eval(t, y, eta);
                if cost < gy - tol {
                    ok = false;
                    self.record(
                        AssumptionId::TerminalGain,
                        "no_terminal_min_impulse",
                        t,
                        y,
                        Some(k),
                        format!("G(y + g_eta) + chi = {cost} < G(y) = {gy}"),
                    );
                }
            }
        }
        ok
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lipschitz_pairs(grid: &TimeSpaceGrid, all_pairs_limit: usize) -> Vec<(usize, usize)> {
    let count = grid.space_count();
    if count <= all_pairs_limit {
        return (0..count)
            .flat_map(|a| (a + 1..count).map(move |b| (a, b)))
            .collect();
    }
    let mut pairs = Vec::new();
    for j in 0..count {
        let multi = grid.multi_index(j);
        for (d, axis) in grid.axes().iter().enumerate() {
            if multi[d] + 1 < axis.len() {
                let mut m = multi.clone();
                m[d] += 1;
                pairs.push((j, grid.linear_index(&m)));
            }
        }
    }
    pairs
}
