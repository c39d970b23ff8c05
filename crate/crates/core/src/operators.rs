//! Pointwise operators of the scheme and their per-slice precomputed form.
//!
//! With `B(s,y) = max_θ { (1−λh)·I[V(s+h)](y + h·b) + h·f }`,
//! `H⁺(s,y) = max_ξ { I[V(s)](y + g_ξ) − c }` and
//! `H⁻(s,y) = min_η { I[V(s)](y + g_η) + χ }`, the Bellman map is
//! `F = min{ max[B, Φ·H⁺], Φ·H⁻ }` and the composite obstacle residual
//! `max{ min[v − B, v − Φ·H⁺], v − Φ·H⁻ }` equals `v − F(v)`.
//! All argmax/argmin ties go to the lowest grid index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game_model::GameProblem;
use crate::grid_interp::{Regime, Stencil, TimeSpaceGrid, ValueField};

/// Below this many stencils a slice is processed on one thread.
const PARALLEL_THRESHOLD: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorResult {
    pub value: f64,
    /// Index into the control grid of the attaining branch.
    pub index: Option<usize>,
    pub branch: Regime,
    /// Some interpolation point had to be projected onto the box.
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `H_h = v − B`.
    pub hjb: f64,
    /// `v − Φ·H⁺ v`.
    pub lower_gap: f64,
    /// `v − Φ·H⁻ v`.
    pub upper_gap: f64,
}

impl Residuals {
    pub fn composite(&self) -> f64 {
        self.hjb.min(self.lower_gap).max(self.upper_gap)
    }
}

fn target(y: &[f64], jump: &[f64], scale: f64, out: &mut [f64]) {
    for d in 0..y.len() {
        out[d] = y[d] + scale * jump[d];
    }
}

fn check_slice(grid: &TimeSpaceGrid, slice: &[f64], what: &str) -> Result<()> {
    if slice.len() != grid.space_count() {
        return Err(GameError::Dimension {
            context: what.into(),
            expected: grid.space_count(),
            found: slice.len(),
        });
    }
    Ok(())
}

/// Returns `B(s, y)` and the maximizing continuous control.
pub fn approximate_hamiltonian(
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field_next: &[f64],
    s: f64,
    y: &[f64],
) -> Result<OperatorResult> {
    check_slice(grid, field_next, "next time slice")?;
    let h = grid.step();
    let disc = problem.step_discount(h);
    let mut drift = vec![0.0; y.len()];
    let mut point = vec![0.0; y.len()];
    let mut best = OperatorResult {
        value: f64::NEG_INFINITY,
        index: None,
        branch: Regime::Continuous,
        clamped: false,
    };
    for (k, theta) in problem.continuous_controls().iter().enumerate() {
        problem.dynamics().eval_into(s, y, theta, &mut drift);
        target(y, &drift, h, &mut point);
        let st = grid.stencil(&point)?;
        best.clamped |= st.clamped;
        let v = disc * st.apply(field_next) + h * problem.running_gain().eval(s, y, theta);
        if v > best.value || best.index.is_none() {
            best.value = v;
            best.index = Some(k);
        }
    }
    Ok(best)
}

/// `H⁺` on the impulse grid, without the damping factor.
pub fn max_cost_operator(
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field_same: &[f64],
    s: f64,
    y: &[f64],
) -> Result<OperatorResult> {
    check_slice(grid, field_same, "time slice")?;
    let mut jump = vec![0.0; y.len()];
    let mut point = vec![0.0; y.len()];
    let mut best = OperatorResult {
        value: f64::NEG_INFINITY,
        index: None,
        branch: Regime::MaxImpulse,
        clamped: false,
    };
    for (k, xi) in problem.max_impulses().iter().enumerate() {
        problem.jump_max().eval_into(s, y, xi, &mut jump);
        target(y, &jump, 1.0, &mut point);
        let st = grid.stencil(&point)?;
        best.clamped |= st.clamped;
        let v = st.apply(field_same) - problem.cost_max().eval(s, y, xi);
        if v > best.value || best.index.is_none() {
            best.value = v;
            best.index = Some(k);
        }
    }
    Ok(best)
}

/// `H⁻` on the impulse grid, without the damping factor.
pub fn min_cost_operator(
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field_same: &[f64],
    s: f64,
    y: &[f64],
) -> Result<OperatorResult> {
    check_slice(grid, field_same, "time slice")?;
    let mut jump = vec![0.0; y.len()];
    let mut point = vec![0.0; y.len()];
    let mut best = OperatorResult {
        value: f64::INFINITY,
        index: None,
        branch: Regime::MinImpulse,
        clamped: false,
    };
    for (k, eta) in problem.min_impulses().iter().enumerate() {
        problem.jump_min().eval_into(s, y, eta, &mut jump);
        target(y, &jump, 1.0, &mut point);
        let st = grid.stencil(&point)?;
        best.clamped |= st.clamped;
        let v = st.apply(field_same) + problem.cost_min().eval(s, y, eta);
        if v < best.value || best.index.is_none() {
            best.value = v;
            best.index = Some(k);
        }
    }
    Ok(best)
}

/// Combine the three candidates with minimizer precedence.
pub fn select_branch(cont: OperatorResult, phi: f64, sup: OperatorResult, inf: OperatorResult) -> OperatorResult {
    let lower = phi * sup.value;
    let upper = phi * inf.value;
    let pass = cont.value.max(lower);
    let clamped = cont.clamped || sup.clamped || inf.clamped;
    if upper < pass {
        OperatorResult {
            value: upper,
            index: inf.index,
            branch: Regime::MinImpulse,
            clamped,
        }
    } else if lower > cont.value {
        OperatorResult {
            value: lower,
            index: sup.index,
            branch: Regime::MaxImpulse,
            clamped,
        }
    } else {
        OperatorResult {
            value: cont.value,
            index: cont.index,
            branch: Regime::Continuous,
            clamped,
        }
    }
}

fn is_terminal(grid: &TimeSpaceGrid, s: f64) -> bool {
    (s - grid.end()).abs() <= 1e-12 * grid.end().abs().max(1.0)
}

/// `F(v)(s, y)`; at `s = T` this is `G(y)`.
pub fn bellman_map(
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field_next: &[f64],
    field_same: &[f64],
    s: f64,
    y: &[f64],
) -> Result<OperatorResult> {
    if is_terminal(grid, s) {
        return Ok(OperatorResult {
            value: problem.terminal(y),
            index: None,
            branch: Regime::Terminal,
            clamped: false,
        });
    }
    let cont = approximate_hamiltonian(problem, grid, field_next, s, y)?;
    let sup = max_cost_operator(problem, grid, field_same, s, y)?;
    let inf = min_cost_operator(problem, grid, field_same, s, y)?;
    Ok(select_branch(cont, problem.damping_factor(grid.step()), sup, inf))
}

/// The three residuals of the scheme at time node `i` and point `y`, with
/// `v` interpolated from slice `i`.  At the terminal slice only
/// `hjb = v − G(y)` is meaningful; the gaps are reported as `+∞` and `−∞`
/// so that `composite()` reduces to it.
pub fn obstacle_residuals(
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field: &ValueField,
    i: usize,
    y: &[f64],
) -> Result<Residuals> {
    let s = grid.time(i);
    let same = field.slice(i);
    let v = grid.interpolate(same, y)?;
    if i + 1 >= grid.time_count() {
        return Ok(Residuals {
            hjb: v - problem.terminal(y),
            lower_gap: f64::INFINITY,
            upper_gap: f64::NEG_INFINITY,
        });
    }
    let phi = problem.damping_factor(grid.step());
    let cont = approximate_hamiltonian(problem, grid, field.slice(i + 1), s, y)?;
    let sup = max_cost_operator(problem, grid, same, s, y)?;
    let inf = min_cost_operator(problem, grid, same, s, y)?;
    Ok(Residuals {
        hjb: v - cont.value,
        lower_gap: v - phi * sup.value,
        upper_gap: v - phi * inf.value,
    })
}

/// Precomputed stencils and costs for every (node, control) pair of one
/// time slice.  The solver iterates on a slice many times with fixed jump
/// targets, so the interpolation weights are built once.
#[derive(Clone, Debug)]
pub struct SliceKernel {
    space_count: usize,
    phi: f64,
    cont_count: usize,
    max_count: usize,
    min_count: usize,
    cont_stencils: Vec<Stencil>,
    /// `h·f(s, y_j; θ_k)`
    cont_gain: Vec<f64>,
    disc: f64,
    max_stencils: Vec<Stencil>,
    max_cost: Vec<f64>,
    min_stencils: Vec<Stencil>,
    min_cost: Vec<f64>,
    clamped: usize,
}

enum Role {
    Continuous,
    Max,
    Min,
}

impl SliceKernel {
    /// Kernel for time node `i < I − 1`.
    pub fn build(problem: &GameProblem, grid: &TimeSpaceGrid, i: usize) -> Result<Self> {
        if i + 1 >= grid.time_count() {
            return Err(GameError::config("no slice kernel at the terminal time node"));
        }
        let s = grid.time(i);
        let h = grid.step();
        let (cont_stencils, cont_gain) = Self::stencils(problem, grid, s, h, Role::Continuous)?;
        let (max_stencils, max_cost) = Self::stencils(problem, grid, s, h, Role::Max)?;
        let (min_stencils, min_cost) = Self::stencils(problem, grid, s, h, Role::Min)?;
        let clamped = cont_stencils
            .iter()
            .chain(&max_stencils)
            .chain(&min_stencils)
            .filter(|st| st.clamped)
            .count();
        Ok(Self {
            space_count: grid.space_count(),
            phi: problem.damping_factor(h),
            cont_count: problem.continuous_controls().len(),
            max_count: problem.max_impulses().len(),
            min_count: problem.min_impulses().len(),
            cont_stencils,
            cont_gain,
            disc: problem.step_discount(h),
            max_stencils,
            max_cost,
            min_stencils,
            min_cost,
            clamped,
        })
    }

    fn stencils(
        problem: &GameProblem,
        grid: &TimeSpaceGrid,
        s: f64,
        h: f64,
        role: Role,
    ) -> Result<(Vec<Stencil>, Vec<f64>)> {
        let controls = match role {
            Role::Continuous => problem.continuous_controls(),
            Role::Max => problem.max_impulses(),
            Role::Min => problem.min_impulses(),
        };
        let m = controls.len();
        let total = grid.space_count() * m;
        let n = grid.space_dim();
        let one = |idx: usize| -> Result<(Stencil, f64)> {
            let (j, k) = (idx / m, idx % m);
            let y = grid.node(j);
            let u = controls.get(k);
            let mut v = vec![0.0; n];
            let mut p = vec![0.0; n];
            let (scale, extra) = match role {
                Role::Continuous => {
                    problem.dynamics().eval_into(s, &y, u, &mut v);
                    (h, h * problem.running_gain().eval(s, &y, u))
                }
                Role::Max => {
                    problem.jump_max().eval_into(s, &y, u, &mut v);
                    (1.0, problem.cost_max().eval(s, &y, u))
                }
                Role::Min => {
                    problem.jump_min().eval_into(s, &y, u, &mut v);
                    (1.0, problem.cost_min().eval(s, &y, u))
                }
            };
            target(&y, &v, scale, &mut p);
            Ok((grid.stencil(&p)?, extra))
        };
        let pairs: Vec<(Stencil, f64)> = if total >= PARALLEL_THRESHOLD {
            (0..total).into_par_iter().map(one).collect::<Result<_>>()?
        } else {
            (0..total).map(one).collect::<Result<_>>()?
        };
        Ok(pairs.into_iter().unzip())
    }

    pub fn space_count(&self) -> usize {
        self.space_count
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn max_count(&self) -> usize {
        self.max_count
    }
    pub fn min_count(&self) -> usize {
        self.min_count
    }
    /// `max |h·f|` over the slice's (node, control) pairs.
    pub fn max_abs_gain(&self) -> f64 {
        self.cont_gain.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Number of (node, control) targets that had to be clamped.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    fn par(&self) -> bool {
        self.space_count * (self.max_count + self.min_count + self.cont_count) >= PARALLEL_THRESHOLD
    }

    fn map_nodes<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        if self.par() {
            (0..self.space_count).into_par_iter().map(f).collect()
        } else {
            (0..self.space_count).map(f).collect()
        }
    }

    /// Continuation values `B_j` and maximizing indices.
    pub fn continuation(&self, next: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let l = self.cont_count;
        self.map_nodes(|j| {
            let mut best = (f64::NEG_INFINITY, 0);
            for k in 0..l {
                let idx = j * l + k;
                let v = self.disc * self.cont_stencils[idx].apply(next) + self.cont_gain[idx];
                if v > best.0 || k == 0 {
                    best = (v, k);
                }
            }
            best
        })
        .into_iter()
        .unzip()
    }

    /// `I[v](y_j + g_ξ_k) − c` (undamped).
    #[inline]
    pub fn max_candidate(&self, v: &[f64], j: usize, k: usize) -> f64 {
        let idx = j * self.max_count + k;
        self.max_stencils[idx].apply(v) - self.max_cost[idx]
    }

    /// `I[v](y_j + g_η_k) + χ` (undamped).
    #[inline]
    pub fn min_candidate(&self, v: &[f64], j: usize, k: usize) -> f64 {
        let idx = j * self.min_count + k;
        self.min_stencils[idx].apply(v) + self.min_cost[idx]
    }

    /// Undamped `H⁺ v` at node `j` with its argmax.
    pub fn sup(&self, v: &[f64], j: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 0..self.max_count {
            let c = self.max_candidate(v, j, k);
            if c > best.0 || k == 0 {
                best = (c, k);
            }
        }
        best
    }

    /// Undamped `H⁻ v` at node `j` with its argmin.
    pub fn inf(&self, v: &[f64], j: usize) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.min_count {
            let c = self.min_candidate(v, j, k);
            if c < best.0 || k == 0 {
                best = (c, k);
            }
        }
        best
    }

    /// `F` at node `j` given the continuation value and its control.
    pub fn bellman_node(&self, v: &[f64], cont: f64, theta: usize, j: usize) -> OperatorResult {
        let (sv, si) = self.sup(v, j);
        let (iv, ii) = self.inf(v, j);
        select_branch(
            OperatorResult {
                value: cont,
                index: Some(theta),
                branch: Regime::Continuous,
                clamped: false,
            },
            self.phi,
            OperatorResult {
                value: sv,
                index: Some(si),
                branch: Regime::MaxImpulse,
                clamped: false,
            },
            OperatorResult {
                value: iv,
                index: Some(ii),
                branch: Regime::MinImpulse,
                clamped: false,
            },
        )
    }

    /// `F(v)` on the whole slice (values only).
    pub fn bellman_values(&self, v: &[f64], cont: &[f64]) -> Vec<f64> {
        self.map_nodes(|j| {
            let pass = cont[j].max(self.phi * self.sup(v, j).0);
            pass.min(self.phi * self.inf(v, j).0)
        })
    }

    /// `Φ·(I[v](y_j + g_η(η_j)) + χ)` for a frozen minimizer policy.
    pub fn min_policy_values(&self, v: &[f64], policy: &[usize]) -> Vec<f64> {
        self.map_nodes(|j| self.phi * self.min_candidate(v, j, policy[j]))
    }

    /// `Φ·(I[v](y_j + g_ξ(ξ_j)) − c)` for a frozen maximizer policy.
    pub fn max_policy_values(&self, v: &[f64], policy: &[usize]) -> Vec<f64> {
        self.map_nodes(|j| self.phi * self.max_candidate(v, j, policy[j]))
    }

    /// Full one-sided impulse operators `Φ·H⁻ v` and `Φ·H⁺ v`.
    pub fn min_operator_values(&self, v: &[f64]) -> Vec<f64> {
        self.map_nodes(|j| self.phi * self.inf(v, j).0)
    }

    pub fn max_operator_values(&self, v: &[f64]) -> Vec<f64> {
        self.map_nodes(|j| self.phi * self.sup(v, j).0)
    }

    /// Greedy minimizer policy against `v`: the lowest index whose
    /// candidate value is within `band` of the minimum.
    pub fn improve_min(&self, v: &[f64], band: f64) -> Vec<usize> {
        self.map_nodes(|j| {
            let vals: Vec<f64> = (0..self.min_count).map(|k| self.min_candidate(v, j, k)).collect();
            let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = band * best.abs().max(1.0);
            vals.iter().position(|&c| c <= best + tol).unwrap_or(0)
        })
    }

    /// Greedy maximizer policy against `v`; mirror of [`Self::improve_min`].
    pub fn improve_max(&self, v: &[f64], band: f64) -> Vec<usize> {
        self.map_nodes(|j| {
            let vals: Vec<f64> = (0..self.max_count).map(|k| self.max_candidate(v, j, k)).collect();
            let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = band * best.abs().max(1.0);
            vals.iter().position(|&c| c >= best - tol).unwrap_or(0)
        })
    }
}
