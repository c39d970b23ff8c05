//! Shared instances and independent reference solvers for the integration
//! tests.  Nothing here calls the crate's operators, kernels or solver:
//! the oracles only evaluate the model functions through `GameProblem`
//! and do their own interpolation and linear algebra.

#![allow(dead_code)]

use impulse_game::game_model::{GameProblem, ScalarFn, VectorFn};
use impulse_game::grid_interp::{BoundaryPolicy, TimeSpaceGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-linear interpolation on sorted nodes, clamped to the ends.
/// Returns `(lower index, weight of upper node)`.
pub fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    let x = x.clamp(nodes[0], nodes[n - 1]);
    let mut k = 0;
    while k + 2 < n && nodes[k + 1] <= x {
        k += 1;
    }
    (k, (x - nodes[k]) / (nodes[k + 1] - nodes[k]))
}

pub fn interp(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let (k, w) = locate(nodes, x);
    if w == 0.0 {
        values[k]
    } else if w == 1.0 {
        values[k + 1]
    } else {
        (1.0 - w) * values[k] + w * values[k + 1]
    }
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// One-dimensional reference setup shared by both oracles.
pub struct Reference<'a> {
    pub problem: &'a GameProblem,
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub h: f64,
}

impl<'a> Reference<'a> {
    pub fn new(problem: &'a GameProblem, grid: &TimeSpaceGrid) -> Self {
        assert_eq!(grid.space_dim(), 1);
        Self {
            problem,
            nodes: grid.axes()[0].clone(),
            times: grid.time_nodes(),
            h: grid.step(),
        }
    }

    fn phi(&self) -> f64 {
        (-self.problem.discount() * self.h).exp()
    }

    /// Continuation value at every node of slice `i` given slice `i + 1`.
    fn continuation(&self, s: f64, next: &[f64]) -> Vec<f64> {
        let p = self.problem;
        let disc = 1.0 - p.discount() * self.h;
        self.nodes
            .iter()
            .map(|&y| {
                p.continuous_controls()
                    .iter()
                    .map(|th| {
                        let b = p.dynamics().eval(s, &[y], th)[0];
                        disc * interp(&self.nodes, next, y + self.h * b) + self.h * p.running_gain().eval(s, &[y], th)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Jump target and cost of every impulse at every node.
    fn impulses(&self, s: f64, max_side: bool) -> Vec<Vec<(f64, f64)>> {
        let p = self.problem;
        let (grid, jump, cost) = if max_side {
            (p.max_impulses(), p.jump_max(), p.cost_max())
        } else {
            (p.min_impulses(), p.jump_min(), p.cost_min())
        };
        self.nodes
            .iter()
            .map(|&y| {
                grid.iter()
                    .map(|u| (y + jump.eval(s, &[y], u)[0], cost.eval(s, &[y], u)))
                    .collect()
            })
            .collect()
    }

    /// Exhaustive solve: on each slice, every pure stationary pair
    /// (minimizer: pass or an impulse per node; maximizer: continue or an
    /// impulse per node) is evaluated exactly by a linear solve, and the
    /// slice value is `min_σ max_τ` taken componentwise.
    pub fn exhaustive(&self) -> Vec<Vec<f64>> {
        let p = self.problem;
        let j_count = self.nodes.len();
        let phi = self.phi();
        let last = self.times.len() - 1;
        let mut slices = vec![Vec::new(); self.times.len()];
        slices[last] = self.nodes.iter().map(|&y| p.terminal(&[y])).collect();
        let p_count = p.max_impulses().len();
        let q_count = p.min_impulses().len();
        let sigma_total = (q_count + 1).pow(j_count as u32);
        let tau_total = (p_count + 1).pow(j_count as u32);
        for i in (0..last).rev() {
            let s = self.times[i];
            let cont = self.continuation(s, &slices[i + 1]);
            let max_imp = self.impulses(s, true);
            let min_imp = self.impulses(s, false);
            let mut best = vec![f64::INFINITY; j_count];
            for sigma in 0..sigma_total {
                let sig = digits(sigma, q_count + 1, j_count);
                let mut worst = vec![f64::NEG_INFINITY; j_count];
                for tau in 0..tau_total {
                    let ta = digits(tau, p_count + 1, j_count);
                    let mut a = vec![vec![0.0; j_count]; j_count];
                    let mut b = vec![0.0; j_count];
                    for j in 0..j_count {
                        a[j][j] = 1.0;
                        let (target, rhs) = if sig[j] > 0 {
                            let (t, c) = min_imp[j][sig[j] - 1];
                            (Some(t), phi * c)
                        } else if ta[j] > 0 {
                            let (t, c) = max_imp[j][ta[j] - 1];
                            (Some(t), -phi * c)
                        } else {
                            (None, cont[j])
                        };
                        b[j] = rhs;
                        if let Some(t) = target {
                            let (k, w) = locate(&self.nodes, t);
                            a[j][k] -= phi * (1.0 - w);
                            a[j][k + 1] -= phi * w;
                        }
                    }
                    let v = solve_dense(a, b);
                    for j in 0..j_count {
                        worst[j] = worst[j].max(v[j]);
                    }
                }
                for j in 0..j_count {
                    best[j] = best[j].min(worst[j]);
                }
            }
            slices[i] = best;
        }
        slices
    }

    /// Plain nested fixed-point iteration of the per-slice min/max
    /// equation, iterated until successive iterates agree to `1e-14`.
    pub fn naive_iteration(&self) -> Vec<Vec<f64>> {
        let p = self.problem;
        let phi = self.phi();
        let last = self.times.len() - 1;
        let mut slices = vec![Vec::new(); self.times.len()];
        slices[last] = self.nodes.iter().map(|&y| p.terminal(&[y])).collect();
        for i in (0..last).rev() {
            let s = self.times[i];
            let cont = self.continuation(s, &slices[i + 1]);
            let max_imp = self.impulses(s, true);
            let min_imp = self.impulses(s, false);
            let mut v = cont.clone();
            for _ in 0..1_000_000 {
                let next: Vec<f64> = (0..v.len())
                    .map(|j| {
                        let up = max_imp[j]
                            .iter()
                            .map(|&(t, c)| interp(&self.nodes, &v, t) - c)
                            .fold(f64::NEG_INFINITY, f64::max);
                        let down = min_imp[j]
                            .iter()
                            .map(|&(t, c)| interp(&self.nodes, &v, t) + c)
                            .fold(f64::INFINITY, f64::min);
                        cont[j].max(phi * up).min(phi * down)
                    })
                    .collect();
                let delta = v.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                v = next;
                if delta < 1e-14 {
                    break;
                }
            }
            slices[i] = v;
        }
        slices
    }
}

fn digits(mut x: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut() {
        *d = x % base;
        x /= base;
    }
    out
}

/// Shapes accepted by the exhaustive oracle within a few seconds:
/// (space nodes, maximizer impulses, minimizer impulses).
pub const ORACLE_SHAPES: [(usize, usize, usize); 5] = [(5, 2, 2), (6, 2, 1), (7, 1, 1), (9, 1, 1), (5, 1, 2)];

/// A random one-dimensional game on `[0, (J−1)/4]` with `h = 1/4`.
///
/// With `aligned`, every drift and jump lands exactly on a grid node:
/// the drift is the control itself in `{−1, 0, 1}` and each impulse moves
/// the state to a fixed node.  Otherwise drift, jumps, gains and costs
/// are arbitrary smooth functions and targets fall between nodes.
pub struct RandomGame {
    pub problem: GameProblem,
    pub grid: TimeSpaceGrid,
    pub start: f64,
}

pub fn random_game(seed: u64, shape: (usize, usize, usize), aligned: bool) -> RandomGame {
    let (j_count, p_count, q_count) = shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.25;
    let width = (j_count - 1) as f64 * h;
    // the path from the middle node cannot reach the box faces
    let steps = ((j_count - 1) / 2).min(4);
    let horizon = steps as f64 * h;
    let lambda = rng.random_range(0.5..2.0);
    let mid = ((j_count - 1) / 2) as f64 * h;

    let thetas = vec![vec![-1.0], vec![0.0], vec![1.0]];
    let (dynamics, jump_max, jump_min, max_grid, min_grid): (VectorFn, VectorFn, VectorFn, Vec<Vec<f64>>, Vec<Vec<f64>>) =
        if aligned {
            let node = |rng: &mut ChaCha8Rng| rng.random_range(1..j_count) as f64 * h;
            let max_grid: Vec<Vec<f64>> = (0..p_count).map(|_| vec![node(&mut rng)]).collect();
            let min_grid: Vec<Vec<f64>> = (0..q_count).map(|_| vec![node(&mut rng)]).collect();
            let go = |_: f64, y: &[f64], u: &[f64], out: &mut [f64]| out[0] = u[0] - y[0];
            (
                VectorFn::custom(|_, _, th, out| out[0] = th[0]),
                VectorFn::custom(go),
                VectorFn::custom(go),
                max_grid,
                min_grid,
            )
        } else {
            let a = rng.random_range(-0.4..0.4);
            let bb = rng.random_range(0.3..1.0);
            let om = rng.random_range(0.5..3.0);
            let max_grid: Vec<Vec<f64>> =
                (0..p_count).map(|k| vec![0.1 + 0.3 * k as f64 + rng.random_range(0.0..0.1)]).collect();
            let min_grid: Vec<Vec<f64>> =
                (0..q_count).map(|k| vec![-0.1 - 0.3 * k as f64 - rng.random_range(0.0..0.1)]).collect();
            let shrink = rng.random_range(0.0..0.3);
            (
                VectorFn::custom(move |s, y, th, out| out[0] = a * (om * y[0] + s).sin() + bb * th[0]),
                VectorFn::custom(move |_, y, u, out| out[0] = u[0] - shrink * (y[0] - 0.5 * width) * u[0].abs()),
                VectorFn::custom(move |_, y, u, out| out[0] = u[0] + shrink * (y[0] - 0.5 * width) * u[0].abs()),
                max_grid,
                min_grid,
            )
        };

    let f0 = rng.random_range(-1.0..1.0);
    let f1 = rng.random_range(-1.0..1.0);
    let f2 = rng.random_range(0.0..1.0);
    let f3 = rng.random_range(0.0..1.0);
    let running = ScalarFn::custom(move |s, y, th| f0 + f1 * (y[0] - s) + f2 * th[0] - f3 * th[0] * th[0]);
    let g0 = rng.random_range(-1.5..1.5);
    let g1 = rng.random_range(1.0..4.0);
    let g2 = rng.random_range(-1.0..1.0);
    let terminal = ScalarFn::custom(move |_, y, _| g0 * (g1 * y[0]).sin() + g2 * y[0]);
    let c0 = rng.random_range(0.02..0.3);
    let c1 = rng.random_range(0.0..0.3);
    let k0 = rng.random_range(0.02..0.3);
    let k1 = rng.random_range(0.0..0.3);
    let cost_max = ScalarFn::custom(move |_, y, u| c0 + c1 * (u[0] - y[0]).abs().min(1.0) * 0.5);
    let cost_min = ScalarFn::custom(move |_, y, u| k0 + k1 * (u[0] + y[0]).abs().min(1.0) * 0.5);

    let problem = GameProblem::builder(1)
        .continuous_controls(thetas)
        .max_impulses(max_grid)
        .min_impulses(min_grid)
        .dynamics(dynamics)
        .jump_max(jump_max)
        .jump_min(jump_min)
        .running_gain(running)
        .terminal_gain(terminal)
        .cost_max(cost_max)
        .cost_min(cost_min)
        .discount(lambda)
        .horizon(0.0, horizon)
        .build()
        .expect("random game is valid");
    let grid = TimeSpaceGrid::from_axes(
        (0.0, horizon),
        h,
        vec![(0..j_count).map(|k| k as f64 * h).collect()],
        BoundaryPolicy::Clamp,
    )
    .unwrap();
    RandomGame {
        problem,
        grid,
        start: mid,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
