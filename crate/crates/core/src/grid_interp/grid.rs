use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// What to do with points outside the space box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    #[default]
    Error,
    Clamp,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "error" => Ok(BoundaryPolicy::Error),
            "clamp" => Ok(BoundaryPolicy::Clamp),
            other => Err(format!("unknown boundary policy `{other}` (expected error|clamp)")),
        }
    }
}

/// Uniform axis description `(lo, hi, count)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Absolute slack, relative to the axis span, under which a coordinate just
/// outside the box is treated as lying on its face.
const FACE_SLACK: f64 = 1e-12;

/// Uniform time nodes times a rectangular tensor grid in space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSpaceGrid {
    start: f64,
    end: f64,
    step: f64,
    time_count: usize,
    axes: Vec<Vec<f64>>,
    /// Row-major strides, last axis fastest.
    strides: Vec<usize>,
    space_count: usize,
    boundary: BoundaryPolicy,
}

/// Interpolation weights for one point: `(linear node index, weight)` pairs
/// with zero weights dropped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stencil {
    pub entries: Vec<(usize, f64)>,
    /// The point was projected onto the box.
    pub clamped: bool,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, slice: &[f64]) -> f64 {
        // A single entry carries weight exactly 1; skip the multiply so node
        // values come back bit-identical.
        if let [(j, _)] = self.entries.as_slice() {
            return slice[*j];
        }
        self.entries.iter().map(|&(j, w)| w * slice[j]).sum()
    }
}

/// Build the grid; `h` must divide `T − t` to within `1e-12` relative error.
pub fn build_grid(
    horizon: (f64, f64),
    h: f64,
    space_box: &[AxisSpec],
    boundary: BoundaryPolicy,
) -> Result<TimeSpaceGrid> {
    let axes = space_box
        .iter()
        .enumerate()
        .map(|(d, a)| {
            if a.count < 2 {
                return Err(GameError::config(format!("space axis {d} needs at least 2 nodes")));
            }
            if !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(GameError::config(format!("space axis {d} needs lo < hi")));
            }
            let n = a.count - 1;
            let width = a.hi - a.lo;
            let mut nodes: Vec<f64> = (0..=n).map(|k| a.lo + width * k as f64 / n as f64).collect();
            nodes[n] = a.hi;
            Ok(nodes)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSpaceGrid::from_axes(horizon, h, axes, boundary)
}

impl TimeSpaceGrid {
    /// Grid with explicit (strictly increasing) node lists per space axis.
    pub fn from_axes(
        horizon: (f64, f64),
        h: f64,
        axes: Vec<Vec<f64>>,
        boundary: BoundaryPolicy,
    ) -> Result<Self> {
        let (start, end) = horizon;
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(GameError::config("horizon must satisfy t < T"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(GameError::config(format!("time step must be positive, got {h}")));
        }
        let span = end - start;
        let ratio = span / h;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-12 * ratio.max(1.0) {
            let suggestion = span / steps.max(1.0);
            return Err(GameError::config(format!(
                "h = {h} does not divide T − t = {span}; nearest admissible step is {suggestion}"
            )));
        }
        if axes.is_empty() {
            return Err(GameError::config("space grid needs at least one axis"));
        }
        for (d, nodes) in axes.iter().enumerate() {
            if nodes.len() < 2 {
                return Err(GameError::config(format!("space axis {d} needs at least 2 nodes")));
            }
            if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|v| !v.is_finite()) {
                return Err(GameError::config(format!("space axis {d} must be strictly increasing")));
            }
        }
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len() - 1).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].len();
        }
        let space_count = strides[0] * axes[0].len();
        let steps = steps as usize;
        Ok(Self {
            start,
            end,
            step: span / steps as f64,
            time_count: steps + 1,
            axes,
            strides,
            space_count,
            boundary,
        })
    }

    pub fn with_boundary(&self, boundary: BoundaryPolicy) -> Self {
        let mut g = self.clone();
        g.boundary = boundary;
        g
    }

    /// Same space grid, different step.
    pub fn with_step(&self, h: f64) -> Result<Self> {
        Self::from_axes((self.start, self.end), h, self.axes.clone(), self.boundary)
    }

    /// Same space grid and step over a different horizon.
    pub fn with_horizon(&self, start: f64, end: f64) -> Result<Self> {
        Self::from_axes((start, end), self.step, self.axes.clone(), self.boundary)
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn end(&self) -> f64 {
        self.end
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn time_count(&self) -> usize {
        self.time_count
    }
    pub fn space_count(&self) -> usize {
        self.space_count
    }
    pub fn space_dim(&self) -> usize {
        self.axes.len()
    }
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }
    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    /// `s_i`; the last node is `T` exactly.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.time_count {
            self.end
        } else {
            self.start + i as f64 * self.step
        }
    }

    pub fn time_nodes(&self) -> Vec<f64> {
        (0..self.time_count).map(|i| self.time(i)).collect()
    }

    /// Coordinates of space node `j`.
    pub fn node(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        self.node_into(j, &mut out);
        out
    }

    pub fn node_into(&self, j: usize, out: &mut [f64]) {
        for (d, axis) in self.axes.iter().enumerate() {
            out[d] = axis[(j / self.strides[d]) % axis.len()];
        }
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.space_count).map(|j| self.node(j)).collect()
    }

    /// Linear index from per-axis indices.
    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    /// Per-axis indices of node `j`.
    pub fn multi_index(&self, j: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(axis, s)| (j / s) % axis.len())
            .collect()
    }

    /// Whether node `j` has a neighbour on both sides along every axis.
    pub fn is_interior(&self, j: usize) -> bool {
        self.multi_index(j)
            .iter()
            .zip(&self.axes)
            .all(|(&k, axis)| k > 0 && k + 1 < axis.len())
    }

    /// Index of the space node nearest to `point` (coordinates are snapped
    /// into the box first).
    pub fn nearest_node(&self, point: &[f64]) -> usize {
        let multi: Vec<usize> = self
            .axes
            .iter()
            .zip(point)
            .map(|(axis, &x)| {
                let k = axis.partition_point(|&v| v < x);
                if k == 0 {
                    0
                } else if k == axis.len() {
                    axis.len() - 1
                } else if x - axis[k - 1] <= axis[k] - x {
                    k - 1
                } else {
                    k
                }
            })
            .collect();
        self.linear_index(&multi)
    }

    /// Check a point against the box under the error policy.
    pub fn check_inside(&self, point: &[f64]) -> Result<()> {
        for (d, (axis, &x)) in self.axes.iter().zip(point).enumerate() {
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            let slack = FACE_SLACK * (hi - lo);
            if !(x >= lo - slack && x <= hi + slack) {
                return Err(GameError::OutOfDomain {
                    axis: d,
                    value: x,
                    lo,
                    hi,
                    step: None,
                });
            }
        }
        Ok(())
    }

    /// Multilinear interpolation weights at `point`.
    pub fn stencil(&self, point: &[f64]) -> Result<Stencil> {
        if point.len() != self.axes.len() {
            return Err(GameError::Dimension {
                context: "interpolation point".into(),
                expected: self.axes.len(),
                found: point.len(),
            });
        }
        let mut clamped = false;
        // (lower index, upper weight) per axis
        let mut cells = Vec::with_capacity(self.axes.len());
        for (d, (axis, &raw)) in self.axes.iter().zip(point).enumerate() {
            let last = axis.len() - 1;
            let (lo, hi) = (axis[0], axis[last]);
            let slack = FACE_SLACK * (hi - lo);
            let x = if raw >= lo && raw <= hi {
                raw
            } else if raw >= lo - slack && raw <= hi + slack {
                raw.clamp(lo, hi)
            } else {
                match self.boundary {
                    BoundaryPolicy::Error => {
                        return Err(GameError::OutOfDomain {
                            axis: d,
                            value: raw,
                            lo,
                            hi,
                            step: None,
                        })
                    }
                    BoundaryPolicy::Clamp => {
                        if raw.is_nan() {
                            return Err(GameError::OutOfDomain {
                                axis: d,
                                value: raw,
                                lo,
                                hi,
                                step: None,
                            });
                        }
                        clamped = true;
                        raw.clamp(lo, hi)
                    }
                }
            };
            let k = axis.partition_point(|&v| v <= x).saturating_sub(1).min(last - 1);
            let w = (x - axis[k]) / (axis[k + 1] - axis[k]);
            cells.push((k, w));
        }
        let mut entries: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (d, &(k, w)) in cells.iter().enumerate() {
            let stride = self.strides[d];
            let mut next = Vec::with_capacity(entries.len() * 2);
            for &(j, weight) in &entries {
                if w < 1.0 {
                    next.push((j + k * stride, if w == 0.0 { weight } else { weight * (1.0 - w) }));
                }
                if w > 0.0 {
                    next.push((j + (k + 1) * stride, if w == 1.0 { weight } else { weight * w }));
                }
            }
            entries = next;
        }
        Ok(Stencil { entries, clamped })
    }

    /// Multilinear interpolation of one time slice at `point`.
    pub fn interpolate(&self, slice: &[f64], point: &[f64]) -> Result<f64> {
        if slice.len() != self.space_count {
            return Err(GameError::Dimension {
                context: "field slice".into(),
                expected: self.space_count,
                found: slice.len(),
            });
        }
        Ok(self.stencil(point)?.apply(slice))
    }
}

/// Free-function form of [`TimeSpaceGrid::interpolate`].
pub fn interpolate(slice: &[f64], grid: &TimeSpaceGrid, point: &[f64]) -> Result<f64> {
    grid.interpolate(slice, point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, hi: f64, count: usize) -> AxisSpec {
        AxisSpec { lo, hi, count }
    }

    #[test]
    fn builds_uniform_nodes() {
        let g = build_grid((0.0, 1.0), 0.25, &[axis(0.0, 2.0, 5)], BoundaryPolicy::Error).unwrap();
        assert_eq!(g.time_count(), 5);
        assert_eq!(g.axes()[0], vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = build_grid((0.0, 2.0), 0.5, &[axis(0.0, 1.0, 2)], BoundaryPolicy::Error).unwrap();
        assert_eq!(g.time_nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_non_dividing_step() {
        let err = build_grid((0.0, 1.0), 0.3, &[axis(0.0, 1.0, 3)], BoundaryPolicy::Error).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nearest admissible"), "{msg}");
        assert!(msg.contains("0.3333"), "{msg}");
    }

    #[test]
    fn midpoint_and_nodes() {
        let g = build_grid((0.0, 1.0), 0.5, &[axis(0.0, 1.0, 2)], BoundaryPolicy::Error).unwrap();
        assert_eq!(g.interpolate(&[2.0, 4.0], &[0.5]).unwrap(), 3.0);
        assert_eq!(g.interpolate(&[2.0, 4.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(g.interpolate(&[2.0, 4.0], &[0.0]).unwrap(), 2.0);
    }

    #[test]
    fn error_names_the_axis() {
        let g = build_grid(
            (0.0, 1.0),
            0.5,
            &[axis(0.0, 1.0, 3), axis(-1.0, 1.0, 3)],
            BoundaryPolicy::Error,
        )
        .unwrap();
        match g.stencil(&[0.5, 1.5]).unwrap_err() {
            GameError::OutOfDomain { axis, value, .. } => {
                assert_eq!(axis, 1);
                assert_eq!(value, 1.5);
            }
            e => panic!("unexpected {e}"),
        }
        let c = g.with_boundary(BoundaryPolicy::Clamp).stencil(&[0.5, 1.5]).unwrap();
        assert!(c.clamped);
    }

    #[test]
    fn row_major_layout() {
        let g = build_grid(
            (0.0, 1.0),
            0.5,
            &[axis(0.0, 1.0, 2), axis(0.0, 2.0, 3)],
            BoundaryPolicy::Error,
        )
        .unwrap();
        assert_eq!(g.node(1), vec![0.0, 1.0]);
        assert_eq!(g.node(3), vec![1.0, 0.0]);
        assert_eq!(g.linear_index(&[1, 2]), 5);
        assert_eq!(g.nearest_node(&[0.9, 1.4]), 4);
        assert!(!g.is_interior(4));
    }
}
