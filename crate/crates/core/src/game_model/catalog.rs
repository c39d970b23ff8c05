//! Declarative function families used to describe model data.
//!
//! Every model function of a game (dynamics, jump maps, gains and costs) is
//! either one of the named families below, parameterised by plain numbers so
//! it can live in a config file, or an in-process closure.  Empty coefficient
//! vectors mean "all zero", so `{ kind = "affine", offset = 1.0 }` is a valid
//! constant function of any dimension.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// A scalar curve of time, used for tabulated return paths and
/// time-varying gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Constant {
        value: f64,
    },
    /// Piecewise-linear through `(times[k], values[k])`, flat outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Curve {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Curve::Constant { value } => *value,
            Curve::Table { times, values } => {
                if s <= times[0] {
                    return values[0];
                }
                let last = times.len() - 1;
                if s >= times[last] {
                    return values[last];
                }
                let k = times.partition_point(|&t| t <= s) - 1;
                let w = (s - times[k]) / (times[k + 1] - times[k]);
                values[k] + w * (values[k + 1] - values[k])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Curve::Constant { value } if !value.is_finite() => {
                Err(GameError::config("curve constant must be finite"))
            }
            Curve::Constant { .. } => Ok(()),
            Curve::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(GameError::config(
                        "table curve needs matching, non-empty `times` and `values`",
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(GameError::config("table curve times must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Largest absolute value the curve attains.
    pub fn sup_abs(&self) -> f64 {
        match self {
            Curve::Constant { value } => value.abs(),
            Curve::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// Which argument a fixed-plus-proportional cost scales with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProportionalBase {
    /// Euclidean norm of the state (wealth for a one-dimensional state).
    State,
    /// Euclidean norm of the control or impulse.
    #[default]
    Control,
}

/// Scalar-valued families `(s, y, u) -> R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant {
        value: f64,
    },
    /// `state·y + control·u + time·s + offset`.
    Affine {
        #[serde(default)]
        state: Vec<f64>,
        #[serde(default)]
        control: Vec<f64>,
        #[serde(default)]
        time: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Weighted squared distances to a state centre and a control centre.
    Quadratic {
        #[serde(default)]
        state_weight: Vec<f64>,
        #[serde(default)]
        state_center: Vec<f64>,
        #[serde(default)]
        control_weight: Vec<f64>,
        #[serde(default)]
        control_center: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `fixed + proportional·‖base‖`.
    FixedPlusProportional {
        fixed: f64,
        #[serde(default)]
        proportional: f64,
        #[serde(default)]
        base: ProportionalBase,
    },
    /// `bound·tanh(inner/bound)`, bounded by `bound` in absolute value.
    Saturating {
        bound: f64,
        inner: Box<ScalarSpec>,
    },
    /// `scale·ln(clamp(y[axis], floor, ceiling))`.
    LogState {
        scale: f64,
        floor: f64,
        ceiling: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `scale·curve(s)`.
    TimeCurve {
        curve: Curve,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<ScalarSpec>,
    },
}

fn one() -> f64 {
    1.0
}

fn dot_prefix(coef: &[f64], x: &[f64]) -> f64 {
    coef.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_len(name: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.is_empty() || v.len() == expected {
        Ok(())
    } else {
        Err(GameError::Dimension {
            context: name.to_string(),
            expected,
            found: v.len(),
        })
    }
}

impl ScalarSpec {
    pub fn eval(&self, s: f64, y: &[f64], u: &[f64]) -> f64 {
        match self {
            ScalarSpec::Constant { value } => *value,
            ScalarSpec::Affine {
                state,
                control,
                time,
                offset,
            } => dot_prefix(state, y) + dot_prefix(control, u) + time * s + offset,
            ScalarSpec::Quadratic {
                state_weight,
                state_center,
                control_weight,
                control_center,
                offset,
            } => {
                let sq = |w: &[f64], c: &[f64], x: &[f64]| -> f64 {
                    w.iter()
                        .enumerate()
                        .map(|(k, wk)| {
                            let d = x[k] - c.get(k).copied().unwrap_or(0.0);
                            wk * d * d
                        })
                        .sum()
                };
                sq(state_weight, state_center, y) + sq(control_weight, control_center, u) + offset
            }
            ScalarSpec::FixedPlusProportional {
                fixed,
                proportional,
                base,
            } => {
                let b = match base {
                    ProportionalBase::State => norm(y),
                    ProportionalBase::Control => norm(u),
                };
                fixed + proportional * b
            }
            ScalarSpec::Saturating { bound, inner } => bound * (inner.eval(s, y, u) / bound).tanh(),
            ScalarSpec::LogState {
                scale,
                floor,
                ceiling,
                axis,
            } => scale * y[*axis].clamp(*floor, *ceiling).ln(),
            ScalarSpec::TimeCurve { curve, scale } => scale * curve.eval(s),
            ScalarSpec::Sum { terms } => terms.iter().map(|t| t.eval(s, y, u)).sum(),
        }
    }

    /// Check coefficient lengths against the state and control dimensions.
    pub fn validate(&self, state_dim: usize, control_dim: usize) -> Result<()> {
        match self {
            ScalarSpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(GameError::config("constant must be finite"))
                }
            }
            ScalarSpec::Affine { state, control, .. } => {
                check_len("affine state coefficients", state, state_dim)?;
                check_len("affine control coefficients", control, control_dim)
            }
            ScalarSpec::Quadratic {
                state_weight,
                state_center,
                control_weight,
                control_center,
                ..
            } => {
                check_len("quadratic state weights", state_weight, state_dim)?;
                check_len("quadratic state centre", state_center, state_dim)?;
                check_len("quadratic control weights", control_weight, control_dim)?;
                check_len("quadratic control centre", control_center, control_dim)
            }
            ScalarSpec::FixedPlusProportional { .. } => Ok(()),
            ScalarSpec::Saturating { bound, inner } => {
                if !(*bound > 0.0) {
                    return Err(GameError::config("saturating bound must be positive"));
                }
                inner.validate(state_dim, control_dim)
            }
            ScalarSpec::LogState {
                floor,
                ceiling,
                axis,
                ..
            } => {
                if !(*floor > 0.0 && ceiling >= floor) {
                    return Err(GameError::config("log_state needs 0 < floor <= ceiling"));
                }
                if *axis >= state_dim {
                    return Err(GameError::Dimension {
                        context: "log_state axis".into(),
                        expected: state_dim,
                        found: *axis,
                    });
                }
                Ok(())
            }
            ScalarSpec::TimeCurve { curve, .. } => curve.validate(),
            ScalarSpec::Sum { terms } => terms
                .iter()
                .try_for_each(|t| t.validate(state_dim, control_dim)),
        }
    }
}

/// Vector-valued families `(s, y, u) -> R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSpec {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `A·y + B·u + time·s + offset`; any empty part is zero.
    Affine {
        #[serde(default)]
        state: Vec<Vec<f64>>,
        #[serde(default)]
        control: Vec<Vec<f64>>,
        #[serde(default)]
        time: Vec<f64>,
        #[serde(default)]
        offset: Vec<f64>,
    },
    /// Moves the state a `fraction` of the way to the target `u`: `fraction·(u − y)`.
    Reposition {
        #[serde(default = "one")]
        fraction: f64,
    },
    /// Componentwise `bound·tanh(inner/bound)`.
    Saturating {
        bound: f64,
        inner: Box<VectorSpec>,
    },
    /// One-dimensional wealth growth `scale·y·Σ_i u_i·r_i(s)`.
    WealthWeighted {
        returns: Vec<Curve>,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl VectorSpec {
    pub fn eval_into(&self, s: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            VectorSpec::Zero => out.fill(0.0),
            VectorSpec::Constant { value } => out.copy_from_slice(value),
            VectorSpec::Affine {
                state,
                control,
                time,
                offset,
            } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = offset.get(i).copied().unwrap_or(0.0)
                        + time.get(i).copied().unwrap_or(0.0) * s;
                    if let Some(row) = state.get(i) {
                        acc += dot_prefix(row, y);
                    }
                    if let Some(row) = control.get(i) {
                        acc += dot_prefix(row, u);
                    }
                    *o = acc;
                }
            }
            VectorSpec::Reposition { fraction } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = fraction * (u[i] - y[i]);
                }
            }
            VectorSpec::Saturating { bound, inner } => {
                inner.eval_into(s, y, u, out);
                for o in out.iter_mut() {
                    *o = bound * (*o / bound).tanh();
                }
            }
            VectorSpec::WealthWeighted { returns, scale } => {
                let rate: f64 = returns.iter().zip(u).map(|(r, w)| w * r.eval(s)).sum();
                out[0] = scale * y[0] * rate;
            }
        }
    }

    pub fn validate(&self, state_dim: usize, control_dim: usize) -> Result<()> {
        let dim_err = |context: &str, expected, found| GameError::Dimension {
            context: context.to_string(),
            expected,
            found,
        };
        match self {
            VectorSpec::Zero => Ok(()),
            VectorSpec::Constant { value } => {
                if value.len() == state_dim {
                    Ok(())
                } else {
                    Err(dim_err("constant vector", state_dim, value.len()))
                }
            }
            VectorSpec::Affine {
                state,
                control,
                time,
                offset,
            } => {
                for (name, rows, width) in [
                    ("affine state matrix", state, state_dim),
                    ("affine control matrix", control, control_dim),
                ] {
                    if !rows.is_empty() && rows.len() != state_dim {
                        return Err(dim_err(name, state_dim, rows.len()));
                    }
                    for row in rows {
                        check_len(name, row, width)?;
                    }
                }
                check_len("affine time coefficients", time, state_dim)?;
                check_len("affine offset", offset, state_dim)
            }
            VectorSpec::Reposition { .. } => {
                if control_dim == state_dim {
                    Ok(())
                } else {
                    Err(dim_err("reposition target", state_dim, control_dim))
                }
            }
            VectorSpec::Saturating { bound, inner } => {
                if !(*bound > 0.0) {
                    return Err(GameError::config("saturating bound must be positive"));
                }
                inner.validate(state_dim, control_dim)
            }
            VectorSpec::WealthWeighted { returns, .. } => {
                if state_dim != 1 {
                    return Err(dim_err("wealth-weighted state", 1, state_dim));
                }
                if returns.len() != control_dim {
                    return Err(dim_err("wealth-weighted returns", control_dim, returns.len()));
                }
                returns.iter().try_for_each(Curve::validate)
            }
        }
    }
}

type ScalarClosure = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;
type VectorClosure = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// A scalar model function: a catalog entry or an in-process closure.
#[derive(Clone)]
pub enum ScalarFn {
    Spec(ScalarSpec),
    Custom(Arc<ScalarClosure>),
}

impl ScalarFn {
    pub fn custom(f: impl Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Custom(Arc::new(f))
    }

    pub fn constant(value: f64) -> Self {
        ScalarFn::Spec(ScalarSpec::Constant { value })
    }

    #[inline]
    pub fn eval(&self, s: f64, y: &[f64], u: &[f64]) -> f64 {
        match self {
            ScalarFn::Spec(spec) => spec.eval(s, y, u),
            ScalarFn::Custom(f) => f(s, y, u),
        }
    }

    pub fn spec(&self) -> Option<&ScalarSpec> {
        match self {
            ScalarFn::Spec(spec) => Some(spec),
            ScalarFn::Custom(_) => None,
        }
    }
}

impl From<ScalarSpec> for ScalarFn {
    fn from(spec: ScalarSpec) -> Self {
        ScalarFn::Spec(spec)
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Spec(spec) => spec.fmt(f),
            ScalarFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A vector model function: a catalog entry or an in-process closure.
#[derive(Clone)]
pub enum VectorFn {
    Spec(VectorSpec),
    Custom(Arc<VectorClosure>),
}

impl VectorFn {
    pub fn custom(f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        VectorFn::Custom(Arc::new(f))
    }

    pub fn zero() -> Self {
        VectorFn::Spec(VectorSpec::Zero)
    }

    #[inline]
    pub fn eval_into(&self, s: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            VectorFn::Spec(spec) => spec.eval_into(s, y, u, out),
            VectorFn::Custom(f) => f(s, y, u, out),
        }
    }

    pub fn eval(&self, s: f64, y: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.eval_into(s, y, u, &mut out);
        out
    }

    pub fn spec(&self) -> Option<&VectorSpec> {
        match self {
            VectorFn::Spec(spec) => Some(spec),
            VectorFn::Custom(_) => None,
        }
    }
}

impl From<VectorSpec> for VectorFn {
    fn from(spec: VectorSpec) -> Self {
        VectorFn::Spec(spec)
    }
}

impl fmt::Debug for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorFn::Spec(spec) => spec.fmt(f),
            VectorFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}
