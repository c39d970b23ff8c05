use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::grid::TimeSpaceGrid;
use crate::error::{GameError, Result};

/// Which branch of the scheme is active at a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Continuous,
    MaxImpulse,
    MinImpulse,
    Terminal,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Continuous => "continuous",
            Regime::MaxImpulse => "max_impulse",
            Regime::MinImpulse => "min_impulse",
            Regime::Terminal => "terminal",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = GameError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Regime::Continuous),
            "max_impulse" => Ok(Regime::MaxImpulse),
            "min_impulse" => Ok(Regime::MinImpulse),
            "terminal" => Ok(Regime::Terminal),
            other => Err(GameError::config(format!("unknown regime label `{other}`"))),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Values and policy annotations on every (time, space) node, stored
/// slice by slice (`i * space_count + j`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueField {
    time_count: usize,
    space_count: usize,
    values: Vec<f64>,
    theta: Vec<Option<usize>>,
    xi: Vec<Option<usize>>,
    eta: Vec<Option<usize>>,
    regime: Vec<Regime>,
}

/// Annotations for one node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodePolicy {
    pub theta: Option<usize>,
    pub xi: Option<usize>,
    pub eta: Option<usize>,
    pub regime: Regime,
}

impl ValueField {
    pub fn new(time_count: usize, space_count: usize) -> Self {
        let n = time_count * space_count;
        Self {
            time_count,
            space_count,
            values: vec![0.0; n],
            theta: vec![None; n],
            xi: vec![None; n],
            eta: vec![None; n],
            regime: vec![Regime::Continuous; n],
        }
    }

    pub fn for_grid(grid: &TimeSpaceGrid) -> Self {
        Self::new(grid.time_count(), grid.space_count())
    }

    pub fn time_count(&self) -> usize {
        self.time_count
    }
    pub fn space_count(&self) -> usize {
        self.space_count
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.space_count + j
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.space_count..(i + 1) * self.space_count]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.space_count;
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.at(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn policy(&self, i: usize, j: usize) -> NodePolicy {
        let k = self.at(i, j);
        NodePolicy {
            theta: self.theta[k],
            xi: self.xi[k],
            eta: self.eta[k],
            regime: self.regime[k],
        }
    }

    pub fn set_policy(&mut self, i: usize, j: usize, p: NodePolicy) {
        let k = self.at(i, j);
        self.theta[k] = p.theta;
        self.xi[k] = p.xi;
        self.eta[k] = p.eta;
        self.regime[k] = p.regime;
    }

    pub fn regime(&self, i: usize, j: usize) -> Regime {
        self.regime[self.at(i, j)]
    }

    /// Overwrite slice `i` with values and per-node annotations.
    pub fn set_slice(&mut self, i: usize, values: &[f64], policies: &[NodePolicy]) {
        self.slice_mut(i).copy_from_slice(values);
        for (j, p) in policies.iter().enumerate() {
            self.set_policy(i, j, *p);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Long-format CSV: `s, y1..yn, V, regime, theta, xi, eta`.
    pub fn write_csv<W: Write>(&self, grid: &TimeSpaceGrid, out: W) -> Result<()> {
        self.check_grid(grid)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let n = grid.space_dim();
        let mut header = vec!["s".to_string()];
        header.extend((1..=n).map(|d| format!("y{d}")));
        header.extend(["V", "regime", "theta", "xi", "eta"].map(String::from));
        w.write_record(&header)?;
        let mut y = vec![0.0; n];
        let idx = |o: Option<usize>| o.map(|k| k.to_string()).unwrap_or_default();
        for i in 0..self.time_count {
            let s = fmt_f64(grid.time(i));
            for j in 0..self.space_count {
                grid.node_into(j, &mut y);
                let p = self.policy(i, j);
                let mut rec = Vec::with_capacity(n + 6);
                rec.push(s.clone());
                rec.extend(y.iter().map(|&v| fmt_f64(v)));
                rec.push(fmt_f64(self.value(i, j)));
                rec.push(p.regime.as_str().to_string());
                rec.push(idx(p.theta));
                rec.push(idx(p.xi));
                rec.push(idx(p.eta));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Inverse of [`ValueField::write_csv`]; rows must appear in the
    /// order the writer produces.
    pub fn read_csv<R: Read>(grid: &TimeSpaceGrid, input: R) -> Result<Self> {
        let mut field = Self::for_grid(grid);
        let n = grid.space_dim();
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != n + 6 {
            return Err(GameError::Dimension {
                context: "value CSV columns".into(),
                expected: n + 6,
                found: headers.len(),
            });
        }
        let parse_idx = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| GameError::config(format!("bad policy index `{s}`")))
            }
        };
        let mut count = 0usize;
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if row >= field.values.len() {
                return Err(GameError::config("value CSV has more rows than the grid"));
            }
            let v: f64 = rec[n + 1]
                .parse()
                .map_err(|_| GameError::config(format!("bad value `{}` in row {row}", &rec[n + 1])))?;
            field.values[row] = v;
            field.regime[row] = rec[n + 2].parse()?;
            field.theta[row] = parse_idx(&rec[n + 3])?;
            field.xi[row] = parse_idx(&rec[n + 4])?;
            field.eta[row] = parse_idx(&rec[n + 5])?;
            count += 1;
        }
        if count != field.values.len() {
            return Err(GameError::Dimension {
                context: "value CSV rows".into(),
                expected: field.values.len(),
                found: count,
            });
        }
        Ok(field)
    }

    fn check_grid(&self, grid: &TimeSpaceGrid) -> Result<()> {
        if grid.time_count() != self.time_count || grid.space_count() != self.space_count {
            return Err(GameError::Dimension {
                context: "value field vs grid nodes".into(),
                expected: grid.time_count() * grid.space_count(),
                found: self.time_count * self.space_count,
            });
        }
        Ok(())
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
