//! CSV and JSON writers.  CSV: comma, header row, LF; floats as `{:.16e}`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::game_model::{GameProblem, TrajectoryRecord};
use crate::grid_interp::{fmt_f64, TimeSpaceGrid, ValueField};
use crate::operators::obstacle_residuals;
use crate::portfolio::PortfolioSummary;
use crate::solver::{RefinementTable, SolveReport};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn space_header(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|d| format!("y{d}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn write_value_csv(path: &Path, grid: &TimeSpaceGrid, field: &ValueField) -> Result<()> {
    let f = std::fs::File::create(path)?;
    field.write_csv(grid, std::io::BufWriter::new(f))
}

/// Solve metadata without the bulky arrays.
#[derive(Serialize)]
pub struct SolveSummary<'a> {
    pub grid: &'a TimeSpaceGrid,
    pub config: &'a crate::solver::SolverConfig,
    pub damping: f64,
    pub max_residual: f64,
    pub bound: &'a crate::solver::BoundCheck,
    pub clamped_interpolations: usize,
    pub warnings: &'a [crate::solver::SolverWarning],
    pub slices: &'a [crate::solver::SliceStats],
}

impl<'a> From<&'a SolveReport> for SolveSummary<'a> {
    fn from(r: &'a SolveReport) -> Self {
        Self {
            grid: &r.grid,
            config: &r.config,
            damping: r.damping,
            max_residual: r.max_residual,
            bound: &r.bound,
            clamped_interpolations: r.clamped_interpolations,
            warnings: &r.warnings,
            slices: &r.slices,
        }
    }
}

/// `step,s,y1..,V,regime`.
pub fn write_trajectory_csv(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let dim = record.states.first().map_or(0, Vec::len);
    let mut w = writer(path)?;
    let mut header = vec!["step".to_string(), "s".into()];
    header.extend(space_header(dim));
    header.extend(["V".into(), "regime".into()]);
    w.write_record(&header)?;
    for (k, ((t, y), regime)) in record.times.iter().zip(&record.states).zip(&record.regimes).enumerate() {
        let mut row = vec![k.to_string(), fmt_f64(*t)];
        row.extend(y.iter().map(|v| fmt_f64(*v)));
        row.push(record.values.get(k).map_or_else(String::new, |v| fmt_f64(*v)));
        row.push(regime.as_str().into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_refine_csv(path: &Path, table: &RefinementTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["h", "max_diff", "value_iterations", "policy_iterations", "bound_within", "warnings"])?;
    for r in &table.rows {
        w.write_record([
            fmt_f64(r.h),
            fmt_f64(r.max_diff),
            r.value_iterations.to_string(),
            r.policy_iterations.to_string(),
            r.bound_within.to_string(),
            r.warnings.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `s,w,regime,omega1..`.
pub fn write_portfolio_csv(path: &Path, summary: &PortfolioSummary) -> Result<()> {
    let n = summary.compositions.first().map_or(0, |c| c.weights.len());
    let mut w = writer(path)?;
    let mut header = vec!["s".to_string(), "w".into(), "regime".into()];
    header.extend((1..=n).map(|i| format!("omega{i}")));
    w.write_record(&header)?;
    for c in &summary.compositions {
        let mut row = vec![fmt_f64(c.time), fmt_f64(c.wealth), c.regime.as_str().to_string()];
        row.extend(c.weights.iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `slice,s,y1..,V` for surface plots.
pub fn write_value_surface(path: &Path, grid: &TimeSpaceGrid, field: &ValueField) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["slice".to_string(), "s".into()];
    header.extend(space_header(grid.space_dim()));
    header.push("V".into());
    w.write_record(&header)?;
    let mut y = vec![0.0; grid.space_dim()];
    for i in 0..grid.time_count() {
        for j in 0..grid.space_count() {
            grid.node_into(j, &mut y);
            let mut row = vec![i.to_string(), fmt_f64(grid.time(i))];
            row.extend(y.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(field.value(i, j)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Residual heat-map data on interior nodes of non-terminal slices.
pub fn write_residual_map(
    path: &Path,
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    field: &ValueField,
) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["slice".to_string(), "s".into()];
    header.extend(space_header(grid.space_dim()));
    header.extend(["hjb", "lower_gap", "upper_gap", "composite"].map(String::from));
    w.write_record(&header)?;
    let mut y = vec![0.0; grid.space_dim()];
    for i in 0..grid.time_count().saturating_sub(1) {
        for j in (0..grid.space_count()).filter(|&j| grid.is_interior(j)) {
            grid.node_into(j, &mut y);
            let r = obstacle_residuals(problem, grid, field, i, &y)?;
            let mut row = vec![i.to_string(), fmt_f64(grid.time(i))];
            row.extend(y.iter().map(|v| fmt_f64(*v)));
            row.extend([r.hjb, r.lower_gap, r.upper_gap, r.composite()].map(fmt_f64));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
