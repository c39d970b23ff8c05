//! Config ingestion, run orchestration and export.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver warnings under
//! `strict`, a failed equilibrium audit under `strict`, or a path that
//! leaves the space box under the error policy.

mod config;
mod export;
mod manifest;

use std::path::{Path, PathBuf};

pub use config::{
    GridSection, OutputSection, PortfolioSection, ProblemSection, RefineSection, RunConfig, VerifySection,
};
pub use export::{
    write_json, write_portfolio_csv, write_refine_csv, write_residual_map, write_trajectory_csv,
    write_value_csv, write_value_surface, SolveSummary,
};
pub use manifest::{describe_file, sha256_hex, GridSummary, OutputFile, ProblemSummary, RunManifest};

use crate::error::{GameError, Result};
use crate::game_model::{GameProblem, TrajectoryRecord};
use crate::grid_interp::{BoundaryPolicy, TimeSpaceGrid};
use crate::nash::{extract_equilibrium, verify_equilibrium};
use crate::portfolio::solve_portfolio;
use crate::solver::{backward_sweep, refinement_study, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Extract,
    Verify,
    Refine,
    Portfolio,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Extract => "extract",
            Command::Verify => "verify",
            Command::Refine => "refine",
            Command::Portfolio => "portfolio",
        }
    }
}

/// Command-line overrides; `Some` wins over the config file.
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub h: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub emit_plots: bool,
    pub strict: bool,
    pub boundary: Option<BoundaryPolicy>,
    pub seed: Option<u64>,
}

impl RunFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(h) = self.h {
            cfg.solver.h = h;
        }
        if let Some(t) = self.tolerance {
            cfg.solver.tolerance = t;
        }
        if let Some(m) = self.max_iterations {
            cfg.solver.max_iterations = m;
        }
        if let Some(d) = &self.output_dir {
            cfg.output.dir = d.to_string_lossy().into_owned();
        }
        if self.emit_plots {
            cfg.output.emit_plots = true;
        }
        if let Some(b) = self.boundary {
            cfg.grid.boundary = b;
        }
        if let Some(s) = self.seed {
            cfg.verify.seed = s;
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub messages: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
}

struct Session {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
    messages: Vec<String>,
    exit_code: i32,
    problem: Option<ProblemSummary>,
    grid: Option<GridSummary>,
}

impl Session {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn escalate(&mut self, code: i32, message: String) {
        self.exit_code = self.exit_code.max(code);
        self.messages.push(message);
    }

    fn note(&mut self, problem: &GameProblem, grid: &TimeSpaceGrid) {
        self.problem = Some(problem.into());
        self.grid = Some(grid.into());
    }
}

fn exit_code_for(err: &GameError) -> i32 {
    if err.is_out_of_domain() {
        2
    } else {
        1
    }
}

/// Load `config_path`, apply `flags`, run `command` and write every
/// artifact plus `manifest.json` into the output directory.
pub fn run(command: Command, config_path: &Path, flags: &RunFlags) -> RunOutcome {
    let started_at = manifest::timestamp();
    let (mut cfg, bytes) = match RunConfig::load(config_path) {
        Ok(v) => v,
        Err(e) => {
            return RunOutcome {
                exit_code: 1,
                messages: vec![format!("{}: {e}", config_path.display())],
                outputs: Vec::new(),
                manifest: None,
            }
        }
    };
    flags.apply(&mut cfg);
    let dir = PathBuf::from(&cfg.output.dir);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return RunOutcome {
            exit_code: 1,
            messages: vec![format!("cannot create {}: {e}", dir.display())],
            outputs: Vec::new(),
            manifest: None,
        };
    }
    let mut session = Session {
        dir,
        outputs: Vec::new(),
        messages: Vec::new(),
        exit_code: 0,
        problem: None,
        grid: None,
    };
    if let Err(e) = execute(command, &cfg, flags.strict, &mut session) {
        let code = exit_code_for(&e);
        session.escalate(code, e.to_string());
    }
    let mut files = Vec::new();
    for p in &session.outputs {
        match describe_file(p) {
            Ok(f) => files.push(f),
            Err(e) => session.messages.push(format!("{}: {e}", p.display())),
        }
    }
    let manifest = RunManifest {
        tool: "impulse-game".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.as_str().into(),
        config_path: config_path.to_path_buf(),
        config_sha256: sha256_hex(&bytes),
        problem: session.problem.clone(),
        grid: session.grid.clone(),
        solver: cfg.solver.clone(),
        exit_code: session.exit_code,
        messages: session.messages.clone(),
        outputs: files,
        started_at,
        finished_at: manifest::timestamp(),
    };
    let manifest_path = session.dir.join("manifest.json");
    let manifest_written = match write_json(&manifest_path, &manifest) {
        Ok(()) => Some(manifest_path),
        Err(e) => {
            session.escalate(1, format!("manifest: {e}"));
            None
        }
    };
    RunOutcome {
        exit_code: session.exit_code,
        messages: session.messages,
        outputs: session.outputs,
        manifest: manifest_written,
    }
}

fn solve_and_export(
    cfg: &RunConfig,
    problem: &GameProblem,
    grid: &TimeSpaceGrid,
    strict: bool,
    s: &mut Session,
) -> Result<SolveReport> {
    let report = backward_sweep(problem, grid, &cfg.solver)?;
    write_value_csv(&s.path("value.csv"), grid, &report.value_field)?;
    write_json(&s.path("solve.json"), &SolveSummary::from(&report))?;
    if cfg.output.emit_plots {
        write_value_surface(&s.path("plot_value_surface.csv"), grid, &report.value_field)?;
        write_residual_map(&s.path("plot_residual.csv"), problem, grid, &report.value_field)?;
    }
    for w in &report.warnings {
        let code = if strict { 2 } else { 0 };
        s.escalate(code, format!("warning: {w}"));
    }
    Ok(report)
}

fn export_path(cfg: &RunConfig, record: &TrajectoryRecord, s: &mut Session) -> Result<()> {
    write_trajectory_csv(&s.path("trajectory.csv"), record)?;
    write_json(&s.path("trajectory.json"), record)?;
    if cfg.output.emit_plots {
        write_trajectory_csv(&s.path("plot_path.csv"), record)?;
    }
    if record.truncated {
        let why = record.diagnostic.clone().unwrap_or_else(|| "path left the space box".into());
        s.escalate(2, format!("trajectory truncated: {why}"));
    }
    Ok(())
}

fn execute(command: Command, cfg: &RunConfig, strict: bool, s: &mut Session) -> Result<()> {
    cfg.solver.validate()?;
    let grid = cfg.build_grid()?;
    let problem = cfg.build_problem()?;
    s.note(&problem, &grid);
    match command {
        Command::Solve => {
            solve_and_export(cfg, &problem, &grid, strict, s)?;
        }
        Command::Extract => {
            let report = solve_and_export(cfg, &problem, &grid, strict, s)?;
            let start = cfg.initial_state(&grid);
            let (strategy, record) = extract_equilibrium(&problem, &report, &start, &cfg.solver)?;
            write_json(&s.path("strategy.json"), &strategy)?;
            export_path(cfg, &record, s)?;
        }
        Command::Verify => {
            let report = solve_and_export(cfg, &problem, &grid, strict, s)?;
            let start = cfg.initial_state(&grid);
            let ne = verify_equilibrium(&problem, &report, &start, &cfg.verify_options(), &cfg.solver)?;
            write_json(&s.path("ne_report.json"), &ne)?;
            if ne.trajectory_truncated {
                s.escalate(2, "equilibrium path left the space box".into());
            } else if !ne.passed {
                let code = if strict { 2 } else { 0 };
                s.escalate(
                    code,
                    format!(
                        "equilibrium audit failed: payoff gap {:e}, best deviation gains {:e} (max) / {:e} (min)",
                        ne.payoff_gap, ne.maximizer.worst_improvement, ne.minimizer.worst_improvement
                    ),
                );
            }
        }
        Command::Refine => {
            if cfg.refine.h_list.is_empty() {
                return Err(GameError::Config("refine needs [refine] h_list".into()));
            }
            let table = refinement_study(&problem, &grid, &cfg.refine.h_list, &cfg.solver)?;
            write_refine_csv(&s.path("refine.csv"), &table)?;
            write_json(&s.path("refine.json"), &table)?;
            let warned: usize = table.rows.iter().map(|r| r.warnings).sum();
            if warned > 0 {
                let code = if strict { 2 } else { 0 };
                s.escalate(code, format!("warning: {warned} solver warnings across the refinement runs"));
            }
        }
        Command::Portfolio => {
            let pp = cfg.portfolio_problem(&grid)?;
            let wealth = cfg.initial_state(&grid)[0];
            let sol = solve_portfolio(&pp, &grid, &cfg.solver, wealth)?;
            write_value_csv(&s.path("value.csv"), &grid, &sol.report.value_field)?;
            write_json(&s.path("solve.json"), &SolveSummary::from(&sol.report))?;
            if cfg.output.emit_plots {
                write_value_surface(&s.path("plot_value_surface.csv"), &grid, &sol.report.value_field)?;
                write_residual_map(&s.path("plot_residual.csv"), &sol.game, &grid, &sol.report.value_field)?;
            }
            for w in &sol.report.warnings {
                let code = if strict { 2 } else { 0 };
                s.escalate(code, format!("warning: {w}"));
            }
            write_portfolio_csv(&s.path("portfolio_strategy.csv"), &sol.summary)?;
            write_json(&s.path("portfolio_summary.json"), &sol.summary)?;
            write_json(&s.path("strategy.json"), &sol.strategy)?;
            export_path(cfg, &sol.trajectory, s)?;
        }
    }
    Ok(())
}
