use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::game_model::{Damping, GameProblem};
use crate::grid_interp::{BoundaryPolicy, TimeSpaceGrid};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub state_dim: usize,
    pub continuous_controls: usize,
    pub max_impulses: usize,
    pub min_impulses: usize,
    pub discount: f64,
    pub horizon: [f64; 2],
    pub damping: Damping,
}

impl From<&GameProblem> for ProblemSummary {
    fn from(p: &GameProblem) -> Self {
        let h = p.horizon();
        Self {
            state_dim: p.state_dim(),
            continuous_controls: p.continuous_controls().len(),
            max_impulses: p.max_impulses().len(),
            min_impulses: p.min_impulses().len(),
            discount: p.discount(),
            horizon: [h.start, h.end],
            damping: p.damping(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub time_count: usize,
    pub axis_counts: Vec<usize>,
    pub axis_bounds: Vec<[f64; 2]>,
    pub boundary: BoundaryPolicy,
}

impl From<&TimeSpaceGrid> for GridSummary {
    fn from(g: &TimeSpaceGrid) -> Self {
        Self {
            start: g.start(),
            end: g.end(),
            step: g.step(),
            time_count: g.time_count(),
            axis_counts: g.axes().iter().map(Vec::len).collect(),
            axis_bounds: g.axes().iter().map(|a| [a[0], a[a.len() - 1]]).collect(),
            boundary: g.boundary(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub problem: Option<ProblemSummary>,
    pub grid: Option<GridSummary>,
    pub solver: SolverConfig,
    pub exit_code: i32,
    pub messages: Vec<String>,
    pub outputs: Vec<OutputFile>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn describe_file(path: &Path) -> Result<OutputFile> {
    let bytes = std::fs::read(path)?;
    Ok(OutputFile {
        path: path.to_path_buf(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
