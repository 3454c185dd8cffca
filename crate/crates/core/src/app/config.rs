//! Run configuration (`schema_version` 1).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "mode": "observer",
//!   "agent": { "A": [[0, 1], [-1, -0.1]], "Bbar": [[0], [1]], "C": [[1, 0]] },
//!   "graph": { "type": "cyclic", "n": 5 },
//!   "weights": { "Q1": 10, "Q2": 5, "R": 1 },
//!   "simulation": { "t_end": 10, "dt": 0.001, "x0": [[1, 0]], "xe0": [[0, 0]] }
//! }
//! ```
//!
//! Matrices are row-major nested arrays; a bare number `s` stands for `s·I`
//! of whatever size the slot requires. `x0`/`xe0` take one row per agent or a
//! single row shared by all agents.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dist_observer::SynthesisOptions;
use crate::graphs::{GraphSpec, GraphTopology};
use crate::netsim::SignalSpec;
use crate::{Error, Mat, Result, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

/// A matrix literal: nested rows, or a scalar multiple of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    /// Resolves to a `rows×cols` matrix; scalars require a square slot.
    pub fn resolve(&self, name: &str, rows: usize, cols: usize) -> Result<Mat> {
        let m = self.to_mat(name, Some(rows))?;
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::Dimension(format!("{name} must be {rows}×{cols}, got {}×{}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }

    /// Matrix with its own shape; `size` fixes the dimension of a scalar shorthand.
    pub fn to_mat(&self, name: &str, size: Option<usize>) -> Result<Mat> {
        match self {
            MatrixInput::Scalar(s) => {
                let n = size.ok_or_else(|| Error::Dimension(format!("{name}: scalar shorthand needs a known size")))?;
                check_finite(name, [*s].iter())?;
                Ok(Mat::identity(n, n) * *s)
            }
            MatrixInput::Rows(rows) => rows_to_mat(name, rows),
        }
    }

    pub fn from_mat(m: &Mat) -> Self {
        MatrixInput::Rows(mat_rows(m))
    }
}

fn check_finite<'a>(name: &str, mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
    }
    Ok(())
}

pub fn rows_to_mat(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{name} is not rectangular")));
    }
    check_finite(name, rows.iter().flatten())?;
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Observer,
    LqrTopdown,
    LqrBottomup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(rename = "A")]
    pub a: MatrixInput,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixInput>,
    #[serde(rename = "Bbar", default, skip_serializing_if = "Option::is_none")]
    pub b_dist: Option<MatrixInput>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(rename = "Q1")]
    pub q1: MatrixInput,
    #[serde(rename = "Q2")]
    pub q2: MatrixInput,
    #[serde(rename = "R")]
    pub r: MatrixInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xe0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signals: Vec<SignalSpec>,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub agent: AgentConfig,
    pub graph: GraphSpec,
    pub weights: WeightsConfig,
    /// Truncation matrix for `lqr-topdown`; the Laplacian when absent.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MatrixInput>,
    #[serde(default)]
    pub synthesis: SynthesisOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

/// Matrices resolved to their final shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub mode: Mode,
    pub a: Mat,
    pub b: Option<Mat>,
    pub b_dist: Mat,
    pub c: Mat,
    pub graph: GraphTopology,
    pub q1: Mat,
    pub q2: Mat,
    pub r: Mat,
    pub m: Option<Mat>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Structural validation: shapes, the graph and the simulation block.
    /// Numerical preconditions (definiteness, observability) are left to synthesis.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let a = self.agent.a.to_mat("A", None)?;
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!("A must be square and nonempty, got {}×{}", a.nrows(), a.ncols())));
        }
        let graph = self.graph.build()?;
        let (b, b_dist, c) = match self.mode {
            Mode::Observer => {
                let c = self.agent.c.as_ref().ok_or_else(|| Error::Dimension("observer mode needs C".into()))?.to_mat("C", None)?;
                let bd = self.agent.b_dist.as_ref().ok_or_else(|| Error::Dimension("observer mode needs Bbar".into()))?.to_mat("Bbar", None)?;
                if c.ncols() != n || bd.nrows() != n {
                    return Err(Error::Dimension(format!("C must have {n} columns and Bbar {n} rows")));
                }
                (None, bd, c)
            }
            Mode::LqrTopdown | Mode::LqrBottomup => {
                let b = self.agent.b.as_ref().ok_or_else(|| Error::Dimension("LQR modes need B".into()))?.to_mat("B", None)?;
                if b.nrows() != n {
                    return Err(Error::Dimension(format!("B must have {n} rows")));
                }
                (Some(b), Mat::zeros(n, 0), Mat::identity(n, n))
            }
        };
        let (wq, wr) = match self.mode {
            Mode::Observer => (c.nrows(), b_dist.ncols()),
            _ => (n, b.as_ref().map_or(0, Mat::ncols)),
        };
        let q1 = self.weights.q1.resolve("Q1", wq, wq)?;
        let q2 = self.weights.q2.resolve("Q2", wq, wq)?;
        let r = self.weights.r.resolve("R", wr, wr)?;
        let m = match (&self.m, self.mode) {
            (Some(m), Mode::LqrTopdown) => Some(m.resolve("M", graph.n(), graph.n())?),
            (Some(_), _) => return Err(Error::InvalidArgument("M applies to lqr-topdown only".into())),
            (None, _) => None,
        };
        if let Some(sim) = &self.simulation {
            if !(sim.dt > 0.0) || !sim.dt.is_finite() || !(sim.t_end >= 0.0) || !sim.t_end.is_finite() {
                return Err(Error::InvalidArgument("simulation needs dt > 0 and t_end >= 0".into()));
            }
            for (name, x) in [("x0", &sim.x0), ("xe0", &sim.xe0)] {
                if let Some(rows) = x {
                    initial_rows(name, rows, graph.n(), n)?;
                }
            }
        }
        Ok(ResolvedConfig { mode: self.mode, a, b, b_dist, c, graph, q1, q2, r, m })
    }
}

/// Expands per-agent initial rows (or one shared row) to an `N×n` matrix.
pub fn initial_rows(name: &str, rows: &[Vec<f64>], n_agents: usize, n: usize) -> Result<Mat> {
    let m = rows_to_mat(name, rows)?;
    match (m.nrows(), m.ncols()) {
        (r, c) if r == n_agents && c == n => Ok(m),
        (1, c) if c == n => Ok(Mat::from_fn(n_agents, n, |_, j| m[(0, j)])),
        (r, c) => Err(Error::Dimension(format!("{name} must be {n_agents}×{n} or 1×{n}, got {r}×{c}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VEHICLE: &str = r#"{
        "schema_version": 1,
        "mode": "observer",
        "agent": { "A": [[0, 1], [-1, -0.1]], "Bbar": [[0], [1]], "C": [[1, 0]] },
        "graph": { "type": "cyclic", "n": 5 },
        "weights": { "Q1": 10, "Q2": 5, "R": 1 },
        "simulation": { "t_end": 1, "x0": [[1, 0]], "signals": [{"target": "noise", "kind": "zero"}] }
    }"#;

    #[test]
    fn vehicle_config_resolves() {
        let cfg = RunConfig::from_json(VEHICLE).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.q1, Mat::from_element(1, 1, 10.0));
        assert_eq!(r.graph.n(), 5);
        assert_eq!(cfg.simulation.as_ref().unwrap().dt, 1e-3);
        assert_eq!(cfg.tolerances, Tolerances::default());
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = RunConfig::from_json(VEHICLE).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn schema_errors() {
        assert!(RunConfig::from_json(&VEHICLE.replace("\"schema_version\": 1", "\"schema_version\": 2")).is_err());
        assert!(RunConfig::from_json(&VEHICLE.replace("\"mode\"", "\"bogus\": 1, \"mode\"")).is_err());
        let bad = RunConfig::from_json(&VEHICLE.replace("[[1, 0]]", "[[1, 0, 0]]")).unwrap();
        assert!(bad.resolve().is_err());
        let ragged = RunConfig::from_json(&VEHICLE.replace("[[0, 1], [-1, -0.1]]", "[[0, 1], [-1]]")).unwrap();
        assert!(matches!(ragged.resolve(), Err(Error::Dimension(_))));
    }

    #[test]
    fn shared_initial_row() {
        let m = initial_rows("x0", &[vec![1.0, 2.0]], 3, 2).unwrap();
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0]);
        assert!(initial_rows("x0", &[vec![1.0, 2.0], vec![0.0, 0.0]], 3, 2).is_err());
    }
}
