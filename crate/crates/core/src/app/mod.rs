//! Config ingestion, synthesis orchestration, reports and trace export.
//!
//! Exit codes: `0` success, `1` I/O, `2` schema, `3` synthesis,
//! `4` verification, `5` integration. Outputs are rendered in memory and
//! written through a temporary file plus rename, so a failing run leaves no
//! partial files behind.

pub mod config;
pub mod demo;
pub mod report;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

pub use config::{MatrixInput, Mode, RunConfig};
pub use report::DesignReport;

use crate::dist_observer::{synthesize_observer, ObserverDesign};
use crate::dlqr::{bottomup_controller_via_duality, topdown_blocks_with, topdown_truncate_with, LqrWeights};
use crate::mee_node::MeeWeights;
use crate::netsim::{convergence_metrics, simulate, ConvergenceMetrics, InitialState, SignalKind, SimulationTrace};
use crate::{AgentModel, Error, Mat, Tolerances};
use report::{BottomUpReport, ObserverReport, TopDownReport};

pub const EXIT_IO: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_SYNTHESIS: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;
pub const EXIT_INTEGRATION: i32 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppError {
    pub code: i32,
    pub message: String,
}

impl AppError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn schema(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_SCHEMA, format!("invalid config: {e}"))
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

pub type AppResult<T> = std::result::Result<T, AppError>;

/// Maps a library error raised during synthesis to an exit code.
fn synthesis_error(e: Error) -> AppError {
    let code = match &e {
        Error::Inconsistent(_) | Error::UnverifiedDesign => EXIT_VERIFICATION,
        Error::NotHurwitz { what, .. } if what.contains("closed loop") => EXIT_VERIFICATION,
        _ => EXIT_SYNTHESIS,
    };
    let hint = match &e {
        Error::Infeasible { .. } => {
            "; strictness margins scale with the LMI block norm, so a badly conditioned node covariance may need a smaller --tol-lmi-margin"
        }
        _ => "",
    };
    AppError::new(code, format!("synthesis failed: {e}{hint}"))
}

/// Command-line overrides, applied on top of the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub riccati_residual: Option<f64>,
    pub lyapunov_residual: Option<f64>,
    pub rank: Option<f64>,
    pub hurwitz_margin: Option<f64>,
    pub lmi_margin: Option<f64>,
    pub cost_chain: Option<f64>,
    pub sdp_gap: Option<f64>,
    pub zero_eigenvalue: Option<f64>,
    /// Replaces the seed of the `j`-th seeded-noise signal by `seed + j`.
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.tolerances;
        let fields: [(&mut f64, Option<f64>); 8] = [
            (&mut t.riccati_residual, self.riccati_residual),
            (&mut t.lyapunov_residual, self.lyapunov_residual),
            (&mut t.rank, self.rank),
            (&mut t.hurwitz_margin, self.hurwitz_margin),
            (&mut t.lmi_margin, self.lmi_margin),
            (&mut t.cost_chain, self.cost_chain),
            (&mut t.sdp_gap, self.sdp_gap),
            (&mut t.zero_eigenvalue, self.zero_eigenvalue),
        ];
        for (slot, v) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let (Some(seed), Some(sim)) = (self.seed, cfg.simulation.as_mut()) {
            let noise = sim.signals.iter_mut().filter_map(|s| match &mut s.kind {
                SignalKind::SeededNoise { seed, .. } => Some(seed),
                _ => None,
            });
            for (j, s) in noise.enumerate() {
                *s = seed.wrapping_add(j as u64);
            }
        }
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> AppResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut cfg = RunConfig::from_json(&text).map_err(AppError::schema)?;
    overrides.apply(&mut cfg);
    validate_tolerances(&cfg.tolerances)?;
    Ok(cfg)
}

fn validate_tolerances(t: &Tolerances) -> AppResult<()> {
    let all = [
        t.riccati_residual,
        t.lyapunov_residual,
        t.rank,
        t.hurwitz_margin,
        t.lmi_margin,
        t.cost_chain,
        t.sdp_gap,
        t.zero_eigenvalue,
    ];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(AppError::schema("tolerances must be finite and nonnegative"));
    }
    Ok(())
}

/// Result of synthesis in whichever mode the config selects.
#[derive(Debug, Clone)]
pub enum Design {
    Observer(Box<ObserverDesign>),
    TopDown(Box<TopDownReport>),
    BottomUp(Box<BottomUpReport>),
}

/// Runs the synthesis selected by `cfg` and assembles the report.
/// A design whose certificate fails is reported as a verification error.
pub fn synthesize(cfg: &RunConfig) -> AppResult<(DesignReport, Design)> {
    let start = Instant::now();
    let rc = cfg.resolve().map_err(AppError::schema)?;
    let tol = &cfg.tolerances;
    let mut report = DesignReport::new(rc.mode, rc.graph.n(), *tol);
    let model_error = |e: Error| match e {
        Error::Dimension(_) | Error::InvalidArgument(_) => AppError::schema(e),
        e => synthesis_error(e),
    };

    let (design, verified) = match rc.mode {
        Mode::Observer => {
            let model = AgentModel::estimation(rc.a.clone(), rc.b_dist.clone(), rc.c.clone()).map_err(model_error)?;
            let w = MeeWeights::new(rc.q1.clone(), rc.q2.clone(), rc.r.clone()).map_err(synthesis_error)?;
            let d = synthesize_observer(&model, &w, &rc.graph, &cfg.synthesis, tol).map_err(synthesis_error)?;
            report.observer = Some(ObserverReport::from_design(&d));
            let ok = d.certificate.passed;
            (Design::Observer(Box::new(d)), ok)
        }
        Mode::LqrTopdown => {
            let b = rc.b.clone().expect("resolved LQR config has B");
            let model = AgentModel::controlled(rc.a.clone(), b).map_err(model_error)?;
            let w = LqrWeights::new(rc.q1.clone(), rc.q2.clone(), rc.r.clone()).map_err(synthesis_error)?;
            let tr = topdown_blocks_with(&model, &w, rc.graph.n(), tol).map_err(synthesis_error)?;
            let m = rc.m.clone().unwrap_or_else(|| rc.graph.laplacian().clone());
            let tg = topdown_truncate_with(&tr, &m, &rc.graph, tol).map_err(synthesis_error)?;
            let r = TopDownReport::new(&tr, &m, &tg);
            report.lqr_topdown = Some(r.clone());
            (Design::TopDown(Box::new(r)), tg.hurwitz)
        }
        Mode::LqrBottomup => {
            let b = rc.b.clone().expect("resolved LQR config has B");
            let model = AgentModel::controlled(rc.a.clone(), b).map_err(model_error)?;
            let w = LqrWeights::new(rc.q1.clone(), rc.q2.clone(), rc.r.clone()).map_err(synthesis_error)?;
            let c = bottomup_controller_via_duality(&model, &w, &rc.graph, &cfg.synthesis, tol).map_err(synthesis_error)?;
            let r = BottomUpReport::new(&c);
            report.lqr_bottomup = Some(r.clone());
            (Design::BottomUp(Box::new(r)), c.dual.certificate.passed)
        }
    };
    report.verified = verified;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    report.timings.synthesis_ms = elapsed;
    report.timings.total_ms = elapsed;
    if !verified {
        return Err(AppError::new(EXIT_VERIFICATION, format!("verification failed: {}", failure_summary(&report))));
    }
    Ok((report, design))
}

fn failure_summary(r: &DesignReport) -> String {
    if let Some(o) = r.observer.as_ref().or(r.lqr_bottomup.as_ref().map(|b| &b.dual)) {
        let c = &o.certificate;
        format!(
            "hurwitz={} (abscissa {:.3e}), lmi_ok={}, cost chain ok={}, mode-union error {:.3e}",
            c.hurwitz, c.abscissa, c.lmi_ok, o.costs.holds, c.mode_union_error
        )
    } else if let Some(t) = &r.lqr_topdown {
        t.truncation.diagnostic.clone().unwrap_or_else(|| "truncated closed loop is not Hurwitz".into())
    } else {
        "no design".into()
    }
}

pub fn report_json(report: &DesignReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail") + "\n"
}

/// `synthesize --config <path> --out <path>`. Falls back to `outputs.report`.
pub fn cmd_synthesize(config: &Path, out: Option<&Path>, overrides: &Overrides) -> AppResult<DesignReport> {
    let start = Instant::now();
    let cfg = load_config(config, overrides)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.report.clone())
        .ok_or_else(|| AppError::schema("no output path (use --out or outputs.report)"))?;
    let (mut report, _) = synthesize(&cfg)?;
    report.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    write_atomic(&out, report_json(&report).as_bytes())?;
    Ok(report)
}

/// Metrics file written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetrics {
    pub schema_version: u32,
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_agents: usize,
    pub phi: Vec<Vec<f64>>,
    pub metrics: ConvergenceMetrics,
    pub wall_clock_ms: f64,
}

/// Output of [`run_simulation`]: rendered file contents plus the raw trace.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: DesignReport,
    pub trace: SimulationTrace,
    pub csv: String,
    pub metrics: SimulationMetrics,
}

/// Synthesizes the observer of `cfg` and simulates it.
pub fn run_simulation(cfg: &RunConfig) -> AppResult<SimulationOutput> {
    let sim = cfg.simulation.as_ref().ok_or_else(|| AppError::schema("simulate needs a simulation block"))?;
    if cfg.mode != Mode::Observer {
        return Err(AppError::schema("simulate supports mode \"observer\" only"));
    }
    let rc = cfg.resolve().map_err(AppError::schema)?;
    let (na, n) = (rc.graph.n(), rc.a.nrows());
    let rows = |name: &str, x: &Option<Vec<Vec<f64>>>| match x {
        Some(r) => config::initial_rows(name, r, na, n).map_err(AppError::schema),
        None => Ok(Mat::zeros(na, n)),
    };
    let init = InitialState { x0: rows("x0", &sim.x0)?, xe0: rows("xe0", &sim.xe0)? };
    let (report, design) = synthesize(cfg)?;
    let Design::Observer(design) = design else { unreachable!("observer mode") };

    let start = Instant::now();
    if sim.t_end == 0.0 {
        warn!("zero-length horizon: the trace is empty");
    }
    let trace = simulate(&design, &sim.signals, &init, sim.t_end, sim.dt).map_err(|e| match e {
        Error::NonFinite(_) => AppError::new(EXIT_INTEGRATION, format!("integration failed: {e}")),
        Error::UnverifiedDesign => AppError::new(EXIT_VERIFICATION, e.to_string()),
        e => AppError::schema(e),
    })?;
    let metrics = SimulationMetrics {
        schema_version: config::SCHEMA_VERSION,
        t_end: sim.t_end,
        dt: sim.dt,
        steps: trace.steps,
        n_agents: trace.n_agents,
        phi: config::mat_rows(&design.phi),
        metrics: convergence_metrics(&trace),
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(SimulationOutput { csv: trace_csv(&trace), report, trace, metrics })
}

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPORT_FILE: &str = "design.json";

/// `simulate --config <path> --out-dir <dir>`: writes `trace.csv`,
/// `metrics.json` and `design.json`. Falls back to `outputs.out_dir`.
pub fn cmd_simulate(config: &Path, out_dir: Option<&Path>, overrides: &Overrides) -> AppResult<SimulationOutput> {
    let cfg = load_config(config, overrides)?;
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.out_dir.clone())
        .ok_or_else(|| AppError::schema("no output directory (use --out-dir or outputs.out_dir)"))?;
    let out = run_simulation(&cfg)?;
    let metrics = serde_json::to_string_pretty(&out.metrics).expect("metrics serialization cannot fail") + "\n";
    std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    write_atomic(&dir.join(TRACE_FILE), out.csv.as_bytes())?;
    write_atomic(&dir.join(METRICS_FILE), metrics.as_bytes())?;
    write_atomic(&dir.join(REPORT_FILE), report_json(&out.report).as_bytes())?;
    Ok(out)
}

/// CSV with header `t,agent,e1..en,x1..xn,xe1..xen`; agents are 1-based.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let n = trace.n;
    let mut s = String::from("t,agent");
    for prefix in ["e", "x", "xe"] {
        for j in 1..=n {
            let _ = write!(s, ",{prefix}{j}");
        }
    }
    s.push('\n');
    for k in 0..trace.len() {
        let t = fmt_sig(trace.times[k]);
        for i in 0..trace.n_agents {
            let _ = write!(s, "{t},{}", i + 1);
            for v in trace.error(k, i).iter().chain(trace.state(k, i)).chain(trace.estimate(k, i)) {
                s.push(',');
                s.push_str(&fmt_sig(*v));
            }
            s.push('\n');
        }
    }
    s
}

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (DIGITS - 1 - exp) as usize, v))
    }
}

/// Writes `bytes` to a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting_matches_printf_g() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_sig(9.9999999999), "10");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-07");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.14159265");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn overrides_replace_tolerances_and_seeds() {
        let mut cfg = RunConfig::from_json(
            r#"{"schema_version":1,"mode":"observer",
                "agent":{"A":[[0]],"Bbar":[[1]],"C":[[1]]},
                "graph":{"type":"cyclic","n":3},
                "weights":{"Q1":1,"Q2":0,"R":1},
                "simulation":{"t_end":1,"signals":[
                  {"target":"noise","kind":"seeded-noise","amplitude":1,"seed":1,"sample_period":0.1},
                  {"target":"disturbance","kind":"seeded-noise","amplitude":1,"seed":1,"sample_period":0.1}]}}"#,
        )
        .unwrap();
        let o = Overrides { lmi_margin: Some(1e-5), seed: Some(40), ..Default::default() };
        o.apply(&mut cfg);
        assert_eq!(cfg.tolerances.lmi_margin, 1e-5);
        let seeds: Vec<u64> = cfg.simulation.unwrap().signals.iter().filter_map(|s| match s.kind {
            SignalKind::SeededNoise { seed, .. } => Some(seed),
            _ => None,
        }).collect();
        assert_eq!(seeds, vec![40, 41]);
    }
}
