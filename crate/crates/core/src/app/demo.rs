//! Five vehicles on a ring: the reference example, end to end.
//!
//! Agents `ẍ = −x − 0.1ẋ + d`, position measured, `Q₁ = 10`, `R = 1`, and
//! `Q₂ ∈ {5, 25}`. The demo prints the node gain, `Φ` and the three cost
//! figures beside the published reference numbers. Deviations from those
//! numbers are informational; the exit status depends only on the certificates.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use super::config::{AgentConfig, MatrixInput, Mode, OutputsConfig, RunConfig, SimulationConfig, WeightsConfig, SCHEMA_VERSION};
use super::{run_simulation, AppError, AppResult, EXIT_IO};
use crate::dist_observer::SynthesisOptions;
use crate::graphs::GraphSpec;
use crate::matops::{solve_dual_are, spd_inverse};
use crate::mee_node::output_normalize;
use crate::{AgentModel, Mat, Tolerances};

/// Published node gain for `Q₁ = 10`, `R = 1`.
pub const REFERENCE_L: [f64; 2] = [2.6004, 22.8051];
/// Published `(Q₂, Φ, J)` pairs.
pub const REFERENCE_CASES: [(f64, f64, f64); 2] = [(5.0, 0.3446, 13.4006), (25.0, 1.8479, 13.3401)];
/// Relative deviation counted as a match.
pub const MATCH_TOLERANCE: f64 = 0.02;
pub const N_VEHICLES: usize = 5;

fn rows(v: &[&[f64]]) -> MatrixInput {
    MatrixInput::Rows(v.iter().map(|r| r.to_vec()).collect())
}

/// Initial errors used for the convergence comparison: agent `i` starts at
/// position `cos(2πi/N)` with a zero estimate.
pub fn vehicle_initial_positions() -> Vec<Vec<f64>> {
    (0..N_VEHICLES).map(|i| vec![(2.0 * PI * i as f64 / N_VEHICLES as f64).cos(), 0.0]).collect()
}

/// Run configuration of the example for a given `Q₂`.
pub fn vehicle_config(q2: f64) -> RunConfig {
    RunConfig {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Observer,
        agent: AgentConfig {
            a: rows(&[&[0.0, 1.0], &[-1.0, -0.1]]),
            b: None,
            b_dist: Some(rows(&[&[0.0], &[1.0]])),
            c: Some(rows(&[&[1.0, 0.0]])),
        },
        graph: GraphSpec::Cyclic { n: N_VEHICLES },
        weights: WeightsConfig { q1: MatrixInput::Scalar(10.0), q2: MatrixInput::Scalar(q2), r: MatrixInput::Scalar(1.0) },
        m: None,
        synthesis: SynthesisOptions::grouped(),
        simulation: Some(SimulationConfig {
            t_end: 10.0,
            dt: 1e-3,
            x0: Some(vehicle_initial_positions()),
            xe0: Some(vec![vec![0.0, 0.0]]),
            signals: Vec::new(),
        }),
        tolerances: Tolerances::default(),
        outputs: OutputsConfig::default(),
    }
}

/// Gain obtained when the node ARE is solved with output weight `Q₁⁻¹` but the
/// gain is formed as `SCᵀQ₁`, expressed in the rotated coordinates (measured
/// state last). This mixed convention reproduces the published gain.
pub fn alternative_convention_gain(q1: f64, r: f64) -> crate::Result<Mat> {
    let model = AgentModel::estimation(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        Mat::from_row_slice(1, 2, &[1.0, 0.0]),
    )?;
    let nm = output_normalize(&model)?;
    let q = Mat::from_element(1, 1, q1);
    let sol = solve_dual_are(&nm.a, &nm.b_dist, &nm.c, &spd_inverse(&q, "Q₁")?, &Mat::from_element(1, 1, r))?;
    Ok(&sol.s * nm.c.transpose() * q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub computed: f64,
    pub reference: f64,
    pub relative_deviation: f64,
    pub within_tolerance: bool,
}

impl ComparisonRow {
    fn new(quantity: impl Into<String>, computed: f64, reference: f64) -> Self {
        let dev = (computed - reference).abs() / reference.abs();
        Self { quantity: quantity.into(), computed, reference, relative_deviation: dev, within_tolerance: dev <= MATCH_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoCase {
    pub q2: f64,
    pub l: [f64; 2],
    pub phi: f64,
    pub are_sum: f64,
    pub j_ach: f64,
    pub gamma_hat: f64,
    pub abscissa: f64,
    pub certificate_passed: bool,
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSummary {
    pub cases: Vec<DemoCase>,
    pub comparison: Vec<ComparisonRow>,
    pub all_certificates_passed: bool,
}

/// Runs both cases; a failed certificate is reported in the summary, not as an error.
pub fn run_demo() -> AppResult<DemoSummary> {
    let mut cases = Vec::new();
    let mut comparison = Vec::new();
    for (i, &(q2, phi_ref, j_ref)) in REFERENCE_CASES.iter().enumerate() {
        let cfg = vehicle_config(q2);
        let (case, ok) = match run_simulation(&cfg) {
            Ok(out) => {
                let o = out.report.observer.as_ref().expect("observer report");
                let case = DemoCase {
                    q2,
                    l: [o.l[0][0], o.l[1][0]],
                    phi: o.phi[0][0],
                    are_sum: o.costs.are_sum,
                    j_ach: o.costs.j_ach,
                    gamma_hat: o.costs.gamma_hat,
                    abscissa: o.certificate.abscissa,
                    certificate_passed: o.certificate.passed,
                    settling_time: out.metrics.metrics.aggregate.settling_time,
                };
                (case, true)
            }
            Err(e) if e.code == super::EXIT_VERIFICATION => {
                eprintln!("Q2 = {q2}: {}", e.message);
                (
                    DemoCase {
                        q2,
                        l: [f64::NAN; 2],
                        phi: f64::NAN,
                        are_sum: f64::NAN,
                        j_ach: f64::NAN,
                        gamma_hat: f64::NAN,
                        abscissa: f64::NAN,
                        certificate_passed: false,
                        settling_time: None,
                    },
                    false,
                )
            }
            Err(e) => return Err(e),
        };
        if i == 0 && ok {
            comparison.push(ComparisonRow::new("L1", case.l[0], REFERENCE_L[0]));
            comparison.push(ComparisonRow::new("L2", case.l[1], REFERENCE_L[1]));
            let alt = alternative_convention_gain(10.0, 1.0).map_err(|e| AppError::new(super::EXIT_SYNTHESIS, e.to_string()))?;
            comparison.push(ComparisonRow::new("L1 (alt. convention)", alt[0], REFERENCE_L[0]));
            comparison.push(ComparisonRow::new("L2 (alt. convention)", alt[1], REFERENCE_L[1]));
        }
        if ok {
            comparison.push(ComparisonRow::new(format!("Phi (Q2={q2})"), case.phi, phi_ref));
            comparison.push(ComparisonRow::new(format!("Gamma_hat (Q2={q2})"), case.gamma_hat, j_ref));
            comparison.push(ComparisonRow::new(format!("J_ach (Q2={q2})"), case.j_ach, j_ref));
            comparison.push(ComparisonRow::new(format!("sum tr S_i (Q2={q2})"), case.are_sum, j_ref));
        }
        cases.push(case);
    }
    let all = cases.iter().all(|c| c.certificate_passed);
    Ok(DemoSummary { cases, comparison, all_certificates_passed: all })
}

pub fn print_summary(s: &DemoSummary, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "Five vehicles on a ring, Q1 = 10, R = 1")?;
    writeln!(out)?;
    for c in &s.cases {
        let settle = c.settling_time.map_or("not settled".into(), |t| format!("{t:.3} s"));
        writeln!(out, "Q2 = {}", c.q2)?;
        writeln!(out, "  L (original coordinates) = [{:.4}; {:.4}]", c.l[0], c.l[1])?;
        writeln!(out, "  Phi                      = {:.6}", c.phi)?;
        writeln!(out, "  sum tr S_i <= J_ach <= Gamma_hat : {:.6} <= {:.6} <= {:.6}", c.are_sum, c.j_ach, c.gamma_hat)?;
        writeln!(out, "  spectral abscissa of A_e = {:.6}", c.abscissa)?;
        writeln!(out, "  5% settling time         = {settle}")?;
        writeln!(out, "  certificate              = {}", if c.certificate_passed { "passed" } else { "FAILED" })?;
    }
    writeln!(out)?;
    writeln!(out, "{:<26} {:>12} {:>12} {:>10}  within 2%", "quantity", "computed", "reference", "rel.dev")?;
    for r in &s.comparison {
        writeln!(
            out,
            "{:<26} {:>12.4} {:>12.4} {:>9.1}%  {}",
            r.quantity,
            r.computed,
            r.reference,
            100.0 * r.relative_deviation,
            if r.within_tolerance { "yes" } else { "no" }
        )?;
    }
    writeln!(out)?;
    writeln!(
        out,
        "Note: the reference gain is matched only by the alternative convention (node ARE solved\n\
         with output weight Q1^-1, gain formed as S C^T Q1, rotated coordinates). The reference Phi\n\
         and J are not reproduced by the cost definitions implemented here; they are shown for\n\
         comparison and do not affect the exit status. The cost SDP is flat in Phi on this\n\
         example, so Phi is chosen to minimise the achieved cost on the optimal face."
    )?;
    writeln!(out)?;
    writeln!(out, "all certificates passed: {}", if s.all_certificates_passed { "yes" } else { "NO" })?;
    Ok(())
}

/// `demo`: prints the comparison; the exit code is `0` iff every certificate passed.
pub fn cmd_demo(out: &mut impl Write) -> AppResult<DemoSummary> {
    let summary = run_demo()?;
    print_summary(&summary, out).map_err(|e| AppError::new(EXIT_IO, e.to_string()))?;
    if !summary.all_certificates_passed {
        return Err(AppError::new(super::EXIT_VERIFICATION, "a design certificate failed"));
    }
    Ok(summary)
}
