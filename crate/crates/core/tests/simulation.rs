mod common;

use distlqr::dist_observer::{synthesize_observer, ObserverDesign, SynthesisOptions};
use distlqr::graphs::cyclic_graph;
use distlqr::mee_node::MeeWeights;
use distlqr::netsim::{simulate, InitialState, SignalKind, SignalSpec, SignalTarget, SimulationTrace};
use distlqr::{AgentModel, Error, Mat, Tolerances, Vector};

fn vehicle_design(q2: f64) -> ObserverDesign {
    let model = AgentModel::estimation(
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
        Mat::from_row_slice(2, 1, &[0.0, 1.0]),
        Mat::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .unwrap();
    let w = MeeWeights::scalar(10.0, q2, 1.0).unwrap();
    synthesize_observer(&model, &w, &cyclic_graph(5).unwrap(), &SynthesisOptions::grouped(), &Tolerances::default()).unwrap()
}

fn init() -> InitialState {
    let x0 = Mat::from_fn(5, 2, |i, j| if j == 0 { 1.0 + i as f64 * 0.3 } else { -0.2 * i as f64 });
    let xe0 = Mat::from_fn(5, 2, |i, j| if j == 1 { 0.1 * i as f64 } else { 0.0 });
    InitialState { x0, xe0 }
}

/// Error of every agent at `t` from `ê(t) = exp(A_e t) ê(0)`, mapped back to original coordinates.
fn exact_errors(d: &ObserverDesign, init: &InitialState, t: f64) -> Vec<f64> {
    let (na, n) = (d.n_agents, d.model.n());
    let to_hat = d.node.to_hat();
    let from_hat = d.node.from_hat();
    let mut e0 = Vector::zeros(na * n);
    for i in 0..na {
        let ei = (init.x0.row(i) - init.xe0.row(i)).transpose();
        e0.rows_mut(i * n, n).copy_from(&(&to_hat * ei));
    }
    let et = (&d.a_e * t).exp() * e0;
    (0..na).flat_map(|i| (&from_hat * et.rows(i * n, n)).iter().copied().collect::<Vec<_>>()).collect()
}

fn max_error_gap(d: &ObserverDesign, tr: &SimulationTrace, init: &InitialState) -> f64 {
    let k = tr.len() - 1;
    let exact = exact_errors(d, init, tr.times[k]);
    tr.network_error(k).iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn error_dynamics_match_matrix_exponential() {
    let d = vehicle_design(5.0);
    let init = init();
    let tr = simulate(&d, &[], &init, 2.0, 1e-3).unwrap();
    assert!(max_error_gap(&d, &tr, &init) <= 1e-6);
    // Plant without disturbance: x(t) = exp(At) x(0).
    let x = (&d.model.a * 2.0).exp() * init.x0.row(3).transpose();
    let sim = tr.state(tr.len() - 1, 3);
    assert!((x[0] - sim[0]).abs() <= 1e-9 && (x[1] - sim[1]).abs() <= 1e-9);
}

#[test]
fn rk4_is_fourth_order() {
    let d = vehicle_design(25.0);
    let init = init();
    let coarse = max_error_gap(&d, &simulate(&d, &[], &init, 2.0, 0.04).unwrap(), &init);
    let fine = max_error_gap(&d, &simulate(&d, &[], &init, 2.0, 0.02).unwrap(), &init);
    let ratio = coarse / fine;
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

fn noisy() -> Vec<SignalSpec> {
    vec![
        SignalSpec { target: SignalTarget::Noise, agents: None, kind: SignalKind::SeededNoise { amplitude: 0.1, seed: 9, sample_period: 0.01 } },
        SignalSpec { target: SignalTarget::Disturbance, agents: Some(vec![2]), kind: SignalKind::SeededNoise { amplitude: 0.5, seed: 3, sample_period: 0.05 } },
    ]
}

#[test]
fn identical_seeds_give_identical_traces() {
    let d = vehicle_design(5.0);
    let a = simulate(&d, &noisy(), &init(), 1.0, 1e-3).unwrap();
    let b = simulate(&d, &noisy(), &init(), 1.0, 1e-3).unwrap();
    assert!(a.errors.iter().zip(&b.errors).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a, b);
    let mut other = noisy();
    other[0].kind = SignalKind::SeededNoise { amplitude: 0.1, seed: 10, sample_period: 0.01 };
    assert_ne!(simulate(&d, &other, &init(), 1.0, 1e-3).unwrap().errors, a.errors);
}

#[test]
fn zero_horizon_and_invalid_steps() {
    let d = vehicle_design(5.0);
    assert!(simulate(&d, &[], &init(), 0.0, 1e-3).unwrap().is_empty());
    assert!(simulate(&d, &[], &init(), 1e-4, 1e-3).is_err());
    let mut unverified = d.clone();
    unverified.certificate.passed = false;
    assert!(matches!(simulate(&unverified, &[], &init(), 1.0, 1e-3), Err(Error::UnverifiedDesign)));
}

#[test]
fn errors_converge_without_exogenous_signals() {
    let d = vehicle_design(5.0);
    let tr = simulate(&d, &[], &init(), 15.0, 1e-2).unwrap();
    let last = tr.network_error(tr.len() - 1);
    assert!(last.iter().all(|e| e.abs() < 1e-5));
}
