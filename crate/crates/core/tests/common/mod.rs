//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use agentic_control::budget::{check_theorem1, check_theorem2, effective_margin, BudgetConstants};
use agentic_control::config::{Configuration, ScenarioConfig};
use agentic_control::engine::{simulate, step_flow, FlowModel, HistoryBuffer};
use agentic_control::experiments::{benchmark_modes, fig1_sweep};
use agentic_control::lyapunov::{lyapunov_residual, solve_lyapunov};
use agentic_control::model::{AgencyLevel, AugmentedState, ModeDynamics};
use agentic_control::policy::{empirical_score_rate, switch_statistics, SwitchingPolicy};
use nalgebra::DMatrix;
use proptest::prelude::*;

pub type Check = Result<(), TestCaseError>;

pub fn matrix(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(lo..hi, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

/// Integrates `ẋ = Ax` to `t = 1` with RK4 at step `h`; error against `e^A x0`.
fn rk4_error(a: &DMatrix<f64>, x0: &[f64], h: f64) -> f64 {
    let mode = ModeDynamics::new("m", a.clone());
    let model = FlowModel::plant_only(&mode, 0.0);
    let history = HistoryBuffer::new(x0.to_vec(), Some(0.0));
    let mut s = AugmentedState {
        t: 0.0,
        x: x0.to_vec(),
        m: vec![],
        theta: vec![],
        sigma: 1,
        c: 1,
        zeta: vec![],
    };
    let steps = (1.0 / h).round() as usize;
    for _ in 0..steps {
        s = step_flow(&s, &model, &history, h).unwrap();
    }
    let exact = a.clone().exp() * DMatrix::from_column_slice(x0.len(), 1, x0);
    exact
        .iter()
        .zip(&s.x)
        .map(|(e, v)| (e - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn rk4_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=4).prop_flat_map(|n| matrix(n, -2.0, 2.0))
}

/// Halving the step divides the global error by about 2⁴.
pub fn check_rk4_order(a: &DMatrix<f64>) -> Check {
    let x0: Vec<f64> = (0..a.nrows()).map(|i| 1.0 - 0.5 * i as f64).collect();
    let coarse = rk4_error(a, &x0, 0.1);
    let fine = rk4_error(a, &x0, 0.05);
    // below this the error is rounding, not truncation
    prop_assume!(fine > 1e-11);
    let ratio = coarse / fine;
    prop_assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    Ok(())
}

pub fn hurwitz_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=6, 0.05f64..1.0).prop_flat_map(|(n, eps)| {
        matrix(n, -1.0, 1.0).prop_map(move |m| -(m.transpose() * &m) - DMatrix::identity(n, n) * eps)
    })
}

pub fn check_lyapunov_residual(a: &DMatrix<f64>) -> Check {
    let q = DMatrix::identity(a.nrows(), a.nrows());
    let p = solve_lyapunov(a, &q).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let r = lyapunov_residual(a, &p, &q);
    prop_assert!(r <= 1e-10, "residual {r}");
    Ok(())
}

/// `(τ_a, τ̄, x0)` for dwell-constrained runs of the benchmark loop.
pub fn dwell_strategy() -> impl Strategy<Value = (f64, f64, Vec<f64>)> {
    (0.05f64..2.0, 0.0f64..0.2, prop::collection::vec(-2.0f64..2.0, 2))
}

pub fn check_dwell_gap(tau_a: f64, tau_bar: f64, x0: &[f64]) -> Check {
    let mut cfg = agentic_control::experiments::cell_config(&fig1_sweep(), tau_bar, tau_a);
    cfg.integrator.horizon = 10.0;
    cfg.integrator.x0 = x0.to_vec();
    let traj = simulate(&cfg).unwrap();
    let stats = switch_statistics(&traj);
    prop_assert!(stats.min_gap >= tau_a, "min gap {} < {tau_a}", stats.min_gap);
    Ok(())
}

fn rotation(label: &str, omega: f64) -> ModeDynamics {
    ModeDynamics::new(label, DMatrix::from_row_slice(2, 2, &[-0.05, omega, -omega, -0.05]))
}

/// Hysteresis switching between two lightly damped oscillators.
pub fn hysteresis_scenario(h: f64, x0: &[f64]) -> ScenarioConfig {
    let mut cfg = fig1_sweep();
    cfg.name = "hysteresis".into();
    cfg.sweep = None;
    cfg.agency_level = AgencyLevel::L3;
    cfg.configurations = vec![Configuration::single(
        "oscillators",
        vec![rotation("slow", 2.0), rotation("fast", 3.0)],
    )];
    cfg.policy = Some(SwitchingPolicy::hysteresis(h));
    cfg.integrator.horizon = 10.0;
    cfg.integrator.x0 = x0.to_vec();
    cfg
}

pub fn hysteresis_strategy() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.02f64..0.5, prop::collection::vec(-2.0f64..2.0, 2))
}

pub fn check_hysteresis_gap(h: f64, x0: &[f64]) -> Check {
    let cfg = hysteresis_scenario(h, x0);
    let traj = simulate(&cfg).unwrap();
    let stats = switch_statistics(&traj);
    let m_bar = empirical_score_rate(&traj.scores, traj.dt);
    if stats.count() >= 2 {
        let bound = 2.0 * h / m_bar - traj.dt;
        prop_assert!(stats.min_gap >= bound, "min gap {} < {bound}", stats.min_gap);
    }
    Ok(())
}

pub fn constants_strategy() -> impl Strategy<Value = BudgetConstants> {
    (
        (0.1f64..2.0, 1.0f64..5.0, 1.0f64..5.0, 0.0f64..2.0, 0.0f64..1.0),
        (0.0f64..2.0, 0.0f64..1.0, 0.0f64..5.0, 0.0f64..0.3, 0.05f64..10.0, 0.05f64..10.0),
    )
        .prop_map(|((gamma, nu_sigma, nu_c, l_theta, rho), (l_d, eta_d, beta, tau_bar, ts, tc))| {
            BudgetConstants {
                gamma,
                nu_sigma,
                nu_c,
                l_theta,
                rho,
                l_d,
                eta_d,
                beta,
                tau_bar,
                tau_a_sigma: Some(ts),
                tau_a_c: Some(tc),
            }
        })
}

/// `λ` falls as any cost rate grows and rises as either dwell time grows.
pub fn check_lambda_monotone(c: &BudgetConstants, bump: f64) -> Check {
    let lambda = |c: &BudgetConstants| effective_margin(c).unwrap().lambda;
    let base = lambda(c);
    let more = |f: &dyn Fn(&mut BudgetConstants)| {
        let mut d = *c;
        f(&mut d);
        lambda(&d)
    };
    prop_assert!(more(&|d| d.rho += bump) <= base);
    prop_assert!(more(&|d| d.eta_d += bump) <= base);
    prop_assert!(more(&|d| d.tau_bar += bump) <= base);
    if c.l_theta > 0.0 {
        prop_assert!(more(&|d| d.rho += bump) < base);
    }
    if c.beta > 0.0 {
        prop_assert!(more(&|d| d.tau_bar += bump) < base);
    }
    if c.nu_sigma > 1.0 {
        prop_assert!(more(&|d| d.tau_a_sigma = d.tau_a_sigma.map(|t| t + bump)) > base);
    }
    if c.nu_c > 1.0 {
        prop_assert!(more(&|d| d.tau_a_c = d.tau_a_c.map(|t| t + bump)) > base);
    }
    Ok(())
}

/// Without delay, design drift or reconfiguration the full certificate
/// coincides with the adaptation/switching one.
pub fn check_reduction(c: &BudgetConstants) -> Check {
    let mut d = *c;
    d.eta_d = 0.0;
    d.tau_bar = 0.0;
    d.tau_a_c = None;
    let tau = d.tau_a_sigma.unwrap();
    let full = check_theorem2(&d).unwrap().certified;
    let reduced = check_theorem1(d.gamma, d.l_theta, d.rho, d.nu_sigma, tau).satisfied;
    prop_assert_eq!(full, reduced);
    Ok(())
}

/// Random but valid edits of a preset survive a TOML round trip.
pub fn check_config_round_trip(dt: f64, horizon: f64, x0: Vec<f64>, gamma: Option<f64>, tau_a: f64) -> Check {
    let mut cfg = fig1_sweep();
    cfg.integrator.dt = dt;
    cfg.integrator.horizon = horizon;
    cfg.integrator.x0 = x0;
    cfg.budget.gamma = gamma;
    cfg.policy.as_mut().unwrap().set_dwell_time(tau_a);
    cfg.configurations[0].modes = benchmark_modes();
    let text = cfg.to_toml_string().unwrap();
    let back = ScenarioConfig::from_toml_str(&text).unwrap();
    prop_assert_eq!(back, cfg);
    Ok(())
}
