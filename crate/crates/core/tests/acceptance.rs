//! One line per acceptance criterion. Run with
//! `cargo test -p agentic-control --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use agentic_control::budget::{check_theorem1, effective_margin, BudgetConstants};
use agentic_control::commands::{cmd_simulate, cmd_sweep, RunOptions};
use agentic_control::config::SweepSpec;
use agentic_control::engine::StabilityVerdict;
use agentic_control::experiments::*;
use agentic_control::lyapunov::decay_rate;
use agentic_control::policy::switch_statistics;
use common::*;
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, name: &str, pass: bool, detail: String, took: Duration) {
        let line = format!(
            "{} {name}: {detail} ({:.2}s)",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Check,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, check)
        .map_err(|e| e.to_string())
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn acceptance() {
    let mut r = Report { lines: Vec::new() };

    let t = Instant::now();
    let stable = effective_margin(&BudgetConstants::coupled(0.15, 0.03, 4.0)).unwrap();
    r.record(
        "budget arithmetic, stable case",
        (stable.lambda - 0.217).abs() <= 1e-3,
        format!("lambda = {:+.6}", stable.lambda),
        t.elapsed(),
    );

    let t = Instant::now();
    let unstable = effective_margin(&BudgetConstants::coupled(3.5, 0.20, 0.4)).unwrap();
    r.record(
        "budget arithmetic, unstable case",
        (unstable.lambda + 4.662).abs() <= 1e-3,
        format!("lambda = {:+.6}", unstable.lambda),
        t.elapsed(),
    );

    let t = Instant::now();
    let gamma = decay_rate(&benchmark_a2()).unwrap();
    r.record(
        "spectral anchor decay_rate(A2)",
        (gamma - 0.609).abs() <= 1e-3,
        format!("gamma = {gamma:.6}"),
        t.elapsed(),
    );

    let t = Instant::now();
    let th1 = check_theorem1(0.609, 0.8, 0.0, 2.2, 1.0);
    let tau_star = th1.required_tau_a.unwrap_or(f64::NAN);
    r.record(
        "dwell threshold tau_a*",
        (tau_star - 1.30).abs() <= 0.01,
        format!("tau_a* = {tau_star:.4} s"),
        t.elapsed(),
    );

    let t = Instant::now();
    let s = fully_coupled_case(CoupledCase::StableCase).unwrap();
    let took_s = t.elapsed();
    let t = Instant::now();
    let u = fully_coupled_case(CoupledCase::UnstableCase).unwrap();
    let took_u = t.elapsed();
    let gaps_ok = switch_statistics(&s.trajectory).min_gap >= 4.0;
    r.record(
        "fully coupled verdicts",
        s.verdict == StabilityVerdict::Stable
            && u.verdict == StabilityVerdict::Unstable
            && s.trajectory.final_norm() <= 1e-2
            && u.trajectory.max_norm() > 1e6
            && gaps_ok
            && s.report.lambda > 0.0
            && u.report.lambda < 0.0
            && took_s.as_secs_f64() <= 10.0
            && took_u.as_secs_f64() <= 10.0,
        format!(
            "stable {} |x(T)|={:.2e} lambda={:+.3}; unstable {} max|x|={:.2e} lambda={:+.3}; stable gaps >= 4 s: {gaps_ok}",
            s.verdict,
            s.trajectory.final_norm(),
            s.report.lambda,
            u.verdict,
            u.trajectory.max_norm(),
            u.report.lambda
        ),
        took_s + took_u,
    );

    let t = Instant::now();
    let base = fig1_sweep();
    let grid = delay_dwell_sweep(&base, &SweepSpec::default(), 0).unwrap();
    let boundary = empirical_boundary(&grid);
    let took = t.elapsed();
    let b0 = boundary[0].tau_a;
    r.record(
        "empirical boundary bracket at tau_bar=0",
        b0.is_some_and(|b| (1.0..=1.6).contains(&b)) && took.as_secs_f64() <= 900.0,
        format!("boundary = {b0:?} s over {} cells", grid.cells.len()),
        took,
    );

    let t = Instant::now();
    let defined: Vec<f64> = boundary.iter().filter_map(|p| p.tau_a).collect();
    let monotone = defined.windows(2).all(|w| w[0] <= w[1]);
    r.record(
        "boundary nondecreasing in tau_bar",
        monotone && !defined.is_empty(),
        format!("{defined:?}"),
        t.elapsed(),
    );

    let t = Instant::now();
    let scen = ReconfigScenario::shipped().unwrap();
    let (fast, slow) = level4_reconfig_run(&scen, FAST_PERIOD, SLOW_PERIOD).unwrap();
    let took = t.elapsed();
    let growth = growth_factor(&fast);
    let slow_decay = slow.final_norm() < slow.states[0].norm_x();
    r.record(
        "level-4 reconfiguration dichotomy",
        growth > 10.0 && slow_decay && took.as_secs_f64() <= 20.0,
        format!(
            "fast ({FAST_PERIOD} s) growth x{growth:.1}; slow ({SLOW_PERIOD} s) |x(T)|={:.2e}",
            slow.final_norm()
        ),
        took,
    );

    // Property suite.
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut note = |name: &str, res: Result<(), String>| {
        if let Err(e) = res {
            failures.push(format!("{name}: {e}"));
        }
    };
    note("rk4 order", run_property(200, rk4_strategy(), |a| check_rk4_order(&a)));
    note(
        "lyapunov residual",
        run_property(1000, hurwitz_strategy(), |a| check_lyapunov_residual(&a)),
    );
    note(
        "dwell gap",
        run_property(32, dwell_strategy(), |(tau_a, tau_bar, x0)| check_dwell_gap(tau_a, tau_bar, &x0)),
    );
    let hyst_active = std::cell::Cell::new(0);
    note(
        "hysteresis gap",
        run_property(32, hysteresis_strategy(), |(h, x0)| {
            let traj = agentic_control::engine::simulate(&hysteresis_scenario(h, &x0)).unwrap();
            if switch_statistics(&traj).count() >= 2 {
                hyst_active.set(hyst_active.get() + 1);
            }
            check_hysteresis_gap(h, &x0)
        }),
    );
    note(
        "lambda monotonicity",
        run_property(1000, (constants_strategy(), 0.01f64..1.0), |(c, bump)| {
            check_lambda_monotone(&c, bump)
        }),
    );

    let budgets = sweep_budgets(&base, &grid).unwrap();
    let certified = budgets.iter().filter(|b| b.lambda > 0.0).count();
    let unsound: Vec<_> = grid
        .cells
        .iter()
        .zip(&budgets)
        .filter(|(c, b)| b.lambda > 0.0 && c.verdict == StabilityVerdict::Unstable)
        .map(|(c, _)| (c.tau_bar, c.tau_a))
        .collect();
    if !unsound.is_empty() {
        failures.push(format!("certified but Unstable cells: {unsound:?}"));
    }

    let dirs: Vec<_> = (0..4).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs[..2] {
        let opts = RunOptions {
            out: Some(d.path().to_path_buf()),
            ..RunOptions::default()
        };
        cmd_simulate(&fig3_stable(), &opts).unwrap();
    }
    let mut small = fig1_sweep();
    small.sweep = Some(SweepSpec {
        tau_a_values: SweepSpec::default().tau_a_values,
        tau_bar_values: vec![0.0, 0.1, 0.25],
    });
    for (d, workers) in dirs[2..].iter().zip([1, 3]) {
        let opts = RunOptions {
            out: Some(d.path().to_path_buf()),
            workers,
            ..RunOptions::default()
        };
        cmd_sweep(&small, &opts).unwrap();
    }
    if read_all(dirs[0].path()) != read_all(dirs[1].path()) {
        failures.push("simulate CSVs differ between reruns".into());
    }
    if read_all(dirs[2].path()) != read_all(dirs[3].path()) {
        failures.push("sweep CSVs differ between worker counts".into());
    }
    let took = t.elapsed();
    r.record(
        "property suite",
        failures.is_empty() && took.as_secs_f64() <= 300.0,
        if failures.is_empty() {
            format!(
                "all properties hold; {certified} certified cells, none Unstable; hysteresis runs with switching: {}/32",
                hyst_active.get()
            )
        } else {
            failures.join("; ")
        },
        took,
    );

    let failed: Vec<_> = r.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l.clone()).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
