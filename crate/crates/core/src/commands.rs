//! The four user-facing commands, as library functions.
//!
//! Each is a pure function of the scenario and its options: it writes CSVs
//! into `out` and returns a text report. The binary only parses flags and
//! maps errors to exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::budget::{budget_timeseries, certify, CertificateReport, ConstantSource};
use crate::config::ScenarioConfig;
use crate::engine::{classify_outcome, simulate, RunEnd, StabilityVerdict, Trajectory};
use crate::experiments::{delay_dwell_sweep, empirical_boundary, BoundaryPoint, SweepGrid};
use crate::io;
use crate::policy::{empirical_score_rate, switch_statistics};
use crate::{Error, Result};

/// Process exit status for a command result.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.non_finite => 3,
        Ok(_) => 0,
        Err(Error::Blowup { .. }) => 3,
        Err(
            Error::Config(_)
            | Error::InvalidScenario(_)
            | Error::Underdetermined(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch(_)
            | Error::Io { .. },
        ) => 2,
        Err(_) => 1,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// Sweep worker threads; 0 means one per core.
    pub workers: usize,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            cfg.integrator.dt = dt;
        }
        if let Some(h) = self.horizon {
            cfg.integrator.horizon = h;
        }
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                Ok(Some(dir))
            }
            None => Ok(None),
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: String,
    pub written: Vec<PathBuf>,
    /// A single run stopped on a non-finite state.
    pub non_finite: bool,
}

pub fn load(path: &Path, opts: &RunOptions) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    opts.apply(&mut cfg);
    Ok(cfg)
}

fn end_text(end: RunEnd) -> String {
    match end {
        RunEnd::Completed => "completed".into(),
        RunEnd::Escaped { t } => format!("escaped blowup ball at t={t}"),
        RunEnd::NonFinite { t } => format!("non-finite state at t={t}"),
    }
}

fn simulate_checked(cfg: &ScenarioConfig) -> Result<(Trajectory, StabilityVerdict)> {
    let traj = simulate(cfg)?;
    let verdict = classify_outcome(&traj, cfg.classifier.settle_tol, cfg.classifier.blowup_tol);
    Ok((traj, verdict))
}

/// Simulates; writes `trajectory.csv`, `events.csv`, `summary.csv`.
pub fn cmd_simulate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome> {
    let (traj, verdict) = simulate_checked(cfg)?;
    let stats = switch_statistics(&traj);
    let m_bar = empirical_score_rate(&traj.scores, traj.dt);

    let mut written = Vec::new();
    if let Some(dir) = opts.out_dir()? {
        let p = dir.join("trajectory.csv");
        io::write_trajectory(&p, &traj)?;
        written.push(p);
        let p = dir.join("events.csv");
        io::write_events(&p, &traj)?;
        written.push(p);
        let p = dir.join("summary.csv");
        io::write_summary(
            &p,
            &io::Summary {
                name: &cfg.name,
                verdict,
                trajectory: &traj,
                switches: &stats,
                empirical_m_bar: m_bar,
            },
        )?;
        written.push(p);
    }

    let mut report = String::new();
    let _ = writeln!(report, "scenario  {}", cfg.name);
    let _ = writeln!(report, "verdict   {verdict}");
    let _ = writeln!(report, "run       {}", end_text(traj.end));
    let _ = writeln!(report, "final |x| {:e}", traj.final_norm());
    let _ = writeln!(report, "switches  {} (min gap {})", stats.count(), stats.min_gap);
    Ok(Outcome {
        report,
        written,
        non_finite: matches!(traj.end, RunEnd::NonFinite { .. }),
    })
}

/// Result of [`cmd_sweep`] beyond the files.
pub fn sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(SweepGrid, Vec<BoundaryPoint>)> {
    let grid = delay_dwell_sweep(cfg, &cfg.sweep_spec(), opts.workers)?;
    let boundary = empirical_boundary(&grid);
    Ok((grid, boundary))
}

/// Sweeps dwell × delay; writes `sweep.csv` and `boundary.csv`.
pub fn cmd_sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome> {
    let (grid, boundary) = sweep(cfg, opts)?;
    let mut written = Vec::new();
    if let Some(dir) = opts.out_dir()? {
        let p = dir.join("sweep.csv");
        io::write_sweep(&p, &grid)?;
        written.push(p);
        let p = dir.join("boundary.csv");
        io::write_boundary(&p, &boundary)?;
        written.push(p);
    }
    let mut report = String::new();
    let _ = writeln!(report, "tau_a: {:?}", grid.tau_a_values);
    for (row, p) in grid.verdict_map().iter().zip(&boundary) {
        let b = p.tau_a.map_or("undefined".to_string(), |v| v.to_string());
        let _ = writeln!(report, "tau_bar={:<6} {row}  boundary {b}", p.tau_bar);
    }
    Ok(Outcome {
        report,
        written,
        non_finite: false,
    })
}

fn write_certificate_files(dir: &Path, cert: &CertificateReport, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join("certificate.csv");
    io::write_certificate(&p, cert)?;
    written.push(p);
    let p = dir.join("constants.csv");
    io::write_constants(&p, cert)?;
    written.push(p);
    Ok(())
}

/// Simulates and traces the budget; writes `budget.csv`, `certificate.csv`
/// and `constants.csv`.
pub fn cmd_budget(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome> {
    let cert = certify(cfg)?;
    let (traj, verdict) = simulate_checked(cfg)?;
    let samples = budget_timeseries(&traj, &cert.resolved.constants)?;
    let mut written = Vec::new();
    if let Some(dir) = opts.out_dir()? {
        let p = dir.join("budget.csv");
        io::write_budget(&p, &samples)?;
        written.push(p);
        write_certificate_files(dir, &cert, &mut written)?;
    }
    let mut report = render_certificate(&cert);
    let _ = writeln!(report, "simulated verdict: {verdict} ({})", end_text(traj.end));
    Ok(Outcome {
        report,
        written,
        non_finite: matches!(traj.end, RunEnd::NonFinite { .. }),
    })
}

/// Checks the certificates without simulating.
pub fn cmd_certify(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome> {
    let cert = certify(cfg)?;
    let mut written = Vec::new();
    if let Some(dir) = opts.out_dir()? {
        write_certificate_files(dir, &cert, &mut written)?;
    }
    Ok(Outcome {
        report: render_certificate(&cert),
        written,
        non_finite: false,
    })
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Human-readable certificate report.
pub fn render_certificate(cert: &CertificateReport) -> String {
    let c = &cert.resolved.constants;
    let mut s = String::new();
    let _ = writeln!(s, "constants:");
    let src = |name: &str| {
        cert.resolved
            .source(name)
            .unwrap_or(ConstantSource::NotApplicable)
    };
    let scalar = [
        ("gamma", c.gamma),
        ("nu_sigma", c.nu_sigma),
        ("nu_c", c.nu_c),
        ("l_theta", c.l_theta),
        ("rho", c.rho),
        ("l_d", c.l_d),
        ("eta_d", c.eta_d),
        ("beta", c.beta),
        ("tau_bar", c.tau_bar),
    ];
    for (name, v) in scalar {
        let _ = writeln!(s, "  {name:<12} {v:<12.6} [{}]", src(name));
    }
    for (name, v) in [("tau_a_sigma", c.tau_a_sigma), ("tau_a_c", c.tau_a_c)] {
        let v = v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "  {name:<12} {v:<12} [{}]", src(name));
    }
    if let Some(g) = cert.resolved.computed_gamma {
        let _ = writeln!(s, "  spectral gamma  {g:.6}");
    }
    if let Some(nu) = cert.resolved.computed_nu {
        let _ = writeln!(s, "  Lyapunov nu     {nu:.6}");
    }

    let dwell = |s: &mut String, name: &str, check: Option<crate::budget::CheckResult>| {
        match check {
            Some(r) => {
                let req = r
                    .required_tau_a
                    .map_or("unbounded (margin <= 0)".to_string(), |v| format!("{v:.4} s"));
                let _ = writeln!(
                    s,
                    "{name:<10} {}  rate {:.4}  tau_a* {req}  tau_a {:.4} s",
                    pass(r.satisfied),
                    r.effective_rate,
                    r.tau_a
                );
            }
            None => {
                let _ = writeln!(s, "{name:<10} n/a (no switching)");
            }
        }
    };
    let _ = writeln!(s, "certificates:");
    dwell(&mut s, "theorem1", cert.theorem1);
    dwell(&mut s, "prop1", cert.prop1);
    let r = &cert.theorem2.report;
    let _ = writeln!(
        s,
        "theorem2   {}  lambda {:+.4}  lambda_flow {:+.4}",
        if cert.theorem2.certified {
            "Certified"
        } else {
            "NotCertified"
        },
        r.lambda,
        r.lambda_flow
    );
    let _ = writeln!(
        s,
        "  terms: adaptation {:.4}  design {:.4}  delay {:.4}  switch {:.4}  reconfig {:.4}",
        r.term_adaptation, r.term_design, r.term_delay, r.term_switch, r.term_reconfig
    );
    let _ = writeln!(s, "design rules ({}):", cert.rules.level);
    if cert.rules.rows.is_empty() {
        let _ = writeln!(s, "  none apply");
    }
    for row in &cert.rules.rows {
        let _ = writeln!(
            s,
            "  {:<9} {}  {}  required {:.4}  actual {:.4}  slack {:+.4}  ({})",
            row.rule.row_label(),
            pass(row.pass),
            row.rule.constraint(),
            row.required,
            row.actual,
            row.slack,
            row.rule.advice()
        );
    }
    s
}
