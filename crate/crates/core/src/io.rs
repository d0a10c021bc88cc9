//! CSV persistence.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers never see a half-written file. Floats use Rust's shortest
//! round-trip form (`{:?}`), which parses back to the identical `f64`.

use std::io::Write;
use std::path::Path;

use crate::budget::{BudgetSample, CertificateReport};
use crate::engine::{RunEnd, StabilityVerdict, Trajectory};
use crate::experiments::{BoundaryPoint, SweepGrid};
use crate::policy::SwitchStats;
use crate::{Error, Result};

pub const EVENTS_HEADER: [&str; 4] = ["t", "kind", "from", "to"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "name",
    "verdict",
    "end",
    "final_norm",
    "max_norm",
    "switch_count",
    "min_gap",
    "mean_gap",
    "empirical_m_bar",
    "horizon",
];
pub const SWEEP_HEADER: [&str; 4] = ["tau_bar", "tau_a", "verdict", "final_norm"];
pub const BOUNDARY_HEADER: [&str; 2] = ["tau_bar", "tau_a_boundary"];
pub const BUDGET_HEADER: [&str; 10] = [
    "t",
    "gamma",
    "adaptation",
    "design",
    "delay",
    "switch",
    "reconfig",
    "lambda",
    "lambda_flow",
    "certified",
];
pub const CERTIFICATE_HEADER: [&str; 6] = ["condition", "applicable", "pass", "required", "actual", "slack"];
pub const CONSTANTS_HEADER: [&str; 3] = ["name", "value", "source"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows to `path` atomically.
pub fn write_csv<H, R>(path: &Path, header: &[H], rows: R) -> Result<()>
where
    H: AsRef<str>,
    R: IntoIterator<Item = Vec<String>>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    {
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(tmp.as_file()));
        let csv_err = |e: csv::Error| io_err(path, std::io::Error::other(e));
        w.write_record(header.iter().map(AsRef::as_ref)).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| io_err(path, e.into_error()))?;
        inner.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let first = traj.states.first();
    let n = first.map_or(0, |s| s.x.len());
    let k = first.map_or(0, |s| s.theta.len());
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.push("norm".into());
    if k == 1 {
        h.push("theta".into());
    } else {
        h.extend((1..=k).map(|i| format!("theta{i}")));
    }
    h.push("sigma".into());
    h.push("c".into());
    h
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = traj.states.iter().map(|s| {
        let mut row = vec![fmt_f64(s.t)];
        row.extend(s.x.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.norm_x()));
        row.extend(s.theta.iter().map(|&v| fmt_f64(v)));
        row.push(s.sigma.to_string());
        row.push(s.c.to_string());
        row
    });
    write_csv(path, &trajectory_header(traj), rows)
}

pub fn write_events(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = traj.events.iter().map(|e| {
        vec![
            fmt_f64(e.t),
            e.kind.to_string(),
            e.from.to_string(),
            e.to.to_string(),
        ]
    });
    write_csv(path, &EVENTS_HEADER, rows)
}

fn end_label(end: RunEnd) -> &'static str {
    match end {
        RunEnd::Completed => "completed",
        RunEnd::Escaped { .. } => "escaped",
        RunEnd::NonFinite { .. } => "non_finite",
    }
}

pub struct Summary<'a> {
    pub name: &'a str,
    pub verdict: StabilityVerdict,
    pub trajectory: &'a Trajectory,
    pub switches: &'a SwitchStats,
    pub empirical_m_bar: f64,
}

pub fn write_summary(path: &Path, s: &Summary<'_>) -> Result<()> {
    let row = vec![
        s.name.to_string(),
        s.verdict.to_string(),
        end_label(s.trajectory.end).to_string(),
        fmt_f64(s.trajectory.final_norm()),
        fmt_f64(s.trajectory.max_norm()),
        s.switches.count().to_string(),
        fmt_f64(s.switches.min_gap),
        fmt_f64(s.switches.mean_gap),
        fmt_f64(s.empirical_m_bar),
        fmt_f64(s.trajectory.horizon()),
    ];
    write_csv(path, &SUMMARY_HEADER, [row])
}

pub fn write_sweep(path: &Path, grid: &SweepGrid) -> Result<()> {
    let rows = grid.cells.iter().map(|c| {
        vec![
            fmt_f64(c.tau_bar),
            fmt_f64(c.tau_a),
            c.verdict.to_string(),
            fmt_f64(c.final_norm),
        ]
    });
    write_csv(path, &SWEEP_HEADER, rows)
}

/// Undefined boundaries are written as empty fields.
pub fn write_boundary(path: &Path, boundary: &[BoundaryPoint]) -> Result<()> {
    let rows = boundary
        .iter()
        .map(|p| vec![fmt_f64(p.tau_bar), p.tau_a.map(fmt_f64).unwrap_or_default()]);
    write_csv(path, &BOUNDARY_HEADER, rows)
}

pub fn write_budget(path: &Path, samples: &[BudgetSample]) -> Result<()> {
    let rows = samples.iter().map(|s| {
        let r = &s.report;
        vec![
            fmt_f64(s.t),
            fmt_f64(r.gamma),
            fmt_f64(r.term_adaptation),
            fmt_f64(r.term_design),
            fmt_f64(r.term_delay),
            fmt_f64(r.term_switch),
            fmt_f64(r.term_reconfig),
            fmt_f64(r.lambda),
            fmt_f64(r.lambda_flow),
            (r.lambda > 0.0 && r.lambda_flow > 0.0).to_string(),
        ]
    });
    write_csv(path, &BUDGET_HEADER, rows)
}

/// One row per checked condition, in a fixed order.
pub fn certificate_rows(report: &CertificateReport) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut dwell = |name: &str, check: Option<crate::budget::CheckResult>| match check {
        Some(c) => rows.push(vec![
            name.to_string(),
            "true".into(),
            c.satisfied.to_string(),
            fmt_f64(c.required_tau_a.unwrap_or(f64::INFINITY)),
            fmt_f64(c.tau_a),
            fmt_f64(c.slack()),
        ]),
        None => rows.push(vec![
            name.to_string(),
            "false".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]),
    };
    dwell("theorem1", report.theorem1);
    dwell("prop1", report.prop1);
    let t2 = &report.theorem2;
    rows.push(vec![
        "theorem2".into(),
        "true".into(),
        t2.certified.to_string(),
        "0.0".into(),
        fmt_f64(t2.report.lambda),
        fmt_f64(t2.report.lambda),
    ]);
    for r in &report.rules.rows {
        rows.push(vec![
            r.rule.row_label().to_string(),
            "true".into(),
            r.pass.to_string(),
            fmt_f64(r.required),
            fmt_f64(r.actual),
            fmt_f64(r.slack),
        ]);
    }
    rows
}

pub fn write_certificate(path: &Path, report: &CertificateReport) -> Result<()> {
    write_csv(path, &CERTIFICATE_HEADER, certificate_rows(report))
}

pub fn write_constants(path: &Path, report: &CertificateReport) -> Result<()> {
    let c = &report.resolved.constants;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let values = [
        ("gamma", fmt_f64(c.gamma)),
        ("nu_sigma", fmt_f64(c.nu_sigma)),
        ("nu_c", fmt_f64(c.nu_c)),
        ("l_theta", fmt_f64(c.l_theta)),
        ("rho", fmt_f64(c.rho)),
        ("l_d", fmt_f64(c.l_d)),
        ("eta_d", fmt_f64(c.eta_d)),
        ("beta", fmt_f64(c.beta)),
        ("tau_bar", fmt_f64(c.tau_bar)),
        ("tau_a_sigma", opt(c.tau_a_sigma)),
        ("tau_a_c", opt(c.tau_a_c)),
    ];
    let mut rows: Vec<Vec<String>> = values
        .into_iter()
        .map(|(name, value)| {
            let source = report
                .resolved
                .source(name)
                .map(|s| s.to_string())
                .unwrap_or_default();
            vec![name.to_string(), value, source]
        })
        .collect();
    rows.push(vec!["gamma_spectral".into(), opt(report.resolved.computed_gamma), "computed".into()]);
    rows.push(vec!["nu_lyapunov".into(), opt(report.resolved.computed_nu), "computed".into()]);
    rows.push(vec!["tau_h".into(), opt(report.resolved.hysteresis_dwell), "computed".into()]);
    write_csv(path, &CONSTANTS_HEADER, rows)
}
