//! Stability budget.
//!
//! Every mechanism spends part of the nominal decay rate `γ`:
//!
//! ```text
//! λ = γ − L_θ·ρ − L_d·η_d − β·τ̄ − ln ν_σ/τ_{a,σ} − ln ν_c/τ_{a,c}
//! ```
//!
//! The loop is certified exponentially stable when both `λ` and the flow
//! margin `γ − L_θ·ρ − L_d·η_d − β·τ̄` are positive.

use std::fmt;

use crate::config::ScenarioConfig;
use crate::engine::Trajectory;
use crate::lyapunov::{comparability_constant, decay_rate, ModeCertificate};
use crate::model::AgencyLevel;
use crate::policy::{hysteresis_dwell_bound, SwitchingPolicy};
use crate::{Error, Result};

/// Inputs of the budget. `None` dwell times mean the jump mechanism is
/// absent and contributes nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConstants {
    pub gamma: f64,
    pub nu_sigma: f64,
    pub nu_c: f64,
    pub l_theta: f64,
    pub rho: f64,
    pub l_d: f64,
    pub eta_d: f64,
    pub beta: f64,
    pub tau_bar: f64,
    pub tau_a_sigma: Option<f64>,
    pub tau_a_c: Option<f64>,
}

impl BudgetConstants {
    /// Only the nominal decay rate; every mechanism off.
    pub fn nominal(gamma: f64) -> Self {
        Self {
            gamma,
            nu_sigma: 1.0,
            nu_c: 1.0,
            l_theta: 0.0,
            rho: 0.0,
            l_d: 0.0,
            eta_d: 0.0,
            beta: 0.0,
            tau_bar: 0.0,
            tau_a_sigma: None,
            tau_a_c: None,
        }
    }

    /// The constants used for the fully coupled reproduction: `γ = 0.609`,
    /// `ν = 2.2`, `L_θ = 0.8`, `β = 2.5`, with a merged jump term.
    pub fn coupled(rho: f64, tau_bar: f64, tau_a: f64) -> Self {
        Self {
            l_theta: 0.8,
            rho,
            beta: 2.5,
            tau_bar,
            nu_sigma: 2.2,
            tau_a_sigma: Some(tau_a),
            ..Self::nominal(0.609)
        }
    }

    fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.gamma > 0.0) {
            bad.push(format!("gamma={} must be > 0", self.gamma));
        }
        for (name, v) in [("nu_sigma", self.nu_sigma), ("nu_c", self.nu_c)] {
            if !(v >= 1.0) {
                bad.push(format!("{name}={v} must be >= 1"));
            }
        }
        for (name, v) in [
            ("l_theta", self.l_theta),
            ("rho", self.rho),
            ("l_d", self.l_d),
            ("eta_d", self.eta_d),
            ("beta", self.beta),
            ("tau_bar", self.tau_bar),
        ] {
            if !(v >= 0.0) {
                bad.push(format!("{name}={v} must be >= 0"));
            }
        }
        for (name, v) in [("tau_a_sigma", self.tau_a_sigma), ("tau_a_c", self.tau_a_c)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    bad.push(format!("{name}={v} must be > 0 when its mechanism is enabled"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BudgetVerdict {
    Certified,
    NotCertified,
}

impl fmt::Display for BudgetVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Term-by-term breakdown of the margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub gamma: f64,
    pub term_adaptation: f64,
    pub term_design: f64,
    pub term_delay: f64,
    pub term_switch: f64,
    pub term_reconfig: f64,
    pub lambda: f64,
    pub lambda_flow: f64,
    pub verdict: BudgetVerdict,
}

impl BudgetReport {
    /// Positivity of the flow margin.
    pub fn flow_positive(&self) -> bool {
        self.lambda_flow > 0.0
    }

    /// Flow margin strictly exceeds the jump-rate terms.
    pub fn jumps_covered(&self) -> bool {
        self.lambda_flow > self.term_switch + self.term_reconfig
    }

    pub fn total_cost(&self) -> f64 {
        self.term_adaptation + self.term_design + self.term_delay + self.term_switch + self.term_reconfig
    }
}

fn jump_term(nu: f64, tau_a: Option<f64>) -> f64 {
    match tau_a {
        Some(tau) if nu > 1.0 => nu.ln() / tau,
        _ => 0.0,
    }
}

/// Computes `λ` and its terms.
pub fn effective_margin(c: &BudgetConstants) -> Result<BudgetReport> {
    c.validate()?;
    let term_adaptation = c.l_theta * c.rho;
    let term_design = c.l_d * c.eta_d;
    let term_delay = c.beta * c.tau_bar;
    let term_switch = jump_term(c.nu_sigma, c.tau_a_sigma);
    let term_reconfig = jump_term(c.nu_c, c.tau_a_c);
    let lambda_flow = c.gamma - term_adaptation - term_design - term_delay;
    let lambda = lambda_flow - term_switch - term_reconfig;
    let verdict = if lambda > 0.0 && lambda_flow > 0.0 {
        BudgetVerdict::Certified
    } else {
        BudgetVerdict::NotCertified
    };
    Ok(BudgetReport {
        gamma: c.gamma,
        term_adaptation,
        term_design,
        term_delay,
        term_switch,
        term_reconfig,
        lambda,
        lambda_flow,
        verdict,
    })
}

/// Outcome of a dwell-time condition `τ_a > ln ν / (γ − penalty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    /// `γ − penalty > 0`.
    pub margin_ok: bool,
    pub effective_rate: f64,
    /// `τ_a*`, absent when the margin is not positive.
    pub required_tau_a: Option<f64>,
    pub tau_a: f64,
    pub satisfied: bool,
}

impl CheckResult {
    pub fn slack(&self) -> f64 {
        self.required_tau_a
            .map_or(f64::NEG_INFINITY, |req| self.tau_a - req)
    }
}

fn dwell_check(gamma: f64, penalty: f64, nu: f64, tau_a: f64) -> CheckResult {
    let effective_rate = gamma - penalty;
    let margin_ok = effective_rate > 0.0;
    let required_tau_a = margin_ok.then(|| nu.ln() / effective_rate);
    CheckResult {
        margin_ok,
        effective_rate,
        required_tau_a,
        tau_a,
        satisfied: required_tau_a.is_some_and(|req| tau_a > req),
    }
}

/// Adaptation/switching condition: `γ > L_θρ` and `τ_a > ln ν/(γ − L_θρ)`.
pub fn check_theorem1(gamma: f64, l_theta: f64, rho: f64, nu: f64, tau_a: f64) -> CheckResult {
    dwell_check(gamma, l_theta * rho, nu, tau_a)
}

/// Delay/switching condition: `γ > βτ̄` and `τ_a > ln ν/(γ − βτ̄)`.
pub fn check_prop1(gamma: f64, beta: f64, tau_bar: f64, nu: f64, tau_a: f64) -> CheckResult {
    dwell_check(gamma, beta * tau_bar, nu, tau_a)
}

/// Fully coupled condition: both the flow margin and `λ` positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Check {
    pub report: BudgetReport,
    pub flow_positive: bool,
    pub jumps_covered: bool,
    pub certified: bool,
}

pub fn check_theorem2(c: &BudgetConstants) -> Result<Theorem2Check> {
    let report = effective_margin(c)?;
    Ok(Theorem2Check {
        flow_positive: report.flow_positive(),
        jumps_covered: report.jumps_covered(),
        certified: report.verdict == BudgetVerdict::Certified,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignRule {
    AdaptationRate,
    Dwell,
    DelayedDwell,
    ReconfigurationRate,
    FullBudget,
}

impl DesignRule {
    pub fn row_label(self) -> &'static str {
        match self {
            DesignRule::AdaptationRate => "L2",
            DesignRule::Dwell => "L3",
            DesignRule::DelayedDwell => "L3+delay",
            DesignRule::ReconfigurationRate => "L4",
            DesignRule::FullBudget => "L5",
        }
    }

    pub fn constraint(self) -> &'static str {
        match self {
            DesignRule::AdaptationRate => "L_theta*rho < gamma",
            DesignRule::Dwell => "tau_a > ln(nu)/(gamma - L_theta*rho)",
            DesignRule::DelayedDwell => "tau_a > ln(nu)/(gamma - beta*tau_bar)",
            DesignRule::ReconfigurationRate => "tau_a_c > ln(nu_c)/gamma",
            DesignRule::FullBudget => {
                "gamma > L_theta*rho + L_d*eta + beta*tau_bar + ln(nu_s)/tau_a_s + ln(nu_c)/tau_a_c"
            }
        }
    }

    pub fn advice(self) -> &'static str {
        match self {
            DesignRule::AdaptationRate => "limit adaptation rate",
            DesignRule::Dwell => "enforce dwell-time",
            DesignRule::DelayedDwell => "reduce switching under latency",
            DesignRule::ReconfigurationRate => "limit reconfiguration rate",
            DesignRule::FullBudget => "allocate shared stability budget",
        }
    }
}

/// One evaluated row. `slack > 0` exactly when the rule passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleRow {
    pub rule: DesignRule,
    /// Threshold the actual value is compared against.
    pub required: f64,
    pub actual: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTable {
    pub level: AgencyLevel,
    pub rows: Vec<RuleRow>,
}

impl RuleTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, rule: DesignRule) -> Option<&RuleRow> {
        self.rows.iter().find(|r| r.rule == rule)
    }
}

fn dwell_row(rule: DesignRule, check: CheckResult) -> RuleRow {
    let required = check.required_tau_a.unwrap_or(f64::INFINITY);
    RuleRow {
        rule,
        required,
        actual: check.tau_a,
        slack: check.slack(),
        pass: check.satisfied,
    }
}

/// Evaluates the design rules a level is subject to. Levels are
/// cumulative; rows whose mechanism is absent from the constants are
/// skipped.
pub fn design_rule_report(c: &BudgetConstants, level: AgencyLevel) -> Result<RuleTable> {
    c.validate()?;
    let mut rows = Vec::new();
    if level >= AgencyLevel::L2 {
        let cost = c.l_theta * c.rho;
        rows.push(RuleRow {
            rule: DesignRule::AdaptationRate,
            required: c.gamma,
            actual: cost,
            slack: c.gamma - cost,
            pass: cost < c.gamma,
        });
    }
    if level >= AgencyLevel::L3 {
        if let Some(tau_a) = c.tau_a_sigma {
            rows.push(dwell_row(
                DesignRule::Dwell,
                check_theorem1(c.gamma, c.l_theta, c.rho, c.nu_sigma, tau_a),
            ));
            if c.tau_bar > 0.0 {
                rows.push(dwell_row(
                    DesignRule::DelayedDwell,
                    check_prop1(c.gamma, c.beta, c.tau_bar, c.nu_sigma, tau_a),
                ));
            }
        }
    }
    if level >= AgencyLevel::L4 {
        if let Some(tau_a_c) = c.tau_a_c {
            rows.push(dwell_row(
                DesignRule::ReconfigurationRate,
                dwell_check(c.gamma, 0.0, c.nu_c, tau_a_c),
            ));
        }
    }
    if level >= AgencyLevel::L5 {
        let report = effective_margin(c)?;
        rows.push(RuleRow {
            rule: DesignRule::FullBudget,
            required: c.gamma,
            actual: report.total_cost(),
            slack: report.lambda,
            pass: report.verdict == BudgetVerdict::Certified,
        });
    }
    Ok(RuleTable { level, rows })
}

/// Budget at one logged time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSample {
    pub t: f64,
    pub report: BudgetReport,
}

impl BudgetSample {
    /// `λ < 0`: the budget predicts divergence at this time.
    pub fn predicts_divergence(&self) -> bool {
        self.report.lambda < 0.0
    }
}

/// Per-step budget trace. Rates, delays and the enforced dwell time are
/// declared constants, so the trace is piecewise constant (here: constant).
pub fn budget_timeseries(traj: &Trajectory, c: &BudgetConstants) -> Result<Vec<BudgetSample>> {
    let report = effective_margin(c)?;
    Ok(traj
        .states
        .iter()
        .map(|s| BudgetSample { t: s.t, report })
        .collect())
}

/// Where a resolved constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstantSource {
    /// Given in the scenario's budget section.
    Declared,
    /// Computed from the mode matrices via Lyapunov certificates.
    Computed,
    /// Read off the scenario (adaptation rate, delays, dwell, period).
    Scenario,
    /// The mechanism is absent; neutral value used.
    NotApplicable,
}

impl fmt::Display for ConstantSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstantSource::Declared => "declared",
            ConstantSource::Computed => "computed",
            ConstantSource::Scenario => "scenario",
            ConstantSource::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConstants {
    pub constants: BudgetConstants,
    pub sources: Vec<(&'static str, ConstantSource)>,
    /// `γ` from the spectra, whether or not a value was declared.
    pub computed_gamma: Option<f64>,
    /// `ν` from `Q = I` Lyapunov pairs, whether or not a value was declared.
    pub computed_nu: Option<f64>,
    /// Hysteresis dwell `τ_h = 2h̲/M̄`, when a band and `M̄` are known.
    pub hysteresis_dwell: Option<f64>,
}

impl ResolvedConstants {
    pub fn source(&self, name: &str) -> Option<ConstantSource> {
        self.sources.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }
}

/// `γ` over every flow matrix of the scenario.
pub fn scenario_gamma(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.all_modes()
        .map(|m| decay_rate(&m.a))
        .try_fold(f64::INFINITY, |acc, g| g.map(|g| acc.min(g)))
}

/// `ν` over every flow matrix of the scenario with `Q = I`.
pub fn scenario_nu(cfg: &ScenarioConfig) -> Result<f64> {
    let certs = cfg
        .all_modes()
        .map(|m| ModeCertificate::with_identity(&m.a))
        .collect::<Result<Vec<_>>>()?;
    comparability_constant(&certs)
}

/// Fills in every budget constant, preferring declared values, then values
/// computable from the scenario. Fails listing each constant that is needed
/// but neither declared nor derivable.
pub fn resolve_constants(cfg: &ScenarioConfig) -> Result<ResolvedConstants> {
    use ConstantSource::*;
    let spec = &cfg.budget;
    let mut sources = Vec::new();
    let mut missing = Vec::new();

    let computed_gamma = scenario_gamma(cfg).ok();
    let computed_nu = scenario_nu(cfg).ok();

    let gamma = match (spec.gamma, computed_gamma) {
        (Some(g), _) => {
            sources.push(("gamma", Declared));
            g
        }
        (None, Some(g)) => {
            sources.push(("gamma", Computed));
            g
        }
        (None, None) => {
            missing.push("gamma (some mode is not Hurwitz)".to_string());
            f64::NAN
        }
    };

    let mut needed = |name: &'static str,
                      declared: Option<f64>,
                      scenario: Option<f64>,
                      required: bool,
                      sources: &mut Vec<(&'static str, ConstantSource)>|
     -> f64 {
        match (declared, scenario) {
            (Some(v), _) => {
                sources.push((name, Declared));
                v
            }
            (None, Some(v)) => {
                sources.push((name, Scenario));
                v
            }
            (None, None) if required => {
                missing.push(name.to_string());
                f64::NAN
            }
            (None, None) => {
                sources.push((name, NotApplicable));
                0.0
            }
        }
    };

    let rho_scenario = if cfg.adaptation.active() {
        cfg.adaptation.rho
    } else {
        0.0
    };
    let rho = needed("rho", spec.rho, Some(rho_scenario), false, &mut sources);
    let l_theta = needed("l_theta", spec.l_theta, None, rho > 0.0, &mut sources);
    let tau_bar = needed("tau_bar", spec.tau_bar, Some(cfg.delays.tau_bar), false, &mut sources);
    let beta = needed("beta", spec.beta, None, tau_bar > 0.0, &mut sources);
    let eta_d = needed("eta_d", None, Some(cfg.goal.eta_d), false, &mut sources);
    let l_d = needed("l_d", spec.l_d, None, eta_d > 0.0, &mut sources);

    let hysteresis_dwell = match (cfg.policy.as_ref().and_then(SwitchingPolicy::band), spec.m_upper) {
        (Some(band), Some(m)) => hysteresis_dwell_bound(band.lower(), m).ok(),
        _ => None,
    };
    let switching = cfg.policy.is_some();
    let reconfig_period = cfg
        .reconfiguration
        .as_ref()
        .map(|r| r.period())
        .filter(|p| p.is_finite());
    let policy_dwell = cfg
        .policy
        .as_ref()
        .and_then(SwitchingPolicy::dwell_time)
        .or(hysteresis_dwell);

    let mut resolve_jump = |nu_name: &'static str,
                            tau_name: &'static str,
                            nu_declared: Option<f64>,
                            tau_declared: Option<f64>,
                            tau_scenario: Option<f64>,
                            active: bool,
                            sources: &mut Vec<(&'static str, ConstantSource)>|
     -> (f64, Option<f64>) {
        if !active {
            sources.push((nu_name, NotApplicable));
            sources.push((tau_name, NotApplicable));
            return (1.0, None);
        }
        let nu = match (nu_declared, computed_nu) {
            (Some(v), _) => {
                sources.push((nu_name, Declared));
                v
            }
            (None, Some(v)) => {
                sources.push((nu_name, Computed));
                v
            }
            (None, None) => {
                missing.push(format!("{nu_name} (some mode is not Hurwitz)"));
                f64::NAN
            }
        };
        let tau = match (tau_declared, tau_scenario) {
            (Some(v), _) => {
                sources.push((tau_name, Declared));
                Some(v)
            }
            (None, Some(v)) => {
                sources.push((tau_name, Scenario));
                Some(v)
            }
            (None, None) => {
                missing.push(tau_name.to_string());
                None
            }
        };
        (nu, tau)
    };

    let (nu_sigma, tau_a_sigma, nu_c, tau_a_c) = if spec.merged_jumps {
        let (nu, tau) = resolve_jump(
            "nu_sigma",
            "tau_a_sigma",
            spec.nu_sigma,
            spec.tau_a_sigma,
            policy_dwell.or(if switching { None } else { reconfig_period }),
            switching || reconfig_period.is_some(),
            &mut sources,
        );
        sources.push(("nu_c", NotApplicable));
        sources.push(("tau_a_c", NotApplicable));
        (nu, tau, 1.0, None)
    } else {
        let (ns, ts) = resolve_jump(
            "nu_sigma",
            "tau_a_sigma",
            spec.nu_sigma,
            spec.tau_a_sigma,
            policy_dwell,
            switching,
            &mut sources,
        );
        let (nc, tc) = resolve_jump(
            "nu_c",
            "tau_a_c",
            spec.nu_c,
            spec.tau_a_c,
            reconfig_period,
            reconfig_period.is_some(),
            &mut sources,
        );
        (ns, ts, nc, tc)
    };

    if !missing.is_empty() {
        return Err(Error::Underdetermined(missing));
    }
    let constants = BudgetConstants {
        gamma,
        nu_sigma,
        nu_c,
        l_theta,
        rho,
        l_d,
        eta_d,
        beta,
        tau_bar,
        tau_a_sigma,
        tau_a_c,
    };
    constants.validate()?;
    Ok(ResolvedConstants {
        constants,
        sources,
        computed_gamma,
        computed_nu,
        hysteresis_dwell,
    })
}

/// Every certificate the scenario's constants admit.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub resolved: ResolvedConstants,
    pub theorem1: Option<CheckResult>,
    pub prop1: Option<CheckResult>,
    pub theorem2: Theorem2Check,
    pub rules: RuleTable,
}

pub fn certify(cfg: &ScenarioConfig) -> Result<CertificateReport> {
    let resolved = resolve_constants(cfg)?;
    let c = &resolved.constants;
    let theorem1 = c
        .tau_a_sigma
        .map(|tau| check_theorem1(c.gamma, c.l_theta, c.rho, c.nu_sigma, tau));
    let prop1 = c
        .tau_a_sigma
        .map(|tau| check_prop1(c.gamma, c.beta, c.tau_bar, c.nu_sigma, tau));
    let theorem2 = check_theorem2(c)?;
    let rules = design_rule_report(c, cfg.agency_level)?;
    Ok(CertificateReport {
        resolved,
        theorem1,
        prop1,
        theorem2,
        rules,
    })
}
