//! Domain types for the augmented closed loop and the agency hierarchy.
//!
//! Nothing in here integrates anything. The types carry structure and their
//! own invariants; [`validate_scenario`] collects every violation of a
//! scenario instead of stopping at the first one.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// The augmented state `(x, m, θ, σ, c, ζ)` at time `t`.
///
/// `sigma` and `c` are 1-based indices into the scenario's mode and
/// configuration tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub t: f64,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma: usize,
    pub c: usize,
    pub zeta: Vec<f64>,
}

impl AugmentedState {
    pub fn norm_x(&self) -> f64 {
        euclidean_norm(&self.x)
    }

    pub fn is_finite(&self) -> bool {
        [&self.x, &self.m, &self.theta, &self.zeta]
            .iter()
            .all(|v| v.iter().all(|e| e.is_finite()))
            && self.t.is_finite()
    }

    /// Checks the state invariants against declared mode and configuration
    /// counts. Returns one message per violation.
    pub fn violations(&self, modes: usize, configurations: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !self.is_finite() {
            out.push(format!("non-finite entry in state at t={}", self.t));
        }
        if self.sigma == 0 || self.sigma > modes {
            out.push(format!("sigma={} outside 1..={modes}", self.sigma));
        }
        if self.c == 0 || self.c > configurations {
            out.push(format!("c={} outside 1..={configurations}", self.c));
        }
        out
    }
}

/// Projection `d = (ζ, σ, c)` of the augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignTuple {
    pub zeta: Vec<f64>,
    pub sigma: usize,
    pub c: usize,
}

pub fn project_design_state(s: &AugmentedState) -> DesignTuple {
    DesignTuple {
        zeta: s.zeta.clone(),
        sigma: s.sigma,
        c: s.c,
    }
}

/// Flow data of one mode: `ẋ = a·x(t) + a_delay·x(t − τ̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDynamics {
    #[serde(default)]
    pub label: String,
    #[serde(with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(with = "matrix_rows_opt", default, skip_serializing_if = "Option::is_none")]
    pub a_delay: Option<DMatrix<f64>>,
}

impl ModeDynamics {
    pub fn new(label: impl Into<String>, a: DMatrix<f64>) -> Self {
        Self {
            label: label.into(),
            a,
            a_delay: None,
        }
    }

    pub fn with_delay(mut self, a_delay: DMatrix<f64>) -> Self {
        self.a_delay = Some(a_delay);
        self
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn violations(&self, out: &mut Vec<String>) {
        let name = if self.label.is_empty() {
            "mode"
        } else {
            &self.label
        };
        if !self.a.is_square() {
            out.push(format!(
                "dimension mismatch: {name} flow matrix is {}x{}",
                self.a.nrows(),
                self.a.ncols()
            ));
        }
        if let Some(ad) = &self.a_delay {
            if ad.shape() != self.a.shape() {
                out.push(format!(
                    "dimension mismatch: {name} delay matrix is {}x{}, flow matrix is {}x{}",
                    ad.nrows(),
                    ad.ncols(),
                    self.a.nrows(),
                    self.a.ncols()
                ));
            }
            if ad.iter().any(|v| !v.is_finite()) {
                out.push(format!("{name} delay matrix has non-finite entries"));
            }
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            out.push(format!("{name} flow matrix has non-finite entries"));
        }
    }
}

/// First-order lag of θ toward `κ·tanh(‖x‖)` at rate `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationLaw {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Gain of an optional `coupling·θ₁·x` term in the plant flow. Zero keeps
    /// θ out of the plant entirely.
    #[serde(default)]
    pub coupling: f64,
}

fn default_kappa() -> f64 {
    0.3
}

impl Default for AdaptationLaw {
    fn default() -> Self {
        Self {
            enabled: false,
            rho: 0.0,
            kappa: default_kappa(),
            coupling: 0.0,
        }
    }
}

impl AdaptationLaw {
    pub fn active(&self) -> bool {
        self.enabled && self.rho > 0.0
    }
}

/// Placeholder memory law `ṁ = −decay·m + gain·x[..dim]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryLaw {
    #[serde(default)]
    pub dim: usize,
    #[serde(default = "one")]
    pub decay: f64,
    #[serde(default)]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for MemoryLaw {
    fn default() -> Self {
        Self {
            dim: 0,
            decay: 1.0,
            gain: 0.0,
        }
    }
}

/// Goal descriptor and its drift-rate bound (nonzero only at Level 5).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    #[serde(default)]
    pub zeta0: Vec<f64>,
    #[serde(default)]
    pub eta_d: f64,
}

/// Per-channel latencies and the declared total-delay bound `τ̄`, all in
/// seconds. The plant's delayed coupling reads `x(t − τ̄)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayBudget {
    #[serde(default)]
    pub tau_u: f64,
    #[serde(default)]
    pub tau_theta: f64,
    #[serde(default)]
    pub tau_z: f64,
    #[serde(default)]
    pub tau_sigma: f64,
    #[serde(default)]
    pub tau_c: f64,
    #[serde(default)]
    pub tau_zeta: f64,
    #[serde(default)]
    pub tau_bar: f64,
}

impl DelayBudget {
    pub fn channels(&self) -> [(&'static str, f64); 6] {
        [
            ("tau_u", self.tau_u),
            ("tau_theta", self.tau_theta),
            ("tau_z", self.tau_z),
            ("tau_sigma", self.tau_sigma),
            ("tau_c", self.tau_c),
            ("tau_zeta", self.tau_zeta),
        ]
    }

    /// Sum of the six channels.
    pub fn total(&self) -> f64 {
        self.channels().iter().map(|(_, v)| v).sum()
    }

    fn violations(&self, out: &mut Vec<String>) {
        if !(self.tau_bar >= 0.0) {
            out.push(format!("delays.tau_bar={} must be >= 0", self.tau_bar));
        }
        for (name, v) in self.channels() {
            if !(v >= 0.0) {
                out.push(format!("delays.{name}={v} must be >= 0"));
            } else if v > self.tau_bar {
                out.push(format!(
                    "delays.{name}={v} exceeds the declared bound tau_bar={}",
                    self.tau_bar
                ));
            }
        }
    }
}

/// Runtime decision authority, cumulative from L1 to L5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgencyLevel {
    L1,
    L2,
    L3,
    L4,
    L5,
}

/// A mechanism an agency level may grant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Adaptation,
    Memory,
    Switching,
    Reconfiguration,
    DesignDrift,
}

impl Mechanism {
    pub const ALL: [Mechanism; 5] = [
        Mechanism::Adaptation,
        Mechanism::Memory,
        Mechanism::Switching,
        Mechanism::Reconfiguration,
        Mechanism::DesignDrift,
    ];

    /// The lowest level granting this mechanism.
    pub fn introduced_at(self) -> AgencyLevel {
        match self {
            Mechanism::Adaptation | Mechanism::Memory => AgencyLevel::L2,
            Mechanism::Switching => AgencyLevel::L3,
            Mechanism::Reconfiguration => AgencyLevel::L4,
            Mechanism::DesignDrift => AgencyLevel::L5,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Adaptation => "adaptation",
            Mechanism::Memory => "memory",
            Mechanism::Switching => "switching",
            Mechanism::Reconfiguration => "reconfiguration",
            Mechanism::DesignDrift => "design drift",
        })
    }
}

impl AgencyLevel {
    pub const ALL: [AgencyLevel; 5] = [
        AgencyLevel::L1,
        AgencyLevel::L2,
        AgencyLevel::L3,
        AgencyLevel::L4,
        AgencyLevel::L5,
    ];

    pub fn permits(self, mechanism: Mechanism) -> bool {
        self >= mechanism.introduced_at()
    }

    pub fn description(self) -> &'static str {
        match self {
            AgencyLevel::L1 => "fixed policy execution",
            AgencyLevel::L2 => "internal adaptation and memory",
            AgencyLevel::L3 => "tool selection and strategy switching",
            AgencyLevel::L4 => "dynamic workflow and tool orchestration",
            AgencyLevel::L5 => "goal re-planning and generative design",
        }
    }
}

impl fmt::Display for AgencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Result of [`validate_scenario`]; empty means runnable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(crate::Error::InvalidScenario(self.violations))
        }
    }
}

/// Mechanisms a scenario actually asserts.
pub fn mechanisms_in_use(cfg: &ScenarioConfig) -> Vec<Mechanism> {
    let mut used = Vec::new();
    if cfg.adaptation.active() {
        used.push(Mechanism::Adaptation);
    }
    if cfg.memory.dim > 0 {
        used.push(Mechanism::Memory);
    }
    if cfg.policy.is_some() {
        used.push(Mechanism::Switching);
    }
    if cfg.reconfiguration.is_some() {
        used.push(Mechanism::Reconfiguration);
    }
    if cfg.goal.eta_d > 0.0 {
        used.push(Mechanism::DesignDrift);
    }
    used
}

/// Collects every structural problem with a scenario. Never fails.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut v = Vec::new();
    let integ = &cfg.integrator;
    let n = integ.x0.len();

    if n == 0 {
        v.push("integrator.x0 must not be empty".to_string());
    }
    if !(integ.dt > 0.0) || !integ.dt.is_finite() {
        v.push(format!("integrator.dt={} must be > 0", integ.dt));
    }
    if !(integ.horizon > 0.0) || !integ.horizon.is_finite() {
        v.push(format!("integrator.horizon={} must be > 0", integ.horizon));
    }
    if integ.x0.iter().chain(&integ.theta0).any(|e| !e.is_finite()) {
        v.push("integrator initial state has non-finite entries".to_string());
    }
    if !(cfg.classifier.settle_tol > 0.0) || !(cfg.classifier.blowup_tol > cfg.classifier.settle_tol) {
        v.push("classifier tolerances must satisfy 0 < settle_tol < blowup_tol".to_string());
    }

    if cfg.configurations.is_empty() {
        v.push("at least one configuration is required".to_string());
    }
    let modes = cfg.configurations.first().map_or(0, |c| c.modes.len());
    for (ci, conf) in cfg.configurations.iter().enumerate() {
        if conf.modes.is_empty() {
            v.push(format!("configuration {} declares no modes", ci + 1));
        }
        if conf.modes.len() != modes {
            v.push(format!(
                "configuration {} declares {} modes, configuration 1 declares {modes}",
                ci + 1,
                conf.modes.len()
            ));
        }
        for mode in &conf.modes {
            mode.violations(&mut v);
            if mode.a.is_square() && mode.dim() != n && n > 0 {
                v.push(format!(
                    "dimension mismatch: mode {:?} is {}x{} but x0 has {n} entries",
                    mode.label,
                    mode.dim(),
                    mode.dim()
                ));
            }
        }
        for &idx in &conf.reset_on_entry {
            if idx == 0 || idx > n {
                v.push(format!(
                    "configuration {} resets component {idx}, outside 1..={n}",
                    ci + 1
                ));
            }
        }
    }
    let configurations = cfg.configurations.len();
    if integ.sigma0 == 0 || integ.sigma0 > modes.max(1) {
        v.push(format!("integrator.sigma0={} outside 1..={modes}", integ.sigma0));
    }
    if integ.c0 == 0 || integ.c0 > configurations.max(1) {
        v.push(format!("integrator.c0={} outside 1..={configurations}", integ.c0));
    }

    cfg.delays.violations(&mut v);

    let a = &cfg.adaptation;
    if !(a.rho >= 0.0) {
        v.push(format!("adaptation.rho={} must be >= 0", a.rho));
    }
    if !(a.kappa >= 0.0) {
        v.push(format!("adaptation.kappa={} must be >= 0", a.kappa));
    }
    if a.enabled && integ.theta0.is_empty() {
        v.push("adaptation enabled but integrator.theta0 is empty".to_string());
    }
    if a.coupling != 0.0 && integ.theta0.is_empty() {
        v.push("adaptation.coupling is nonzero but theta is empty".to_string());
    }
    if cfg.memory.dim > 0 && !(cfg.memory.decay > 0.0) {
        v.push(format!("memory.decay={} must be > 0", cfg.memory.decay));
    }
    if cfg.memory.dim > n {
        v.push(format!(
            "memory.dim={} exceeds plant dimension {n}",
            cfg.memory.dim
        ));
    }
    if !(cfg.goal.eta_d >= 0.0) {
        v.push(format!("goal.eta_d={} must be >= 0", cfg.goal.eta_d));
    }
    if cfg.goal.eta_d > 0.0 && cfg.goal.zeta0.is_empty() {
        v.push("goal.eta_d > 0 requires a nonempty goal.zeta0".to_string());
    }

    if let Some(policy) = &cfg.policy {
        for msg in policy.violations() {
            v.push(format!("policy: {msg}"));
        }
        if modes != 2 {
            v.push(format!("switching policies target modes {{1, 2}}, scenario has {modes}"));
        }
        let channel = policy.score_channel();
        if channel == 0 || channel > n {
            v.push(format!("policy.score_channel={channel} outside 1..={n}"));
        }
        if policy.decision_delay() > cfg.delays.tau_bar {
            v.push(format!(
                "policy decision delay {} exceeds tau_bar={}",
                policy.decision_delay(),
                cfg.delays.tau_bar
            ));
        }
    }
    if let Some(r) = &cfg.reconfiguration {
        if let Some(msg) = r.violation() {
            v.push(format!("reconfiguration: {msg}"));
        }
        if configurations < 2 {
            v.push("reconfiguration requires at least two configurations".to_string());
        }
    }

    for mech in mechanisms_in_use(cfg) {
        if !cfg.agency_level.permits(mech) {
            v.push(format!("{mech} forbidden at {}", cfg.agency_level));
        }
    }

    ValidationReport { violations: v }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// (De)serializes a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix: rows have different lengths".to_string());
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

pub(crate) mod matrix_rows_opt {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    use super::matrix_rows::{from_rows, to_rows};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| from_rows(&r).map_err(D::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> AugmentedState {
        AugmentedState {
            t: 0.0,
            x: vec![1.0, 0.0],
            m: vec![],
            theta: vec![0.0],
            sigma: 2,
            c: 1,
            zeta: vec![],
        }
    }

    #[test]
    fn projection_copies_design_fields() {
        let s = state();
        let d = project_design_state(&s);
        assert_eq!(d.zeta, Vec::<f64>::new());
        assert_eq!(d.sigma, 2);
        assert_eq!(d.c, 1);

        let mut s2 = s.clone();
        s2.sigma = 1;
        s2.zeta = vec![0.1, f64::MIN_POSITIVE];
        let d2 = project_design_state(&s2);
        assert_eq!(d2.sigma, 1);
        assert_eq!(d2.zeta[1].to_bits(), f64::MIN_POSITIVE.to_bits());
    }

    #[test]
    fn gating_is_cumulative() {
        use AgencyLevel::*;
        use Mechanism::*;
        assert!(!L1.permits(Adaptation));
        assert!(L2.permits(Adaptation) && L2.permits(Memory) && !L2.permits(Switching));
        assert!(L3.permits(Switching) && !L3.permits(Reconfiguration));
        assert!(L4.permits(Reconfiguration) && !L4.permits(DesignDrift));
        for m in Mechanism::ALL {
            assert!(L5.permits(m));
        }
    }

    #[test]
    fn delay_budget_rejects_channel_above_bound() {
        let d = DelayBudget {
            tau_u: 0.1,
            tau_bar: 0.05,
            ..Default::default()
        };
        let mut v = Vec::new();
        d.violations(&mut v);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("tau_u"));
    }

    #[test]
    fn state_invariants() {
        let mut s = state();
        assert!(s.violations(2, 1).is_empty());
        s.sigma = 3;
        s.x[0] = f64::NAN;
        assert_eq!(s.violations(2, 1).len(), 2);
    }
}
