//! Scenario configuration.
//!
//! A scenario is one TOML document. Units: times and delays in seconds,
//! rates (`rho`, `eta_d`, `gamma`) in 1/s, `beta` in 1/s², everything else
//! dimensionless. Floats are written in shortest round-trip form, so
//! parse → serialize → parse is lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{AdaptationLaw, AgencyLevel, DelayBudget, GoalSpec, MemoryLaw, ModeDynamics};
use crate::policy::SwitchingPolicy;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub agency_level: AgencyLevel,
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub classifier: ClassifierTolerances,
    #[serde(default)]
    pub delays: DelayBudget,
    #[serde(default)]
    pub adaptation: AdaptationLaw,
    #[serde(default)]
    pub memory: MemoryLaw,
    #[serde(default)]
    pub goal: GoalSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<SwitchingPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconfiguration: Option<ReconfigPolicy>,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Flow tables: `configurations[c-1].modes[σ-1]`.
    pub configurations: Vec<Configuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    /// Step size (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Simulated time span (s).
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
    #[serde(default = "default_theta0")]
    pub theta0: Vec<f64>,
    #[serde(default = "one_index")]
    pub sigma0: usize,
    #[serde(default = "one_index")]
    pub c0: usize,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    30.0
}
fn default_x0() -> Vec<f64> {
    vec![1.0, -1.0]
}
fn default_theta0() -> Vec<f64> {
    vec![0.0]
}
fn one_index() -> usize {
    1
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            x0: default_x0(),
            theta0: default_theta0(),
            sigma0: 1,
            c0: 1,
        }
    }
}

/// Thresholds on `‖x‖` used by the outcome classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierTolerances {
    #[serde(default = "default_settle")]
    pub settle_tol: f64,
    #[serde(default = "default_blowup")]
    pub blowup_tol: f64,
}

fn default_settle() -> f64 {
    1e-2
}
fn default_blowup() -> f64 {
    1e6
}

impl Default for ClassifierTolerances {
    fn default() -> Self {
        Self {
            settle_tol: default_settle(),
            blowup_tol: default_blowup(),
        }
    }
}

/// One control architecture: a flow per mode plus the components of `x`
/// it owns privately (zeroed whenever the architecture is entered).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Configuration {
    #[serde(default)]
    pub label: String,
    /// 1-based components of `x` reset to zero on entry. Empty means the
    /// whole state carries over.
    #[serde(default)]
    pub reset_on_entry: Vec<usize>,
    pub modes: Vec<ModeDynamics>,
}

impl Configuration {
    pub fn single(label: impl Into<String>, modes: Vec<ModeDynamics>) -> Self {
        Self {
            label: label.into(),
            reset_on_entry: Vec::new(),
            modes,
        }
    }
}

/// When the architecture changes. Configurations are cycled `1 → 2 → … → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReconfigPolicy {
    /// Jump every `period` seconds; an infinite period never jumps.
    Periodic { period: f64 },
}

impl ReconfigPolicy {
    pub fn period(&self) -> f64 {
        match self {
            ReconfigPolicy::Periodic { period } => *period,
        }
    }

    /// Period in whole steps, `None` when it never fires.
    pub fn period_steps(&self, dt: f64) -> Option<usize> {
        let p = self.period();
        if !p.is_finite() {
            return None;
        }
        Some(((p / dt).round() as usize).max(1))
    }

    pub(crate) fn violation(&self) -> Option<String> {
        let p = self.period();
        (!(p > 0.0)).then(|| format!("period={p} must be > 0"))
    }
}

/// Declared budget constants. A `None` field is derived from the scenario
/// where possible (see `budget::resolve_constants`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Jump growth factor for mode switches (or all jumps when merged).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_a_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_a_c: Option<f64>,
    /// Analytic bound on the decision-score rate, for hysteresis dwell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_upper: Option<f64>,
    /// One jump term `ln ν/τ_a` covering switches and reconfigurations.
    #[serde(default = "yes")]
    pub merged_jumps: bool,
}

fn yes() -> bool {
    true
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            gamma: None,
            nu_sigma: None,
            nu_c: None,
            l_theta: None,
            l_d: None,
            beta: None,
            rho: None,
            tau_bar: None,
            tau_a_sigma: None,
            tau_a_c: None,
            m_upper: None,
            merged_jumps: true,
        }
    }
}

/// Axes of a dwell-time × delay sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub tau_a_values: Vec<f64>,
    pub tau_bar_values: Vec<f64>,
}

impl Default for SweepSpec {
    /// `τ_a ∈ {0.2, 0.4, …, 4.0}`, `τ̄ ∈ {0, 0.025, …, 0.25}`.
    fn default() -> Self {
        Self {
            tau_a_values: (1..=20).map(|i| (2 * i) as f64 / 10.0).collect(),
            tau_bar_values: (0..=10).map(|j| j as f64 / 40.0).collect(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Number of modes per configuration.
    pub fn mode_count(&self) -> usize {
        self.configurations.first().map_or(0, |c| c.modes.len())
    }

    /// Every flow matrix of the scenario, in configuration-major order.
    pub fn all_modes(&self) -> impl Iterator<Item = &ModeDynamics> {
        self.configurations.iter().flat_map(|c| c.modes.iter())
    }

    /// Sweep axes, falling back to the default grid.
    pub fn sweep_spec(&self) -> SweepSpec {
        self.sweep.clone().unwrap_or_default()
    }
}
