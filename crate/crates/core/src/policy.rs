//! Endogenous decision rules: mode switching, adaptation, design drift,
//! and the switch-count statistics used to compare runs against dwell-time
//! conditions.

use serde::{Deserialize, Serialize};

use crate::engine::{EventKind, Trajectory};
use crate::{Error, Result};

/// Hysteresis band `h`, constant or piecewise constant in `‖x‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Band {
    Constant(f64),
    /// `values[i]` applies while `breaks[i-1] <= ‖x‖ < breaks[i]`.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl Band {
    pub fn at(&self, state_norm: f64) -> f64 {
        match self {
            Band::Constant(h) => *h,
            Band::Piecewise { breaks, values } => {
                let idx = breaks.partition_point(|b| *b <= state_norm);
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// Infimum of the band over the state space.
    pub fn lower(&self) -> f64 {
        match self {
            Band::Constant(h) => *h,
            Band::Piecewise { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn violation(&self) -> Option<String> {
        match self {
            Band::Constant(h) if !(*h > 0.0) => Some(format!("hysteresis band {h} must be > 0")),
            Band::Constant(_) => None,
            Band::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    Some("piecewise band needs exactly one more value than breaks".into())
                } else if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    Some("piecewise band breaks must be strictly increasing".into())
                } else if values.iter().any(|h| !(*h > 0.0)) {
                    Some("piecewise band values must all be > 0".into())
                } else {
                    None
                }
            }
        }
    }
}

/// Mode-selection rule over the score `η = x[score_channel]` read at
/// `t − decision_delay`. Targets modes 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchingPolicy {
    /// Mode 1 when `η ≥ 0`, else mode 2.
    ThresholdSign {
        #[serde(default = "first_channel")]
        score_channel: usize,
        #[serde(default)]
        decision_delay: f64,
    },
    /// Mode 1 when `η ≥ h`, mode 2 when `η ≤ −h`, otherwise hold.
    Hysteresis {
        #[serde(default = "first_channel")]
        score_channel: usize,
        #[serde(default)]
        decision_delay: f64,
        band: Band,
    },
    /// Holds the current mode until `tau_a` seconds have passed since the
    /// last switch, then defers to `inner`.
    DwellConstrained {
        tau_a: f64,
        inner: Box<SwitchingPolicy>,
    },
}

fn first_channel() -> usize {
    1
}

impl SwitchingPolicy {
    pub fn threshold_sign() -> Self {
        SwitchingPolicy::ThresholdSign {
            score_channel: 1,
            decision_delay: 0.0,
        }
    }

    pub fn hysteresis(h: f64) -> Self {
        SwitchingPolicy::Hysteresis {
            score_channel: 1,
            decision_delay: 0.0,
            band: Band::Constant(h),
        }
    }

    pub fn dwell(tau_a: f64, inner: SwitchingPolicy) -> Self {
        SwitchingPolicy::DwellConstrained {
            tau_a,
            inner: Box::new(inner),
        }
    }

    /// 1-based index into `x`.
    pub fn score_channel(&self) -> usize {
        match self {
            SwitchingPolicy::ThresholdSign { score_channel, .. }
            | SwitchingPolicy::Hysteresis { score_channel, .. } => *score_channel,
            SwitchingPolicy::DwellConstrained { inner, .. } => inner.score_channel(),
        }
    }

    pub fn decision_delay(&self) -> f64 {
        match self {
            SwitchingPolicy::ThresholdSign { decision_delay, .. }
            | SwitchingPolicy::Hysteresis { decision_delay, .. } => *decision_delay,
            SwitchingPolicy::DwellConstrained { inner, .. } => inner.decision_delay(),
        }
    }

    /// Enforced dwell time, if any.
    pub fn dwell_time(&self) -> Option<f64> {
        match self {
            SwitchingPolicy::DwellConstrained { tau_a, .. } => Some(*tau_a),
            _ => None,
        }
    }

    pub fn band(&self) -> Option<&Band> {
        match self {
            SwitchingPolicy::Hysteresis { band, .. } => Some(band),
            SwitchingPolicy::DwellConstrained { inner, .. } => inner.band(),
            SwitchingPolicy::ThresholdSign { .. } => None,
        }
    }

    /// Replaces the dwell time of a dwell-constrained policy.
    pub fn set_dwell_time(&mut self, value: f64) -> bool {
        match self {
            SwitchingPolicy::DwellConstrained { tau_a, .. } => {
                *tau_a = value;
                true
            }
            _ => false,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            SwitchingPolicy::ThresholdSign { decision_delay, .. } => {
                if !(*decision_delay >= 0.0) {
                    out.push(format!("decision_delay={decision_delay} must be >= 0"));
                }
            }
            SwitchingPolicy::Hysteresis {
                decision_delay,
                band,
                ..
            } => {
                if !(*decision_delay >= 0.0) {
                    out.push(format!("decision_delay={decision_delay} must be >= 0"));
                }
                out.extend(band.violation());
            }
            SwitchingPolicy::DwellConstrained { tau_a, inner } => {
                if !(*tau_a >= 0.0) {
                    out.push(format!("tau_a={tau_a} must be >= 0"));
                }
                if matches!(**inner, SwitchingPolicy::DwellConstrained { .. }) {
                    out.push("dwell-constrained policy cannot nest another".into());
                }
                out.extend(inner.violations());
            }
        }
        out
    }
}

/// Chooses the mode for the next flow interval.
///
/// `state_norm` only matters for a piecewise hysteresis band.
pub fn decide_mode(
    policy: &SwitchingPolicy,
    score: f64,
    state_norm: f64,
    current_mode: usize,
    t: f64,
    last_switch: f64,
) -> usize {
    match policy {
        SwitchingPolicy::ThresholdSign { .. } => {
            if score >= 0.0 {
                1
            } else {
                2
            }
        }
        SwitchingPolicy::Hysteresis { band, .. } => {
            let h = band.at(state_norm);
            if score >= h {
                1
            } else if score <= -h {
                2
            } else {
                current_mode
            }
        }
        SwitchingPolicy::DwellConstrained { tau_a, inner } => {
            if t - last_switch < *tau_a {
                current_mode
            } else {
                decide_mode(inner, score, state_norm, current_mode, t, last_switch)
            }
        }
    }
}

/// `θ* = κ·tanh(‖x‖₂)`.
pub fn adaptation_target(x: &[f64], kappa: f64) -> f64 {
    kappa * crate::model::euclidean_norm(x).tanh()
}

/// Bounded goal drift `ζ̇ = η_d·sin(t)·u` with `u` the normalized all-ones
/// direction, so `‖ζ̇‖ ≤ η_d`.
pub fn design_drift(d: &[f64], eta_d: f64, t: f64) -> Vec<f64> {
    if d.is_empty() || eta_d == 0.0 {
        return vec![0.0; d.len()];
    }
    let scale = eta_d * t.sin() / (d.len() as f64).sqrt();
    vec![scale; d.len()]
}

/// `τ_h = 2·h̲ / M̄`, the dwell time a hysteresis band guarantees.
pub fn hysteresis_dwell_bound(h_lower: f64, m_upper: f64) -> Result<f64> {
    if !(h_lower > 0.0) || !(m_upper > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hysteresis bound needs h_lower > 0 and m_upper > 0, got {h_lower} and {m_upper}"
        )));
    }
    Ok(2.0 * h_lower / m_upper)
}

/// Whether a hysteresis band meets the dwell requirement `ln ν / (γ − L_θρ)`.
pub fn hysteresis_meets_dwell(
    h_lower: f64,
    m_upper: f64,
    gamma: f64,
    l_theta: f64,
    rho: f64,
    nu: f64,
) -> Result<bool> {
    let tau_h = hysteresis_dwell_bound(h_lower, m_upper)?;
    let check = crate::budget::check_theorem1(gamma, l_theta, rho, nu, tau_h);
    Ok(check.satisfied)
}

/// Switch-count statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchStats {
    pub switch_times: Vec<f64>,
    /// `+∞` when fewer than two switches occurred.
    pub min_gap: f64,
    /// Mean spacing between consecutive switches, `+∞` with fewer than two.
    pub mean_gap: f64,
    pub horizon: f64,
}

impl SwitchStats {
    pub fn from_times(switch_times: Vec<f64>, horizon: f64) -> Self {
        let gaps: Vec<f64> = switch_times.windows(2).map(|w| w[1] - w[0]).collect();
        let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let mean_gap = if gaps.is_empty() {
            f64::INFINITY
        } else {
            (switch_times[switch_times.len() - 1] - switch_times[0]) / gaps.len() as f64
        };
        Self {
            switch_times,
            min_gap,
            mean_gap,
            horizon,
        }
    }

    pub fn count(&self) -> usize {
        self.switch_times.len()
    }

    /// `N_σ(t, t+T)`: switches in `[t, t + T)`.
    pub fn n_sigma(&self, t: f64, window: f64) -> usize {
        let lo = self.switch_times.partition_point(|s| *s < t);
        let hi = self.switch_times.partition_point(|s| *s < t + window);
        hi - lo
    }

    /// Smallest `N₀` with `N_σ(t, t+T) ≤ N₀ + T/τ_a` for every window of
    /// the run.
    pub fn chatter_bound(&self, tau_a: f64) -> f64 {
        // The tightest window for switches i..=j spans exactly [t_i, t_j],
        // giving (j - i + 1) - (t_j - t_i)/tau_a; maximize in one pass.
        let mut best = 0.0_f64;
        let mut min_prefix = f64::INFINITY;
        for (j, &tj) in self.switch_times.iter().enumerate() {
            let key = j as f64 - tj / tau_a;
            min_prefix = min_prefix.min(key);
            best = best.max(key - min_prefix + 1.0);
        }
        best
    }
}

/// Extracts σ-switch statistics from a trajectory.
pub fn switch_statistics(traj: &Trajectory) -> SwitchStats {
    let times = traj
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Switch)
        .map(|e| e.t)
        .collect();
    SwitchStats::from_times(times, traj.horizon())
}

/// Largest observed `|Δη|/dt` between consecutive decision samples.
pub fn empirical_score_rate(scores: &[f64], dt: f64) -> f64 {
    scores
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / dt)
        .fold(0.0, f64::max)
}
