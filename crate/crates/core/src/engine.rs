//! Fixed-step hybrid integrator.
//!
//! Flows are advanced with classical RK4. The delayed term `x(t − τ̄)` is
//! read from a [`HistoryBuffer`] at every internal stage time (method of
//! steps with linear interpolation). Mode switches and reconfigurations
//! are decided at step boundaries only, so every event time is a multiple
//! of `dt`.

use std::collections::VecDeque;
use std::fmt;

use crate::config::ScenarioConfig;
use crate::model::{
    euclidean_norm, validate_scenario, AdaptationLaw, AugmentedState, MemoryLaw, ModeDynamics,
};
use crate::policy::{adaptation_target, decide_mode, design_drift};
use crate::{Error, Result};

/// Time-indexed samples of `x` for delayed reads.
///
/// Queries before the first sample return the initial history, which is
/// constant at `x(0)`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    samples: VecDeque<(f64, Vec<f64>)>,
    initial: Vec<f64>,
    window: f64,
}

impl HistoryBuffer {
    /// `window` is the span kept behind the newest sample; `None` keeps
    /// everything.
    pub fn new(initial: Vec<f64>, window: Option<f64>) -> Self {
        Self {
            samples: VecDeque::new(),
            initial,
            window: window.unwrap_or(f64::INFINITY),
        }
    }

    /// Appends a sample. Times must be strictly increasing; a sample at the
    /// newest time replaces it (post-jump value).
    pub fn push(&mut self, t: f64, x: Vec<f64>) -> Result<()> {
        if let Some((newest, last)) = self.samples.back_mut() {
            if t == *newest {
                *last = x;
                return Ok(());
            }
            if !(t > *newest) {
                return Err(Error::InvalidArgument(format!(
                    "history sample at t={t} is not after t={newest}"
                )));
            }
        }
        self.samples.push_back((t, x));
        // keep one sample at or before t - window so reads at the window edge
        // can still interpolate
        while self.samples.len() > 2 && self.samples[1].0 <= t - self.window {
            self.samples.pop_front();
        }
        Ok(())
    }

    pub fn newest_time(&self) -> Option<f64> {
        self.samples.back().map(|(t, _)| *t)
    }

    pub fn oldest_time(&self) -> Option<f64> {
        self.samples.front().map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Writes `x(t_query)` into `out`.
    pub fn sample_into(&self, t_query: f64, out: &mut [f64]) -> Result<()> {
        let Some(&(newest, _)) = self.samples.back() else {
            out.copy_from_slice(&self.initial);
            return Ok(());
        };
        if t_query > newest {
            return Err(Error::FutureRead {
                query: t_query,
                newest,
            });
        }
        let first = self.samples[0].0;
        if t_query < first {
            out.copy_from_slice(&self.initial);
            return Ok(());
        }
        // first index with time > t_query; at least 1 here
        let hi = self.samples.partition_point(|(t, _)| *t <= t_query);
        let (t0, x0) = &self.samples[hi - 1];
        if *t0 == t_query || hi == self.samples.len() {
            out.copy_from_slice(x0);
            return Ok(());
        }
        let (t1, x1) = &self.samples[hi];
        let w = (t_query - t0) / (t1 - t0);
        for ((o, a), b) in out.iter_mut().zip(x0).zip(x1) {
            *o = a + w * (b - a);
        }
        Ok(())
    }
}

/// `x(t_query)` by linear interpolation between bracketing samples.
pub fn sample_delayed(h: &HistoryBuffer, t_query: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; h.initial.len()];
    h.sample_into(t_query, &mut out)?;
    Ok(out)
}

/// Everything the continuous flow needs besides the state itself.
#[derive(Debug, Clone, Copy)]
pub struct FlowModel<'a> {
    pub mode: &'a ModeDynamics,
    pub adaptation: AdaptationLaw,
    pub memory: MemoryLaw,
    pub eta_d: f64,
    /// Plant delay `τ̄`.
    pub tau_bar: f64,
    /// Delay on the adaptation target's state read.
    pub tau_theta: f64,
}

impl<'a> FlowModel<'a> {
    pub fn plant_only(mode: &'a ModeDynamics, tau_bar: f64) -> Self {
        Self {
            mode,
            adaptation: AdaptationLaw::default(),
            memory: MemoryLaw::default(),
            eta_d: 0.0,
            tau_bar,
            tau_theta: 0.0,
        }
    }
}

/// Flat layout of the continuous part `[x | θ | m | ζ]`.
struct Layout {
    n: usize,
    k: usize,
    nm: usize,
}

impl Layout {
    fn of(s: &AugmentedState) -> Self {
        Self {
            n: s.x.len(),
            k: s.theta.len(),
            nm: s.m.len(),
        }
    }

    fn pack(&self, s: &AugmentedState) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.n + self.k + self.nm + s.zeta.len());
        y.extend_from_slice(&s.x);
        y.extend_from_slice(&s.theta);
        y.extend_from_slice(&s.m);
        y.extend_from_slice(&s.zeta);
        y
    }

    fn unpack(&self, y: &[f64], template: &AugmentedState, t: f64) -> AugmentedState {
        let (x, rest) = y.split_at(self.n);
        let (theta, rest) = rest.split_at(self.k);
        let (m, zeta) = rest.split_at(self.nm);
        AugmentedState {
            t,
            x: x.to_vec(),
            m: m.to_vec(),
            theta: theta.to_vec(),
            sigma: template.sigma,
            c: template.c,
            zeta: zeta.to_vec(),
        }
    }
}

/// Reads `x(stage_t − delay)`. Reads past the newest sample (delay shorter
/// than the step) interpolate toward the current stage value.
fn delayed_read(
    history: &HistoryBuffer,
    delay: f64,
    stage_t: f64,
    stage_x: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if delay == 0.0 {
        out.copy_from_slice(stage_x);
        return Ok(());
    }
    let q = stage_t - delay;
    match history.newest_time() {
        Some(newest) if q > newest => {
            let mut base = vec![0.0; out.len()];
            history.sample_into(newest, &mut base)?;
            let w = (q - newest) / (stage_t - newest);
            for ((o, a), b) in out.iter_mut().zip(&base).zip(stage_x) {
                *o = a + w * (b - a);
            }
            Ok(())
        }
        _ => history.sample_into(q, out),
    }
}

fn derivative(
    model: &FlowModel<'_>,
    layout: &Layout,
    history: &HistoryBuffer,
    t: f64,
    y: &[f64],
    scratch: &mut [f64],
    dy: &mut [f64],
) -> Result<()> {
    let n = layout.n;
    let x = &y[..n];
    let theta = &y[n..n + layout.k];
    let m = &y[n + layout.k..n + layout.k + layout.nm];
    let zeta = &y[n + layout.k + layout.nm..];
    let a = &model.mode.a;

    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[(i, j)] * x[j];
        }
        dy[i] = acc;
    }
    if let Some(ad) = &model.mode.a_delay {
        delayed_read(history, model.tau_bar, t, x, scratch)?;
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += ad[(i, j)] * scratch[j];
            }
            dy[i] += acc;
        }
    }
    let law = &model.adaptation;
    if law.coupling != 0.0 {
        let g = law.coupling * theta[0];
        for i in 0..n {
            dy[i] += g * x[i];
        }
    }

    let dtheta = &mut dy[n..n + layout.k];
    if law.enabled {
        let target = if model.tau_theta > 0.0 {
            delayed_read(history, model.tau_theta, t, x, scratch)?;
            adaptation_target(scratch, law.kappa)
        } else {
            adaptation_target(x, law.kappa)
        };
        for (d, th) in dtheta.iter_mut().zip(theta) {
            *d = law.rho * (target - th);
        }
    } else {
        dtheta.fill(0.0);
    }

    let mem = &model.memory;
    let dm = &mut dy[n + layout.k..n + layout.k + layout.nm];
    for (i, d) in dm.iter_mut().enumerate() {
        *d = -mem.decay * m[i] + mem.gain * x[i];
    }

    let dz = &mut dy[n + layout.k + layout.nm..];
    dz.copy_from_slice(&design_drift(zeta, model.eta_d, t));
    Ok(())
}

/// One classical RK4 step of the coupled `(x, θ, m, ζ)` flow. `σ` and `c`
/// are carried over unchanged.
pub fn step_flow(
    s: &AugmentedState,
    model: &FlowModel<'_>,
    history: &HistoryBuffer,
    dt: f64,
) -> Result<AugmentedState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt={dt} must be > 0")));
    }
    let layout = Layout::of(s);
    if model.mode.dim() != layout.n {
        return Err(Error::DimensionMismatch(format!(
            "mode is {0}x{0}, state has {1} entries",
            model.mode.dim(),
            layout.n
        )));
    }
    let y = layout.pack(s);
    let len = y.len();
    let mut scratch = vec![0.0; layout.n];
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut k3 = vec![0.0; len];
    let mut k4 = vec![0.0; len];
    let mut stage = vec![0.0; len];
    let half = 0.5 * dt;

    derivative(model, &layout, history, s.t, &y, &mut scratch, &mut k1)?;
    for i in 0..len {
        stage[i] = y[i] + half * k1[i];
    }
    derivative(model, &layout, history, s.t + half, &stage, &mut scratch, &mut k2)?;
    for i in 0..len {
        stage[i] = y[i] + half * k2[i];
    }
    derivative(model, &layout, history, s.t + half, &stage, &mut scratch, &mut k3)?;
    for i in 0..len {
        stage[i] = y[i] + dt * k3[i];
    }
    derivative(model, &layout, history, s.t + dt, &stage, &mut scratch, &mut k4)?;

    let sixth = dt / 6.0;
    let next: Vec<f64> = (0..len)
        .map(|i| y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Blowup {
            t: s.t,
            last_finite: s.x.clone(),
        });
    }
    Ok(layout.unpack(&next, s, s.t + dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Switch,
    Reconfig,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Switch => "switch",
            EventKind::Reconfig => "reconfig",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub from: usize,
    pub to: usize,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunEnd {
    Completed,
    /// `‖x‖` exceeded the blowup tolerance; the run stopped there.
    Escaped { t: f64 },
    /// The integrator produced a non-finite value.
    NonFinite { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub planned_horizon: f64,
    /// State after the jumps at every step boundary.
    pub states: Vec<AugmentedState>,
    pub events: Vec<Event>,
    /// Decision score read at each boundary (empty without a switching
    /// policy).
    pub scores: Vec<f64>,
    pub end: RunEnd,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }

    pub fn final_norm(&self) -> f64 {
        self.states.last().map_or(f64::NAN, AugmentedState::norm_x)
    }

    pub fn max_norm(&self) -> f64 {
        self.states
            .iter()
            .map(AugmentedState::norm_x)
            .fold(0.0, f64::max)
    }

    pub fn is_truncated(&self) -> bool {
        self.end != RunEnd::Completed
    }
}

/// Integrates a scenario over its horizon.
///
/// At each step boundary the switching policy runs first, then the
/// reconfiguration schedule; the recorded state is the post-jump one.
/// Runs that leave the blowup ball stop early and are flagged.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Trajectory> {
    validate_scenario(cfg).into_result()?;
    let integ = &cfg.integrator;
    let dt = integ.dt;
    let steps = (integ.horizon / dt).round() as usize;
    let n = integ.x0.len();

    let decision_delay = cfg.policy.as_ref().map_or(0.0, |p| p.decision_delay());
    let window = cfg
        .delays
        .tau_bar
        .max(decision_delay)
        .max(cfg.delays.tau_theta)
        + 2.0 * dt;
    let mut history = HistoryBuffer::new(integ.x0.clone(), Some(window));

    let mut state = AugmentedState {
        t: 0.0,
        x: integ.x0.clone(),
        m: vec![0.0; cfg.memory.dim],
        theta: integ.theta0.clone(),
        sigma: integ.sigma0,
        c: integ.c0,
        zeta: cfg.goal.zeta0.clone(),
    };

    let reconfig_steps = cfg.reconfiguration.as_ref().and_then(|r| r.period_steps(dt));
    let configurations = cfg.configurations.len();
    let channel = cfg.policy.as_ref().map_or(0, |p| p.score_channel() - 1);

    let mut states = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let mut scores = Vec::new();
    let mut last_switch = f64::NEG_INFINITY;
    let mut score_buf = vec![0.0; n];
    let mut end = RunEnd::Completed;

    for k in 0..=steps {
        let t = k as f64 * dt;
        state.t = t;
        history.push(t, state.x.clone())?;

        if k < steps {
            if let Some(policy) = &cfg.policy {
                history.sample_into(t - decision_delay, &mut score_buf)?;
                let score = score_buf[channel];
                scores.push(score);
                let next = decide_mode(policy, score, state.norm_x(), state.sigma, t, last_switch);
                if next != state.sigma {
                    events.push(Event {
                        t,
                        kind: EventKind::Switch,
                        from: state.sigma,
                        to: next,
                    });
                    state.sigma = next;
                    last_switch = t;
                }
            }
            if let Some(period) = reconfig_steps {
                if k > 0 && k % period == 0 {
                    let next = state.c % configurations + 1;
                    events.push(Event {
                        t,
                        kind: EventKind::Reconfig,
                        from: state.c,
                        to: next,
                    });
                    state.c = next;
                    for &idx in &cfg.configurations[next - 1].reset_on_entry {
                        state.x[idx - 1] = 0.0;
                    }
                    history.push(t, state.x.clone())?;
                }
            }
        }

        let norm = state.norm_x();
        states.push(state.clone());
        if norm > cfg.classifier.blowup_tol {
            end = RunEnd::Escaped { t };
            break;
        }
        if k == steps {
            break;
        }

        let mode = &cfg.configurations[state.c - 1].modes[state.sigma - 1];
        let model = FlowModel {
            mode,
            adaptation: cfg.adaptation,
            memory: cfg.memory,
            eta_d: cfg.goal.eta_d,
            tau_bar: cfg.delays.tau_bar,
            tau_theta: cfg.delays.tau_theta,
        };
        match step_flow(&state, &model, &history, dt) {
            Ok(next) => state = next,
            Err(Error::Blowup { t, .. }) => {
                end = RunEnd::NonFinite { t };
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(Trajectory {
        dt,
        planned_horizon: steps as f64 * dt,
        states,
        events,
        scores,
        end,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for StabilityVerdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Stable" => Ok(Self::Stable),
            "Unstable" => Ok(Self::Unstable),
            "Inconclusive" => Ok(Self::Inconclusive),
            other => Err(Error::InvalidArgument(format!("unknown verdict {other:?}"))),
        }
    }
}

/// Unstable if `‖x‖` ever exceeded `blowup_tol` (or the run hit a
/// non-finite value); Stable if `‖x(T)‖ ≤ settle_tol`; otherwise
/// Inconclusive.
pub fn classify_outcome(traj: &Trajectory, settle_tol: f64, blowup_tol: f64) -> StabilityVerdict {
    if matches!(traj.end, RunEnd::NonFinite { .. })
        || traj.states.iter().any(|s| !(euclidean_norm(&s.x) <= blowup_tol))
    {
        return StabilityVerdict::Unstable;
    }
    if traj.final_norm() <= settle_tol {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, DMatrix};

    fn scalar(a: f64) -> ModeDynamics {
        ModeDynamics::new("scalar", DMatrix::from_element(1, 1, a))
    }

    fn state(x: Vec<f64>) -> AugmentedState {
        AugmentedState {
            t: 0.0,
            x,
            m: vec![],
            theta: vec![],
            sigma: 1,
            c: 1,
            zeta: vec![],
        }
    }

    #[test]
    fn history_interpolates() {
        let mut h = HistoryBuffer::new(vec![1.0, -1.0], None);
        h.push(0.0, vec![0.0, 0.0]).unwrap();
        h.push(1.0, vec![2.0, 2.0]).unwrap();
        assert_eq!(sample_delayed(&h, 0.5).unwrap(), vec![1.0, 1.0]);
        assert_eq!(sample_delayed(&h, 1.0).unwrap(), vec![2.0, 2.0]);
        assert_eq!(sample_delayed(&h, -0.3).unwrap(), vec![1.0, -1.0]);
        assert!(matches!(
            sample_delayed(&h, 1.2),
            Err(Error::FutureRead { .. })
        ));
        assert!(h.push(0.5, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn history_window_prunes_but_covers_span() {
        let mut h = HistoryBuffer::new(vec![0.0], Some(0.25));
        for k in 0..=1000 {
            let t = k as f64 * 1e-3;
            h.push(t, vec![t]).unwrap();
        }
        assert!(h.len() < 300);
        assert!(h.oldest_time().unwrap() <= 1.0 - 0.25);
        let v = sample_delayed(&h, 0.8).unwrap()[0];
        assert!((v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rk4_matches_exponential_on_one_step() {
        let mode = scalar(-1.0);
        let h = HistoryBuffer::new(vec![1.0], None);
        let out = step_flow(&state(vec![1.0]), &FlowModel::plant_only(&mode, 0.0), &h, 0.1).unwrap();
        assert!((out.x[0] - (-0.1f64).exp()).abs() < 1e-7);
        assert!((out.x[0] - 0.904_837_4).abs() < 1e-7);
        assert_eq!(out.t, 0.1);
    }

    #[test]
    fn equilibrium_stays_put() {
        let mode = ModeDynamics::new("a1", dmatrix![-3.8897, -3.2679; 1.5381, 0.7197])
            .with_delay(dmatrix![0.0, 0.0; 0.8, 0.2]);
        let mut s = state(vec![0.0, 0.0]);
        s.theta = vec![0.0];
        let model = FlowModel {
            adaptation: AdaptationLaw {
                enabled: true,
                rho: 1.0,
                kappa: 0.3,
                coupling: 0.5,
            },
            ..FlowModel::plant_only(&mode, 0.1)
        };
        let mut h = HistoryBuffer::new(vec![0.0, 0.0], None);
        h.push(0.0, vec![0.0, 0.0]).unwrap();
        let out = step_flow(&s, &model, &h, 1e-3).unwrap();
        assert_eq!(out.x, vec![0.0, 0.0]);
        assert_eq!(out.theta, vec![0.0]);
    }

    #[test]
    fn blowup_is_reported_with_last_finite_state() {
        let mode = scalar(f64::MAX);
        let h = HistoryBuffer::new(vec![1.0], None);
        let err = step_flow(&state(vec![1e300]), &FlowModel::plant_only(&mode, 0.0), &h, 1.0)
            .unwrap_err();
        match err {
            Error::Blowup { last_finite, .. } => assert_eq!(last_finite, vec![1e300]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_delay_reads_between_sample_and_stage() {
        // delay shorter than the step: stage reads never hit the future
        let mode = ModeDynamics::new("d", DMatrix::zeros(1, 1)).with_delay(DMatrix::from_element(1, 1, -1.0));
        let mut h = HistoryBuffer::new(vec![1.0], None);
        h.push(0.0, vec![1.0]).unwrap();
        let out = step_flow(&state(vec![1.0]), &FlowModel::plant_only(&mode, 0.0004), &h, 1e-3).unwrap();
        assert!((out.x[0] - (-1e-3f64).exp()).abs() < 1e-6);
    }

    fn traj_with_norms(norms: &[f64], end: RunEnd) -> Trajectory {
        Trajectory {
            dt: 1.0,
            planned_horizon: norms.len() as f64,
            states: norms
                .iter()
                .enumerate()
                .map(|(k, v)| AugmentedState {
                    t: k as f64,
                    ..state(vec![*v])
                })
                .collect(),
            events: vec![],
            scores: vec![],
            end,
        }
    }

    #[test]
    fn classifier_categories() {
        let esc = traj_with_norms(&[1.0, 10.0, 2e6], RunEnd::Escaped { t: 2.0 });
        assert_eq!(classify_outcome(&esc, 1e-2, 1e6), StabilityVerdict::Unstable);
        let nonfinite = traj_with_norms(&[1.0, 10.0], RunEnd::NonFinite { t: 1.0 });
        assert_eq!(classify_outcome(&nonfinite, 1e-2, 1e6), StabilityVerdict::Unstable);
        let flat = traj_with_norms(&[1.0, 1.0, 1.0], RunEnd::Completed);
        assert_eq!(classify_outcome(&flat, 1e-2, 1e6), StabilityVerdict::Inconclusive);
        let settled = traj_with_norms(&[1.0, 0.1, 0.001], RunEnd::Completed);
        assert_eq!(classify_outcome(&settled, 1e-2, 1e6), StabilityVerdict::Stable);
    }
}
