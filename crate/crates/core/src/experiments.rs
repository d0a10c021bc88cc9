//! Preset scenarios and sweep orchestration.

use nalgebra::{dmatrix, DMatrix};
use rayon::prelude::*;

use crate::budget::{budget_timeseries, effective_margin, resolve_constants, BudgetReport, BudgetSample};
use crate::config::{BudgetSpec, ClassifierTolerances, Configuration, IntegratorSettings, ReconfigPolicy, ScenarioConfig, SweepSpec};
use crate::engine::{classify_outcome, simulate, StabilityVerdict, Trajectory};
use crate::lyapunov::decay_rate;
use crate::model::{validate_scenario, AdaptationLaw, AgencyLevel, DelayBudget, GoalSpec, MemoryLaw, ModeDynamics};
use crate::policy::{switch_statistics, SwitchStats, SwitchingPolicy};
use crate::{Error, Result};

/// Mode 1 of the benchmark loop.
pub fn benchmark_a1() -> DMatrix<f64> {
    dmatrix![-3.8897, -3.2679; 1.5381, 0.7197]
}

/// Mode 2 of the benchmark loop.
pub fn benchmark_a2() -> DMatrix<f64> {
    dmatrix![-3.1172, 0.4840; -5.4957, 0.4516]
}

/// Delayed coupling shared by both modes.
pub fn benchmark_ad() -> DMatrix<f64> {
    dmatrix![0.0, 0.0; 0.8, 0.2]
}

/// Both benchmark modes with the delayed term attached.
pub fn benchmark_modes() -> Vec<ModeDynamics> {
    vec![
        ModeDynamics::new("A1", benchmark_a1()).with_delay(benchmark_ad()),
        ModeDynamics::new("A2", benchmark_a2()).with_delay(benchmark_ad()),
    ]
}

fn benchmark_budget() -> BudgetSpec {
    BudgetSpec {
        gamma: Some(0.609),
        nu_sigma: Some(2.2),
        l_theta: Some(0.8),
        beta: Some(2.5),
        ..BudgetSpec::default()
    }
}

fn base_scenario(name: &str, level: AgencyLevel, configurations: Vec<Configuration>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        agency_level: level,
        integrator: IntegratorSettings::default(),
        classifier: ClassifierTolerances::default(),
        delays: DelayBudget::default(),
        adaptation: AdaptationLaw::default(),
        memory: MemoryLaw::default(),
        goal: GoalSpec::default(),
        policy: None,
        reconfiguration: None,
        budget: benchmark_budget(),
        sweep: None,
        configurations,
    }
}

fn delays(tau_bar: f64) -> DelayBudget {
    DelayBudget {
        tau_u: tau_bar,
        tau_bar,
        ..DelayBudget::default()
    }
}

/// Fixed policy, mode 1 only, no delay.
pub fn level1_baseline() -> ScenarioConfig {
    base_scenario(
        "level1_baseline",
        AgencyLevel::L1,
        vec![Configuration::single(
            "benchmark",
            vec![ModeDynamics::new("A1", benchmark_a1())],
        )],
    )
}

/// Base of the dwell × delay sweep: sign switching under a dwell
/// constraint, no adaptation.
pub fn fig1_sweep() -> ScenarioConfig {
    let mut cfg = base_scenario(
        "fig1_sweep",
        AgencyLevel::L3,
        vec![Configuration::single("benchmark", benchmark_modes())],
    );
    cfg.policy = Some(SwitchingPolicy::dwell(1.0, SwitchingPolicy::threshold_sign()));
    cfg.sweep = Some(SweepSpec::default());
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoupledCase {
    StableCase,
    UnstableCase,
}

impl CoupledCase {
    /// `(ρ, τ̄, τ_a)`.
    pub fn parameters(self) -> (f64, f64, f64) {
        match self {
            CoupledCase::StableCase => (0.15, 0.03, 4.0),
            CoupledCase::UnstableCase => (3.5, 0.20, 0.4),
        }
    }
}

/// Adaptation, delay and dwell-constrained switching together.
pub fn coupled_scenario(case: CoupledCase) -> ScenarioConfig {
    let (rho, tau_bar, tau_a) = case.parameters();
    let name = match case {
        CoupledCase::StableCase => "fig3_stable",
        CoupledCase::UnstableCase => "fig3_unstable",
    };
    let mut cfg = base_scenario(
        name,
        AgencyLevel::L3,
        vec![Configuration::single("benchmark", benchmark_modes())],
    );
    cfg.adaptation = AdaptationLaw {
        enabled: true,
        rho,
        ..AdaptationLaw::default()
    };
    cfg.delays = delays(tau_bar);
    cfg.policy = Some(SwitchingPolicy::dwell(tau_a, SwitchingPolicy::threshold_sign()));
    cfg
}

pub fn fig3_stable() -> ScenarioConfig {
    coupled_scenario(CoupledCase::StableCase)
}

pub fn fig3_unstable() -> ScenarioConfig {
    coupled_scenario(CoupledCase::UnstableCase)
}

/// Fast reconfiguration between the two shipped architectures.
pub fn fig2_reconfig() -> ScenarioConfig {
    ReconfigScenario::shipped()
        .expect("shipped architectures are Hurwitz")
        .scenario("fig2_reconfig", FAST_PERIOD)
}

/// Same as [`fig2_reconfig`] with infrequent jumps.
pub fn fig2_reconfig_slow() -> ScenarioConfig {
    ReconfigScenario::shipped()
        .expect("shipped architectures are Hurwitz")
        .scenario("fig2_reconfig_slow", SLOW_PERIOD)
}

pub const PRESET_NAMES: [&str; 6] = [
    "level1_baseline",
    "fig1_sweep",
    "fig2_reconfig",
    "fig2_reconfig_slow",
    "fig3_stable",
    "fig3_unstable",
];

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "level1_baseline" => level1_baseline(),
        "fig1_sweep" => fig1_sweep(),
        "fig2_reconfig" => fig2_reconfig(),
        "fig2_reconfig_slow" => fig2_reconfig_slow(),
        "fig3_stable" => fig3_stable(),
        "fig3_unstable" => fig3_unstable(),
        _ => return None,
    })
}

/// One cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub tau_bar: f64,
    pub tau_a: f64,
    pub verdict: StabilityVerdict,
    pub final_norm: f64,
}

/// Verdicts over `τ̄ × τ_a`, stored `τ̄`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub tau_a_values: Vec<f64>,
    pub tau_bar_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, bar_idx: usize, a_idx: usize) -> &SweepCell {
        &self.cells[bar_idx * self.tau_a_values.len() + a_idx]
    }

    /// Cells of one `τ̄` column, ordered by `τ_a`.
    pub fn column(&self, bar_idx: usize) -> &[SweepCell] {
        let n = self.tau_a_values.len();
        &self.cells[bar_idx * n..(bar_idx + 1) * n]
    }

    /// Looks a cell up by its coordinates.
    pub fn find(&self, tau_bar: f64, tau_a: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| (c.tau_bar - tau_bar).abs() < 1e-12 && (c.tau_a - tau_a).abs() < 1e-12)
    }

    /// Renders the grid as rows of `S`/`U`/`I`, one per `τ̄`.
    pub fn verdict_map(&self) -> Vec<String> {
        (0..self.tau_bar_values.len())
            .map(|j| {
                self.column(j)
                    .iter()
                    .map(|c| match c.verdict {
                        StabilityVerdict::Stable => 'S',
                        StabilityVerdict::Unstable => 'U',
                        StabilityVerdict::Inconclusive => 'I',
                    })
                    .collect()
            })
            .collect()
    }
}

/// The scenario run for one sweep cell: `base` with the given total delay
/// and dwell time. A policy without a dwell constraint gets one.
pub fn cell_config(base: &ScenarioConfig, tau_bar: f64, tau_a: f64) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.delays.tau_bar = tau_bar;
    cfg.delays.tau_u = tau_bar;
    for ch in [
        &mut cfg.delays.tau_theta,
        &mut cfg.delays.tau_z,
        &mut cfg.delays.tau_sigma,
        &mut cfg.delays.tau_c,
        &mut cfg.delays.tau_zeta,
    ] {
        *ch = ch.min(tau_bar);
    }
    let policy = cfg
        .policy
        .take()
        .unwrap_or_else(SwitchingPolicy::threshold_sign);
    cfg.policy = Some(match policy {
        mut p @ SwitchingPolicy::DwellConstrained { .. } => {
            p.set_dwell_time(tau_a);
            p
        }
        inner => SwitchingPolicy::dwell(tau_a, inner),
    });
    cfg
}

fn run_cell(base: &ScenarioConfig, tau_bar: f64, tau_a: f64) -> Result<SweepCell> {
    let cfg = cell_config(base, tau_bar, tau_a);
    let (verdict, final_norm) = match simulate(&cfg) {
        Ok(traj) => (
            classify_outcome(&traj, cfg.classifier.settle_tol, cfg.classifier.blowup_tol),
            traj.final_norm(),
        ),
        Err(Error::Blowup { .. }) => (StabilityVerdict::Unstable, f64::INFINITY),
        Err(e) => return Err(e),
    };
    Ok(SweepCell {
        tau_bar,
        tau_a,
        verdict,
        final_norm,
    })
}

/// Runs every cell of `spec` over `base`. `workers == 0` uses every core.
/// Results are assembled by cell index, so the grid does not depend on the
/// worker count.
pub fn delay_dwell_sweep(base: &ScenarioConfig, spec: &SweepSpec, workers: usize) -> Result<SweepGrid> {
    if spec.tau_a_values.is_empty() || spec.tau_bar_values.is_empty() {
        return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
    }
    let coords: Vec<(f64, f64)> = spec
        .tau_bar_values
        .iter()
        .flat_map(|&b| spec.tau_a_values.iter().map(move |&a| (b, a)))
        .collect();
    let mut problems = Vec::new();
    for &(b, a) in &coords {
        let report = validate_scenario(&cell_config(base, b, a));
        for v in report.violations {
            problems.push(format!("cell tau_bar={b} tau_a={a}: {v}"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::InvalidScenario(problems));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let cells = pool.install(|| {
        coords
            .par_iter()
            .map(|&(b, a)| run_cell(base, b, a))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepGrid {
        tau_a_values: spec.tau_a_values.clone(),
        tau_bar_values: spec.tau_bar_values.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub tau_bar: f64,
    /// Smallest `τ_a` from which the column is Stable all the way up.
    pub tau_a: Option<f64>,
}

pub fn empirical_boundary(grid: &SweepGrid) -> Vec<BoundaryPoint> {
    (0..grid.tau_bar_values.len())
        .map(|j| {
            let column = grid.column(j);
            let stable_tail = column
                .iter()
                .rev()
                .take_while(|c| c.verdict == StabilityVerdict::Stable)
                .count();
            BoundaryPoint {
                tau_bar: grid.tau_bar_values[j],
                tau_a: (stable_tail > 0).then(|| column[column.len() - stable_tail].tau_a),
            }
        })
        .collect()
}

/// Budget prediction per sweep cell, in cell order.
pub fn sweep_budgets(base: &ScenarioConfig, grid: &SweepGrid) -> Result<Vec<BudgetReport>> {
    grid.cells
        .iter()
        .map(|c| {
            let resolved = resolve_constants(&cell_config(base, c.tau_bar, c.tau_a))?;
            effective_margin(&resolved.constants)
        })
        .collect()
}

pub const FAST_PERIOD: f64 = 0.1;
pub const SLOW_PERIOD: f64 = 5.0;

/// Two realizations of one stabilizing controller, sharing the plant state.
///
/// The state is `(x₁, x₂, x̂₁, x̂₂)`. Architecture A feeds back `x`
/// directly and lets `x̂` decay; architecture B feeds back an observer
/// estimate `x̂`. The estimate is private to the observer and is zeroed on
/// every reconfiguration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigScenario {
    pub plant: ModeDynamics,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub gain: Vec<f64>,
    pub observer_gain: Vec<f64>,
    pub arch_a: ModeDynamics,
    pub arch_b: ModeDynamics,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

impl ReconfigScenario {
    /// Builds both closed loops from `ẋ = Ax + Bu`, `y = Cx`, `u = −Kx` and
    /// observer gain `L`. Fails unless both loops are Hurwitz.
    pub fn new(plant: DMatrix<f64>, b: &[f64], c: &[f64], k: &[f64], l: &[f64]) -> Result<Self> {
        let n = plant.nrows();
        if !plant.is_square() || [b.len(), c.len(), k.len(), l.len()].iter().any(|&len| len != n) {
            return Err(Error::DimensionMismatch(format!(
                "plant is {}x{}, B/C/K/L lengths {}/{}/{}/{}",
                plant.nrows(),
                plant.ncols(),
                b.len(),
                c.len(),
                k.len(),
                l.len()
            )));
        }
        let b = DMatrix::from_column_slice(n, 1, b);
        let c = DMatrix::from_row_slice(1, n, c);
        let k_row = DMatrix::from_row_slice(1, n, k);
        let l_col = DMatrix::from_column_slice(n, 1, l);
        let bk = &b * &k_row;
        let lc = &l_col * &c;

        let mut fa = DMatrix::zeros(2 * n, 2 * n);
        fa.view_mut((0, 0), (n, n)).copy_from(&(&plant - &bk));
        fa.view_mut((n, n), (n, n)).fill_diagonal(-1.0);

        let mut fb = DMatrix::zeros(2 * n, 2 * n);
        fb.view_mut((0, 0), (n, n)).copy_from(&plant);
        fb.view_mut((0, n), (n, n)).copy_from(&(-&bk));
        fb.view_mut((n, 0), (n, n)).copy_from(&lc);
        fb.view_mut((n, n), (n, n)).copy_from(&(&plant - &bk - &lc));

        for (name, m) in [("direct", &fa), ("observer", &fb)] {
            decay_rate(m).map_err(|e| {
                Error::InvalidArgument(format!("{name} architecture is not Hurwitz: {e}"))
            })?;
        }
        let mut x0 = vec![0.0; 2 * n];
        x0[0] = 1.0;
        if n > 1 {
            x0[1] = -1.0;
        }
        Ok(Self {
            plant: ModeDynamics::new("plant", plant),
            input: b.iter().copied().collect(),
            output: c.iter().copied().collect(),
            gain: k.to_vec(),
            observer_gain: l.to_vec(),
            arch_a: ModeDynamics::new("direct", fa),
            arch_b: ModeDynamics::new("observer", fb),
            x0,
            horizon: 30.0,
        })
    }

    /// Open-loop unstable `ẍ = x + u` with a weak direct gain `K = [1.5, 1]`
    /// and observer poles at `−1` (`L = [2, 2]`).
    pub fn shipped() -> Result<Self> {
        Self::new(
            dmatrix![0.0, 1.0; 1.0, 0.0],
            &[0.0, 1.0],
            &[1.0, 0.0],
            &[1.5, 1.0],
            &[2.0, 2.0],
        )
    }

    pub fn plant_dim(&self) -> usize {
        self.plant.dim()
    }

    /// A Level-4 scenario cycling A → B → A every `period` seconds.
    pub fn scenario(&self, name: &str, period: f64) -> ScenarioConfig {
        let n = self.plant_dim();
        let private: Vec<usize> = (n + 1..=2 * n).collect();
        let arch = |label: &str, mode: &ModeDynamics| Configuration {
            label: label.to_string(),
            reset_on_entry: private.clone(),
            modes: vec![mode.clone()],
        };
        let mut cfg = base_scenario(
            name,
            AgencyLevel::L4,
            vec![arch("direct", &self.arch_a), arch("observer", &self.arch_b)],
        );
        cfg.integrator.x0 = self.x0.clone();
        cfg.integrator.horizon = self.horizon;
        cfg.reconfiguration = Some(ReconfigPolicy::Periodic { period });
        cfg.budget = BudgetSpec {
            merged_jumps: false,
            ..BudgetSpec::default()
        };
        cfg
    }
}

/// `‖x(T)‖ / ‖x(0)‖`, infinite for runs that left the blowup ball.
pub fn growth_factor(traj: &Trajectory) -> f64 {
    if traj.is_truncated() {
        return f64::INFINITY;
    }
    let first = traj.states.first().map_or(f64::NAN, |s| s.norm_x());
    traj.final_norm() / first
}

/// Runs the scenario at two reconfiguration periods; returns
/// `(fast, slow)`.
pub fn level4_reconfig_run(
    s: &ReconfigScenario,
    fast_period: f64,
    slow_period: f64,
) -> Result<(Trajectory, Trajectory)> {
    let fast = simulate(&s.scenario("level4_fast", fast_period))?;
    let slow = simulate(&s.scenario("level4_slow", slow_period))?;
    Ok((fast, slow))
}

/// Trajectory plus everything the budget says about it.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub config: ScenarioConfig,
    pub trajectory: Trajectory,
    pub verdict: StabilityVerdict,
    pub report: BudgetReport,
    pub budget: Vec<BudgetSample>,
    pub switches: SwitchStats,
}

pub fn run_with_budget(config: ScenarioConfig) -> Result<CoupledRun> {
    let constants = resolve_constants(&config)?.constants;
    let report = effective_margin(&constants)?;
    let trajectory = simulate(&config)?;
    let verdict = classify_outcome(
        &trajectory,
        config.classifier.settle_tol,
        config.classifier.blowup_tol,
    );
    let budget = budget_timeseries(&trajectory, &constants)?;
    let switches = switch_statistics(&trajectory);
    Ok(CoupledRun {
        config,
        trajectory,
        verdict,
        report,
        budget,
        switches,
    })
}

pub fn fully_coupled_case(which: CoupledCase) -> Result<CoupledRun> {
    run_with_budget(coupled_scenario(which))
}
