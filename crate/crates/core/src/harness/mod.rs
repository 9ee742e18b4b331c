//! Experiment protocol: the day loop with decaying exploration, nightly
//! re-planning via fitted Q-iteration, the no-control and full-state
//! baselines, and multi-seed aggregation.

mod data;
mod device;
pub mod report;

pub use data::{DataConfig, PriceSource, TapSource, WeatherSource};
pub use device::Scenario;

use crate::approx::{ApproxConfig, ApproxKind, InputLayout, LstmConfig, Regressor, TrainConfig};
use crate::envs::{BuildingParams, ExogenousDay, TankParams};
use crate::fqi::{build_batch, run_fqi, Episode, Forecast, FqiConfig, SlotRecord};
use crate::mdp::{
    augment, exploration_prob, greedy_action, policy_distance, scaled_cost, step_cost, Action,
    HistoryBuffer, HistoryRecord, TimeSlot, QUARTERS_PER_DAY,
};
use crate::util::{derive_seed, stream_rng};
use crate::{Error, Result};
use data::DataProvider;
use device::Device;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Full description of one experiment: scenario, horizon, learner, data
/// sources, and device parameters. Every constant that affects results
/// lives here so that a config file fully determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Learning days (exploration decays over these).
    pub days: usize,
    /// Frozen-policy evaluation days appended after the learning days.
    pub eval_days: usize,
    /// History depth; 0 picks the scenario default (20 or 40).
    pub h: usize,
    /// Approximator for the partially observed agent.
    pub approx: ApproxKind,
    /// Approximator for the full-state benchmark.
    pub baseline_approx: ApproxKind,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub shapes: ApproxConfig,
    /// Fitted-Q sweeps per nightly re-planning.
    pub fqi_iterations: usize,
    /// Std of Gaussian noise added to the exogenous forecast (0 = perfect
    /// foresight).
    pub forecast_noise_std: f64,
    pub data: DataConfig,
    pub baselines: BaselineToggles,
    pub building: BuildingParams,
    pub tank: TankParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::HeatPump,
            days: 20,
            eval_days: 0,
            h: 0,
            approx: ApproxKind::Lstm,
            baseline_approx: ApproxKind::ExtraTrees,
            seeds: vec![1, 2, 3],
            train: TrainConfig::default(),
            shapes: ApproxConfig::default(),
            fqi_iterations: QUARTERS_PER_DAY as usize,
            forecast_noise_std: 0.0,
            data: DataConfig::default(),
            baselines: BaselineToggles::default(),
            building: BuildingParams::default(),
            tank: TankParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn effective_h(&self) -> usize {
        if self.h == 0 {
            self.scenario.default_h()
        } else {
            self.h
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days < 1 {
            return Err(Error::invalid_argument("days must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid_argument("seed list must not be empty"));
        }
        if self.fqi_iterations < 1 {
            return Err(Error::invalid_argument("fqi_iterations must be >= 1"));
        }
        Ok(())
    }

    fn shapes_for(&self, kind: ApproxKind) -> ApproxConfig {
        let mut shapes = self.shapes;
        if kind == ApproxKind::Lstm && shapes.lstm.d_cell == 0 {
            shapes.lstm = LstmConfig {
                d_cell: self.scenario.default_d_cell(),
                ..shapes.lstm
            };
        }
        shapes
    }
}

/// Which baseline runs accompany the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineToggles {
    pub no_control: bool,
    pub full_state: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        BaselineToggles {
            no_control: true,
            full_state: true,
        }
    }
}

/// The three run modes sharing the same day loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunVariant {
    /// Partially observed learning agent.
    Agent,
    /// Learning agent fed the complete simulator state.
    FullState,
    /// Requests OFF forever; the backup thermostat does everything.
    NoControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Learn,
    Eval,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Learn => "learn",
            Phase::Eval => "eval",
        })
    }
}

/// Per-day results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: u32,
    pub phase: Phase,
    pub epsilon: f64,
    pub cost_eur: f64,
    pub actions: Vec<Action>,
    pub comfort_violation_min: f64,
    /// `(c - c_full) / (c_nc - c_full)` against the same-seed baselines;
    /// filled by [`attach_baseline_metrics`].
    pub scaled_cost: Option<f64>,
    /// Euclidean distance to the full-state policy on the same day.
    pub policy_distance: Option<f64>,
    /// Lowest top-layer temperature seen during the day, at substep
    /// resolution (tank runs only).
    pub tank_min_top_c: Option<f64>,
}

/// Per-slot log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub day: u32,
    pub quarter: u16,
    pub u: Action,
    pub u_phys: f64,
    pub price: f64,
    /// Air temperature (building) or state of charge (tank).
    pub metric: f64,
}

/// Everything logged for one `(variant, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub scenario: Scenario,
    pub variant: RunVariant,
    /// Approximator behind the policy; absent for no-control.
    pub approx: Option<ApproxKind>,
    pub seed: u64,
    pub days: Vec<DayRecord>,
    pub slots: Vec<SlotRow>,
}

impl ExperimentRun {
    /// Prefix sums of the daily costs.
    pub fn cumulative_costs(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.days
            .iter()
            .map(|d| {
                acc += d.cost_eur;
                acc
            })
            .collect()
    }

    /// Total cost over a day range (end exclusive).
    pub fn cost_over(&self, days: std::ops::Range<usize>) -> f64 {
        self.days[days].iter().map(|d| d.cost_eur).sum()
    }

    pub fn run_label(&self) -> String {
        match self.variant {
            RunVariant::Agent => self
                .approx
                .map(|a| a.name().to_string())
                .unwrap_or_else(|| "agent".to_string()),
            RunVariant::FullState => "fullstate".to_string(),
            RunVariant::NoControl => "nocontrol".to_string(),
        }
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}", self.scenario, self.run_label(), self.seed)
    }
}

/// Runs the partially observed learning agent for one seed.
pub fn run_experiment(cfg: &ScenarioConfig, seed: u64) -> Result<ExperimentRun> {
    run_variant(cfg, seed, RunVariant::Agent)
}

/// Backup-only reference: requests OFF every slot, pays whatever the
/// thermostat decides. Price-agnostic by construction.
pub fn baseline_no_control(cfg: &ScenarioConfig, seed: u64) -> Result<ExperimentRun> {
    run_variant(cfg, seed, RunVariant::NoControl)
}

/// Full-information benchmark: identical protocol, but the regressor input
/// is the complete simulator state (with a one-slot history window).
pub fn baseline_full_state(cfg: &ScenarioConfig, seed: u64) -> Result<ExperimentRun> {
    run_variant(cfg, seed, RunVariant::FullState)
}

fn run_variant(cfg: &ScenarioConfig, seed: u64, variant: RunVariant) -> Result<ExperimentRun> {
    cfg.validate()?;
    let provider = DataProvider::new(&cfg.data, cfg.scenario, &cfg.tank)?;
    let mut device = Device::new(cfg.scenario, &cfg.building, &cfg.tank);

    let (h, obs_dim) = match variant {
        RunVariant::FullState => (1, device.full_obs().len()),
        _ => (cfg.effective_h(), cfg.scenario.partial_obs_dim()),
    };
    let exo_dim = cfg.scenario.exo_dim();
    let layout = InputLayout { h, obs_dim, exo_dim };

    let approx_kind = match variant {
        RunVariant::Agent => Some(cfg.approx),
        RunVariant::FullState => Some(cfg.baseline_approx),
        RunVariant::NoControl => None,
    };
    let mut regressor = match approx_kind {
        Some(kind) => {
            let train = TrainConfig {
                seed: derive_seed(derive_seed(cfg.train.seed, seed), variant as u64),
                ..cfg.train
            };
            Some(Regressor::new(kind, layout, &cfg.shapes_for(kind), train)?)
        }
        None => None,
    };

    let fqi_cfg = FqiConfig {
        iterations: cfg.fqi_iterations,
        h,
        p_rated_kw: device.p_rated_kw(),
        dt_hours: device.dt_ctrl_hours(),
    };

    let total_days = cfg.days + cfg.eval_days;
    let mut episode = Episode::default();
    let mut buffer = HistoryBuffer::new(h, obs_dim, exo_dim);
    let mut run = ExperimentRun {
        scenario: cfg.scenario,
        variant,
        approx: approx_kind,
        seed,
        days: Vec::with_capacity(total_days),
        slots: Vec::with_capacity(total_days * QUARTERS_PER_DAY as usize),
    };

    for d in 0..total_days {
        let day = d as u32;
        let learning = d < cfg.days;
        let epsilon = match (variant, learning) {
            (RunVariant::NoControl, _) => 0.0,
            (_, true) => exploration_prob(day),
            (_, false) => 0.0,
        };
        let day_data = provider.day(seed, day)?;
        let record = run_day(
            &mut device,
            &mut buffer,
            &mut episode,
            regressor.as_ref(),
            variant,
            day,
            epsilon,
            if learning { Phase::Learn } else { Phase::Eval },
            &day_data,
            seed,
            &mut run.slots,
        )?;
        run.days.push(record);

        let has_next = d + 1 < total_days;
        if learning && has_next {
            if let Some(reg) = regressor.as_mut() {
                let batch = build_batch(std::slice::from_ref(&episode), h)?;
                let next = provider.day(seed, day + 1)?;
                let forecast = make_forecast(cfg, &next, seed, day + 1)?;
                run_fqi(&batch, &next.lambda, &forecast, &fqi_cfg, reg)?;
            }
        }
    }
    Ok(run)
}

/// Exogenous forecast for the optimization day: the realised values plus
/// optional Gaussian noise.
fn make_forecast(
    cfg: &ScenarioConfig,
    day_data: &ExogenousDay,
    seed: u64,
    day: u32,
) -> Result<Forecast> {
    match cfg.scenario {
        Scenario::Boiler => Ok(Forecast::empty()),
        Scenario::HeatPump => {
            let mut rng = stream_rng(seed, "forecast", u64::from(day));
            let rows = day_data
                .t_out
                .iter()
                .map(|t| {
                    let noise = if cfg.forecast_noise_std > 0.0 {
                        let g: f64 = rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut rng,
                        );
                        g * cfg.forecast_noise_std
                    } else {
                        0.0
                    };
                    vec![t + noise]
                })
                .collect();
            Forecast::new(rows)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_day(
    device: &mut Device,
    buffer: &mut HistoryBuffer,
    episode: &mut Episode,
    regressor: Option<&Regressor>,
    variant: RunVariant,
    day: u32,
    epsilon: f64,
    phase: Phase,
    day_data: &ExogenousDay,
    seed: u64,
    slot_log: &mut Vec<SlotRow>,
) -> Result<DayRecord> {
    let mut explore_rng = stream_rng(seed, "explore", u64::from(day));
    let mut disturb_rng = stream_rng(seed, "disturb", u64::from(day));
    let p_rated = device.p_rated_kw();
    let dt_h = device.dt_ctrl_hours();
    let h = buffer.capacity();

    let mut cost = 0.0;
    let mut violation_min = 0.0;
    let mut min_top_c = f64::INFINITY;
    let mut actions = Vec::with_capacity(QUARTERS_PER_DAY as usize);

    for quarter in 1..=QUARTERS_PER_DAY {
        let time = TimeSlot::new(day, quarter)?;
        let x_exo = device.current_exo(day_data, quarter);

        let u = if variant == RunVariant::NoControl {
            Action::Off
        } else if explore_rng.gen::<f64>() < epsilon {
            Action::from_on(explore_rng.gen_bool(0.5))
        } else {
            match regressor {
                Some(reg) if reg.is_trained() => {
                    let x_aug = augment(buffer, h, time, x_exo.clone())?;
                    greedy_action(reg, &x_aug)?
                }
                _ => Action::Off,
            }
        };

        let u_phys = device.thermostat(u);
        let w = if device.sigma_w() > 0.0 {
            let g: f64 =
                rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut disturb_rng);
            g * device.sigma_w()
        } else {
            0.0
        };
        let outcome = device.step(u_phys, day_data, quarter, w)?;

        let o_end = match variant {
            RunVariant::FullState => device.full_obs(),
            _ => device.observe_end(day_data, quarter),
        };
        let price = day_data.lambda.at(quarter);
        cost += step_cost(u_phys, price, p_rated, dt_h);
        violation_min += outcome.violation_min;
        min_top_c = min_top_c.min(outcome.min_top_c);
        actions.push(u);

        buffer.push(HistoryRecord {
            o_phys: o_end.clone(),
            u_phys,
            u,
            x_exo: x_exo.clone(),
        })?;
        episode.slots.push(SlotRecord {
            time,
            x_exo,
            o_end,
            u,
            u_phys,
        });
        slot_log.push(SlotRow {
            day,
            quarter,
            u,
            u_phys: u_phys.fraction(),
            price,
            metric: device.state_metric(),
        });
    }

    Ok(DayRecord {
        day,
        phase,
        epsilon,
        cost_eur: cost,
        actions,
        comfort_violation_min: violation_min,
        scaled_cost: None,
        policy_distance: None,
        tank_min_top_c: min_top_c.is_finite().then_some(min_top_c),
    })
}

/// Fills the per-day scaled cost and policy distance of an agent run from
/// its same-seed baselines. Days where the baselines coincide keep `None`.
pub fn attach_baseline_metrics(
    run: &mut ExperimentRun,
    no_control: Option<&ExperimentRun>,
    full_state: Option<&ExperimentRun>,
) {
    for (d, record) in run.days.iter_mut().enumerate() {
        if let (Some(nc), Some(fs)) = (no_control, full_state) {
            if let (Some(nc_day), Some(fs_day)) = (nc.days.get(d), fs.days.get(d)) {
                record.scaled_cost =
                    scaled_cost(record.cost_eur, fs_day.cost_eur, nc_day.cost_eur).ok();
            }
        }
        if let Some(fs) = full_state {
            if let Some(fs_day) = fs.days.get(d) {
                record.policy_distance = policy_distance(&record.actions, &fs_day.actions).ok();
            }
        }
    }
}

/// Mean curve with a +/- 2 sample-standard-deviation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCurve {
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Pointwise mean and 2-sigma band over equally long series from at least
/// two runs.
pub fn band_curve(series: &[Vec<f64>]) -> Result<BandCurve> {
    if series.len() < 2 {
        return Err(Error::invalid_argument(
            "confidence bands need at least two runs",
        ));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::invalid_argument("series differ in length"));
    }
    let n = series.len() as f64;
    let mut curve = BandCurve {
        mean: Vec::with_capacity(len),
        lo: Vec::with_capacity(len),
        hi: Vec::with_capacity(len),
    };
    for i in 0..len {
        let mean = series.iter().map(|s| s[i]).sum::<f64>() / n;
        let var = series.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        curve.mean.push(mean);
        curve.lo.push(mean - 2.0 * sd);
        curve.hi.push(mean + 2.0 * sd);
    }
    Ok(curve)
}

/// Aggregate curves over the seeds of one run group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub daily_cost: BandCurve,
    pub cumulative_cost: BandCurve,
}

/// Per-day mean and +/- 2 sigma bands over a set of same-length runs.
pub fn aggregate_seeds(runs: &[ExperimentRun]) -> Result<SeedAggregate> {
    let daily: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.days.iter().map(|d| d.cost_eur).collect())
        .collect();
    let cumulative: Vec<Vec<f64>> = runs.iter().map(|r| r.cumulative_costs()).collect();
    Ok(SeedAggregate {
        daily_cost: band_curve(&daily)?,
        cumulative_cost: band_curve(&cumulative)?,
    })
}
