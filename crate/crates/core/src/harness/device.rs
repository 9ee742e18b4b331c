//! Uniform front over the two device simulators for the day loop.

use crate::envs::{
    building_step_stats, tank_observe, tank_soc, tank_step_stats, thermostat_building,
    thermostat_tank, BuildingParams, BuildingState, ExogenousDay, TankParams, TankState,
};
use crate::mdp::{Action, PhysicalAction};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Which flexible load an experiment controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    HeatPump,
    Boiler,
}

impl Scenario {
    /// History depth used in the experiments of this scenario.
    pub fn default_h(&self) -> usize {
        match self {
            Scenario::HeatPump => 20,
            Scenario::Boiler => 40,
        }
    }

    /// LSTM memory-cell width used in the experiments of this scenario.
    pub fn default_d_cell(&self) -> usize {
        match self {
            Scenario::HeatPump => 8,
            Scenario::Boiler => 12,
        }
    }

    /// Width of the sparse observation: the heat pump exposes nothing
    /// beyond its consumption history; the boiler exposes outflow mass and
    /// top-layer temperature.
    pub fn partial_obs_dim(&self) -> usize {
        match self {
            Scenario::HeatPump => 0,
            Scenario::Boiler => 2,
        }
    }

    /// Width of the exogenous state component (outside temperature for the
    /// building; none for the tank).
    pub fn exo_dim(&self) -> usize {
        match self {
            Scenario::HeatPump => 1,
            Scenario::Boiler => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::HeatPump => "heatpump",
            Scenario::Boiler => "boiler",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatpump" => Ok(Scenario::HeatPump),
            "boiler" => Ok(Scenario::Boiler),
            other => Err(crate::Error::invalid_argument(format!(
                "unknown scenario `{other}`; valid options: heatpump, boiler"
            ))),
        }
    }
}

/// What happened to the device during one control slot.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotOutcome {
    /// Minutes in comfort violation (air outside the band, or draws served
    /// below the valve setpoint).
    pub violation_min: f64,
    /// Delivered-comfort temperature floor seen during the slot (tank only).
    pub min_top_c: f64,
}

pub(crate) enum Device {
    Building {
        state: BuildingState,
        params: BuildingParams,
    },
    Tank {
        state: TankState,
        params: TankParams,
    },
}

impl Device {
    pub fn new(scenario: Scenario, building: &BuildingParams, tank: &TankParams) -> Self {
        match scenario {
            // Start inside the comfort band with air and mass settled.
            Scenario::HeatPump => Device::Building {
                state: BuildingState::uniform(21.0),
                params: *building,
            },
            // Start charged halfway through the thermostat band.
            Scenario::Boiler => Device::Tank {
                state: TankState::uniform(55.0),
                params: tank.clone(),
            },
        }
    }

    pub fn p_rated_kw(&self) -> f64 {
        match self {
            Device::Building { params, .. } => params.p_rated_kw,
            Device::Tank { params, .. } => params.p_rated_kw,
        }
    }

    pub fn dt_ctrl_hours(&self) -> f64 {
        match self {
            Device::Building { params, .. } => params.dt_ctrl_hours(),
            Device::Tank { params, .. } => params.dt_ctrl_hours(),
        }
    }

    pub fn sigma_w(&self) -> f64 {
        match self {
            Device::Building { params, .. } => params.sigma_w_c,
            Device::Tank { .. } => 0.0,
        }
    }

    /// Exogenous state component visible to the agent at a decision slot.
    pub fn current_exo(&self, day: &ExogenousDay, quarter: u16) -> Vec<f64> {
        match self {
            Device::Building { .. } => vec![day.t_out[(quarter - 1) as usize]],
            Device::Tank { .. } => Vec::new(),
        }
    }

    pub fn thermostat(&self, u: Action) -> PhysicalAction {
        match self {
            Device::Building { state, params } => thermostat_building(state, u, params),
            Device::Tank { state, params } => thermostat_tank(state, u, params),
        }
    }

    /// Advances one control slot; `w` is the air-temperature disturbance
    /// (building only).
    pub fn step(
        &mut self,
        u_phys: PhysicalAction,
        day: &ExogenousDay,
        quarter: u16,
        w: f64,
    ) -> Result<SlotOutcome> {
        match self {
            Device::Building { state, params } => {
                let t_out = day.t_out[(quarter - 1) as usize];
                let (next, stats) = building_step_stats(*state, u_phys, t_out, w, params);
                *state = next;
                Ok(SlotOutcome {
                    violation_min: stats.violation_s / 60.0,
                    min_top_c: f64::INFINITY,
                })
            }
            Device::Tank { state, params } => {
                let draw = day.draw_in_quarter(quarter);
                let (next, stats) = tank_step_stats(state, u_phys, draw, params)?;
                *state = next;
                Ok(SlotOutcome {
                    violation_min: stats.cold_draw_s / 60.0,
                    min_top_c: stats.min_top_c,
                })
            }
        }
    }

    /// Sparse observation available at the end of a slot.
    pub fn observe_end(&self, day: &ExogenousDay, quarter: u16) -> Vec<f64> {
        match self {
            Device::Building { .. } => Vec::new(),
            Device::Tank { state, .. } => tank_observe(state, day.draw_in_quarter(quarter)),
        }
    }

    /// Complete simulator state, for the full-information baseline.
    pub fn full_obs(&self) -> Vec<f64> {
        match self {
            Device::Building { state, .. } => vec![state.t_air_c, state.t_mass_c],
            Device::Tank { state, .. } => state.temps().to_vec(),
        }
    }

    /// Scalar state summary for the slot log: air temperature for the
    /// building, state of charge for the tank.
    pub fn state_metric(&self) -> f64 {
        match self {
            Device::Building { state, .. } => state.t_air_c,
            Device::Tank { state, params } => tank_soc(state, params),
        }
    }

}
