//! Full-state device simulators and exogenous data sources.
//!
//! The simulators integrate at a fine internal time step (`dt_sim`) over one
//! 15-minute control slot (`dt_ctrl`) per call. Their complete state is
//! hidden from the learning agent; only the sparse observations defined in
//! `mdp` leak out.

mod building;
mod price;
mod tank;
mod tap;
mod weather;

pub use building::{
    building_step, building_step_stats, thermostat_building, BuildingParams, BuildingState,
    BuildingStepStats,
};
pub use price::{load_price_csv, synth_price, write_price_csv, PriceSynthConfig};
pub use tank::{
    delivered_temp, tank_observe, tank_soc, tank_step, tank_step_stats, thermostat_tank,
    TankParams, TankState, TankStepStats, SPECIFIC_HEAT_J_PER_KG_C, TANK_LAYERS,
    WATER_KG_PER_L,
};
pub use tap::{load_tap_csv, tap_profile, write_tap_csv, DrawEvent, TapSynthConfig};
pub use weather::{load_weather_csv, synth_weather, WeatherSynthConfig};

use crate::mdp::PriceProfile;
use serde::{Deserialize, Serialize};

/// Exogenous data for one simulated day: outside temperatures (building
/// scenario), tap-draw events (tank scenario), and the announced prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousDay {
    /// Outside temperature per quarter, degrees C.
    pub t_out: Vec<f64>,
    /// Tap-draw events, sorted by quarter.
    pub draws: Vec<DrawEvent>,
    /// Day-ahead price profile.
    pub lambda: PriceProfile,
}

impl ExogenousDay {
    /// Total litres drawn during a quarter in `1..=96`.
    pub fn draw_in_quarter(&self, quarter: u16) -> f64 {
        self.draws
            .iter()
            .filter(|d| d.quarter == quarter)
            .map(|d| d.liters)
            .sum()
    }
}
