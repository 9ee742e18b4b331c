//! Exogenous data for a run: synthetic generators keyed by `(seed, day)` or
//! CSV files loaded once up front.

use super::device::Scenario;
use crate::envs::{
    load_price_csv, load_tap_csv, load_weather_csv, synth_price, synth_weather, tap_profile,
    DrawEvent, ExogenousDay, PriceSynthConfig, TankParams, TapSynthConfig, WeatherSynthConfig,
};
use crate::mdp::{PriceProfile, QUARTERS_PER_DAY};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum WeatherSource {
    Synth(WeatherSynthConfig),
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum PriceSource {
    Synth(PriceSynthConfig),
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum TapSource {
    Synth(TapSynthConfig),
    Csv { path: PathBuf },
}

/// Where each exogenous stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub weather: WeatherSource,
    pub price: PriceSource,
    pub tap: TapSource,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            weather: WeatherSource::Synth(WeatherSynthConfig::default()),
            price: PriceSource::Synth(PriceSynthConfig::default()),
            tap: TapSource::Synth(TapSynthConfig::default()),
        }
    }
}

enum Weather {
    Synth(WeatherSynthConfig),
    Loaded(Vec<Vec<f64>>),
}

enum Prices {
    Synth(PriceSynthConfig),
    Loaded(Vec<PriceProfile>),
}

enum Taps {
    Synth(TapSynthConfig),
    Loaded(Vec<Vec<DrawEvent>>),
}

/// Serves one [`ExogenousDay`] per day index. Synthetic streams are pure in
/// `(seed, day)`, so every variant of a run sees identical conditions.
pub(crate) struct DataProvider {
    weather: Weather,
    prices: Prices,
    taps: Taps,
    scenario: Scenario,
    mean_daily_draw_l: f64,
    t_ambient_c: f64,
}

impl DataProvider {
    pub fn new(cfg: &DataConfig, scenario: Scenario, tank: &TankParams) -> Result<Self> {
        let weather = match &cfg.weather {
            WeatherSource::Synth(c) => Weather::Synth(*c),
            WeatherSource::Csv { path } => Weather::Loaded(load_weather_csv(path)?),
        };
        let prices = match &cfg.price {
            PriceSource::Synth(c) => Prices::Synth(*c),
            PriceSource::Csv { path } => Prices::Loaded(load_price_csv(path)?),
        };
        let taps = match &cfg.tap {
            TapSource::Synth(c) => Taps::Synth(*c),
            TapSource::Csv { path } => Taps::Loaded(load_tap_csv(path)?),
        };
        Ok(DataProvider {
            weather,
            prices,
            taps,
            scenario,
            mean_daily_draw_l: tank.mean_daily_draw_l,
            t_ambient_c: tank.t_ambient_c,
        })
    }

    pub fn day(&self, seed: u64, day: u32) -> Result<ExogenousDay> {
        let t_out = match (&self.weather, self.scenario) {
            // The tank does not see the weather; hold its surroundings at
            // the ambient temperature.
            (_, Scenario::Boiler) => vec![self.t_ambient_c; QUARTERS_PER_DAY as usize],
            (Weather::Synth(c), _) => synth_weather(c, seed, day),
            (Weather::Loaded(days), _) => days
                .get(day as usize)
                .cloned()
                .ok_or_else(|| exhausted("weather", days.len(), day))?,
        };
        let lambda = match &self.prices {
            Prices::Synth(c) => synth_price(c, seed, day),
            Prices::Loaded(days) => days
                .get(day as usize)
                .cloned()
                .ok_or_else(|| exhausted("price", days.len(), day))?,
        };
        let draws = match (&self.taps, self.scenario) {
            (_, Scenario::HeatPump) => Vec::new(),
            (Taps::Synth(c), _) => tap_profile(c, self.mean_daily_draw_l, seed, day),
            (Taps::Loaded(days), _) => days
                .get(day as usize)
                .cloned()
                .ok_or_else(|| exhausted("tap", days.len(), day))?,
        };
        Ok(ExogenousDay {
            t_out,
            draws,
            lambda,
        })
    }
}

fn exhausted(what: &str, have: usize, day: u32) -> Error {
    Error::invalid_argument(format!(
        "{what} data covers {have} days but day {day} was requested; provide a longer file"
    ))
}
