//! Decision-process types shared by the simulators, the function
//! approximators, and the experiment harness.
//!
//! Time is discretised into 96 quarter-hour slots per day. The agent
//! requests a binary ON/OFF action each slot; a backup thermostat maps the
//! request to the physical action that was actually applied. Because the
//! agent only sees a sparse observation of the device, decision states are
//! *augmented* with a fixed-length history window of past observations and
//! actions.

mod history;
mod metrics;

pub use history::{augment, HistoryBuffer, HistoryRecord, HistoryWindow};
pub use metrics::{
    exploration_prob, greedy_action, policy_distance, scaled_cost, step_cost, QFunction,
};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of control slots per day (15-minute resolution).
pub const QUARTERS_PER_DAY: u16 = 96;

/// One 15-minute control slot: a quarter index within a day plus an episode
/// (day) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeSlot {
    day: u32,
    quarter: u16,
}

impl TimeSlot {
    /// Creates a slot; `quarter` must lie in `1..=96`.
    pub fn new(day: u32, quarter: u16) -> Result<Self> {
        if quarter == 0 || quarter > QUARTERS_PER_DAY {
            return Err(Error::invalid_argument(format!(
                "quarter must be in 1..=96, got {quarter}"
            )));
        }
        Ok(TimeSlot { day, quarter })
    }

    /// First slot of the given day.
    pub fn start_of_day(day: u32) -> Self {
        TimeSlot { day, quarter: 1 }
    }

    pub fn day(&self) -> u32 {
        self.day
    }

    pub fn quarter(&self) -> u16 {
        self.quarter
    }

    /// The following slot, wrapping across midnight into the next day.
    pub fn next(&self) -> TimeSlot {
        if self.quarter == QUARTERS_PER_DAY {
            TimeSlot {
                day: self.day + 1,
                quarter: 1,
            }
        } else {
            TimeSlot {
                day: self.day,
                quarter: self.quarter + 1,
            }
        }
    }

    /// Hour-of-day in `[0, 24)` for the start of the slot.
    pub fn hour(&self) -> f64 {
        f64::from(self.quarter - 1) * 0.25
    }
}

/// Requested control action: switch the device OFF or ON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Off,
    On,
}

impl Action {
    pub const BOTH: [Action; 2] = [Action::Off, Action::On];

    pub fn as_f64(self) -> f64 {
        match self {
            Action::Off => 0.0,
            Action::On => 1.0,
        }
    }

    pub fn from_on(on: bool) -> Self {
        if on {
            Action::On
        } else {
            Action::Off
        }
    }
}

/// Fraction of rated power actually drawn over a slot, after the backup
/// thermostat has had its say.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalAction(f64);

impl PhysicalAction {
    pub const OFF: PhysicalAction = PhysicalAction(0.0);
    pub const FULL: PhysicalAction = PhysicalAction(1.0);

    /// Creates a physical action; the fraction must lie in `[0, 1]`.
    pub fn new(fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::invalid_argument(format!(
                "physical action must be in [0, 1], got {fraction}"
            )));
        }
        Ok(PhysicalAction(fraction))
    }

    pub fn fraction(&self) -> f64 {
        self.0
    }
}

impl From<Action> for PhysicalAction {
    fn from(u: Action) -> Self {
        PhysicalAction(u.as_f64())
    }
}

/// The sparse observation available to the agent at one slot: timing
/// information, a device-specific partial physical observation, and
/// exogenous variables such as the outside temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedState {
    pub time: TimeSlot,
    pub o_phys: Vec<f64>,
    pub x_exo: Vec<f64>,
}

/// History-augmented state: current timing and exogenous information plus a
/// fixed-length window over past observations and actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub time: TimeSlot,
    pub hist: HistoryWindow,
    pub x_exo: Vec<f64>,
}

/// One batch tuple: augmented state, requested action, successor augmented
/// state, and the physical action the backup actually applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x_aug: AugmentedState,
    pub u: Action,
    pub x_aug_next: AugmentedState,
    pub u_phys: PhysicalAction,
}

impl Transition {
    /// Builds a transition, checking that the successor state sits exactly
    /// one slot after the origin (wrapping across days).
    pub fn new(
        x_aug: AugmentedState,
        u: Action,
        x_aug_next: AugmentedState,
        u_phys: PhysicalAction,
    ) -> Result<Self> {
        if x_aug_next.time != x_aug.time.next() {
            return Err(Error::invalid_argument(format!(
                "successor slot {:?} does not follow {:?}",
                x_aug_next.time, x_aug.time
            )));
        }
        Ok(Transition {
            x_aug,
            u,
            x_aug_next,
            u_phys,
        })
    }
}

/// Day-ahead electricity price profile in EUR/kWh, one value per quarter.
/// Dynamic prices may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    values: Vec<f64>,
}

impl PriceProfile {
    /// Wraps a 96-value profile; every entry must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != QUARTERS_PER_DAY as usize {
            return Err(Error::invalid_argument(format!(
                "price profile needs 96 values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid_argument(format!(
                "price profile contains non-finite value {v}"
            )));
        }
        Ok(PriceProfile { values })
    }

    pub fn flat(value: f64) -> Self {
        PriceProfile {
            values: vec![value; QUARTERS_PER_DAY as usize],
        }
    }

    /// Price for a quarter in `1..=96`.
    pub fn at(&self, quarter: u16) -> f64 {
        self.values[(quarter - 1) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}
