//! Simulation and batch reinforcement-learning engine for thermostatically
//! controlled loads (heat pumps, electric water heaters) that are controlled
//! from sparse observations.
//!
//! The crate is organised around five building blocks:
//!
//! - [`mdp`] — decision-process types (time slots, actions, augmented states)
//!   and the shared cost/metric formulas.
//! - [`envs`] — full-state device simulators (2R2C building, 50-layer
//!   stratified hot-water tank), backup thermostats, and exogenous data
//!   (weather, prices, tap draws) from CSV files or seeded generators.
//! - [`approx`] — Q-function regressors behind one fit/predict interface:
//!   a multi-layer perceptron, a merged 1D convolutional network, a merged
//!   LSTM network (all trained with RMSprop on in-repo reverse-mode
//!   gradients) and an ensemble of extremely randomized trees.
//! - [`fqi`] — fitted Q-iteration over batches of history-augmented
//!   transitions, with forecast substitution of exogenous next-state
//!   components.
//! - [`harness`] — the day-loop experiment protocol: epsilon-greedy
//!   exploration, no-control and full-state baselines, multi-seed
//!   aggregation and CSV reporting.

pub mod approx;
pub mod envs;
mod error;
pub mod fqi;
pub mod harness;
pub mod mdp;
pub mod util;

pub use error::{Error, Result};
