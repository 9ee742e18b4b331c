//! Cost, exploration, and policy-comparison formulas.

use super::{Action, AugmentedState, PhysicalAction};
use crate::{Error, Result};

/// Anything that can score a state-action pair. Implemented by the trained
/// regressors in `approx`; mocked freely in tests.
pub trait QFunction {
    /// Estimated cumulative cost of taking `u` in `x` and acting greedily
    /// afterwards. Fails if the estimator has not been fitted yet.
    fn q_value(&self, x: &AugmentedState, u: Action) -> Result<f64>;
}

/// Electricity cost of one slot: `u_phys * P_rated * lambda * dt`.
///
/// Units are fixed crate-wide: `P_rated` in kW, `lambda` in EUR/kWh, `dt`
/// in hours, result in EUR.
pub fn step_cost(u_phys: PhysicalAction, lambda_eur_per_kwh: f64, p_rated_kw: f64, dt_h: f64) -> f64 {
    u_phys.fraction() * p_rated_kw * lambda_eur_per_kwh * dt_h
}

/// Exploration probability for episode `d`: `0.75^d`.
pub fn exploration_prob(day: u32) -> f64 {
    0.75f64.powi(day as i32)
}

/// Greedy action under `q`: the argmin over both actions, with ties broken
/// toward OFF (the zero-cost action).
pub fn greedy_action<Q: QFunction + ?Sized>(q: &Q, x: &AugmentedState) -> Result<Action> {
    let q_off = q.q_value(x, Action::Off)?;
    let q_on = q.q_value(x, Action::On)?;
    Ok(if q_on < q_off { Action::On } else { Action::Off })
}

/// Normalises a cost against the full-state and no-control baselines:
/// `(c - c_full) / (c_nocontrol - c_full)`.
pub fn scaled_cost(c: f64, c_full: f64, c_nocontrol: f64) -> Result<f64> {
    let denom = c_nocontrol - c_full;
    if denom == 0.0 {
        return Err(Error::DegenerateBaseline);
    }
    let v = (c - c_full) / denom;
    // keep -0.0 out of the logs
    Ok(if v == 0.0 { 0.0 } else { v })
}

/// Euclidean distance between two equal-length daily action vectors.
pub fn policy_distance(a: &[Action], b: &[Action]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid_argument(format!(
            "action vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let sum_sq: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    Ok(sum_sq.sqrt())
}
