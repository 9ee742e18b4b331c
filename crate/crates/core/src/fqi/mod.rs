//! Fitted Q-iteration over batches of history-augmented transitions.
//!
//! Each day the harness hands the full batch of logged slots to
//! [`build_batch`], which replays the history augmentation, and then to
//! [`run_fqi`], which iterates cost + one-step lookahead targets against the
//! next day's announced prices, substituting the exogenous components of
//! successor states with their forecast.

use crate::approx::{EncodedState, Regressor};
use crate::mdp::{
    augment, step_cost, Action, AugmentedState, HistoryBuffer, HistoryRecord, PhysicalAction,
    PriceProfile, TimeSlot, Transition, QUARTERS_PER_DAY,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fitted-Q-iteration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FqiConfig {
    /// Number of value-iteration sweeps; one per quarter of the horizon.
    pub iterations: usize,
    /// History depth used when augmenting states.
    pub h: usize,
    /// Rated electric power, kW (cost bookkeeping).
    pub p_rated_kw: f64,
    /// Control slot length, hours.
    pub dt_hours: f64,
}

impl Default for FqiConfig {
    fn default() -> Self {
        FqiConfig {
            iterations: QUARTERS_PER_DAY as usize,
            h: 20,
            p_rated_kw: 2.3,
            dt_hours: 0.25,
        }
    }
}

/// Forecast exogenous values for the optimization day: one row per quarter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    rows: Vec<Vec<f64>>,
}

impl Forecast {
    /// Wraps 96 forecast rows of uniform width; values must be finite.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != QUARTERS_PER_DAY as usize {
            return Err(Error::invalid_argument(format!(
                "forecast needs 96 rows, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        for row in &rows {
            if row.len() != dim {
                return Err(Error::invalid_argument("forecast rows differ in width"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid_argument("forecast contains non-finite value"));
            }
        }
        Ok(Forecast { rows })
    }

    /// Forecast without exogenous components (scenarios whose state carries
    /// none).
    pub fn empty() -> Self {
        Forecast {
            rows: vec![Vec::new(); QUARTERS_PER_DAY as usize],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Row for a quarter in `1..=96`.
    pub fn row(&self, quarter: u16) -> &[f64] {
        &self.rows[(quarter - 1) as usize]
    }
}

/// What the harness logs for one control slot, in episode order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub time: TimeSlot,
    /// Exogenous values realised during the slot.
    pub x_exo: Vec<f64>,
    /// Partial observation available at the end of the slot.
    pub o_end: Vec<f64>,
    pub u: Action,
    pub u_phys: PhysicalAction,
}

/// One contiguous run of slots. Histories never leak across episodes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Episode {
    pub slots: Vec<SlotRecord>,
}

/// Replays the history augmentation over raw episode logs and returns one
/// transition per logged slot.
///
/// Slots must be chronologically contiguous within an episode. The
/// successor state of the final slot repeats the last exogenous value; the
/// fitted-Q loop substitutes the forecast there anyway.
pub fn build_batch(episodes: &[Episode], h: usize) -> Result<Vec<Transition>> {
    if h == 0 {
        return Err(Error::invalid_argument("history depth h must be >= 1"));
    }
    let mut batch = Vec::new();
    for episode in episodes {
        let slots = &episode.slots;
        if slots.is_empty() {
            continue;
        }
        for pair in slots.windows(2) {
            if pair[1].time != pair[0].time.next() {
                return Err(Error::invalid_argument(format!(
                    "episode slots out of order: {:?} does not follow {:?}",
                    pair[1].time, pair[0].time
                )));
            }
        }
        let obs_dim = slots[0].o_end.len();
        let exo_dim = slots[0].x_exo.len();
        let mut buffer = HistoryBuffer::new(h, obs_dim, exo_dim);

        let mut x_aug = augment(&buffer, h, slots[0].time, slots[0].x_exo.clone())?;
        for (k, slot) in slots.iter().enumerate() {
            buffer.push(HistoryRecord {
                o_phys: slot.o_end.clone(),
                u_phys: slot.u_phys,
                u: slot.u,
                x_exo: slot.x_exo.clone(),
            })?;
            let next_exo = slots
                .get(k + 1)
                .map(|s| s.x_exo.clone())
                .unwrap_or_else(|| slot.x_exo.clone());
            let x_aug_next = augment(&buffer, h, slot.time.next(), next_exo)?;
            batch.push(Transition::new(
                x_aug,
                slot.u,
                x_aug_next.clone(),
                slot.u_phys,
            )?);
            x_aug = x_aug_next;
        }
    }
    Ok(batch)
}

/// Replaces the exogenous component of a successor state (and only that)
/// with the forecast row for quarter `l`; histories are untouched. A no-op
/// when the scenario carries no exogenous state.
pub fn substitute_forecast(x: &AugmentedState, forecast: &Forecast, l: u16) -> AugmentedState {
    let mut out = x.clone();
    if forecast.dim() > 0 && !out.x_exo.is_empty() {
        out.x_exo = forecast.row(l).to_vec();
    }
    out
}

/// Runs fitted Q-iteration on batch `m` against the announced prices and
/// the exogenous forecast for the optimization day, fitting `reg` in place.
/// The value recursion starts from the all-zero Q-function regardless of
/// any warm-started network weights.
pub fn run_fqi(
    m: &[Transition],
    lambda: &PriceProfile,
    forecast: &Forecast,
    cfg: &FqiConfig,
    reg: &mut Regressor,
) -> Result<()> {
    run_fqi_traced(m, lambda, forecast, cfg, reg, |_, _| {})
}

/// [`run_fqi`] with an observer called after every iteration `n` with the
/// freshly fitted regressor.
pub fn run_fqi_traced(
    m: &[Transition],
    lambda: &PriceProfile,
    forecast: &Forecast,
    cfg: &FqiConfig,
    reg: &mut Regressor,
    mut on_iteration: impl FnMut(usize, &Regressor),
) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid_argument(
            "fitted Q-iteration needs a non-empty batch",
        ));
    }
    if cfg.iterations == 0 {
        return Err(Error::invalid_argument("iteration count must be >= 1"));
    }

    // Canonical ordering makes the result depend on the batch only through
    // its set of tuples.
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by_key(|&i| m[i].x_aug.time);

    let substituted: Vec<AugmentedState> = order
        .iter()
        .map(|&i| {
            let next = &m[i].x_aug_next;
            substitute_forecast(next, forecast, next.time.quarter())
        })
        .collect();

    reg.refresh_scaler(
        order
            .iter()
            .map(|&i| &m[i].x_aug)
            .chain(substituted.iter()),
    );

    let costs: Vec<f64> = order
        .iter()
        .map(|&i| {
            step_cost(
                m[i].u_phys,
                lambda.at(m[i].x_aug.time.quarter()),
                cfg.p_rated_kw,
                cfg.dt_hours,
            )
        })
        .collect();

    let enc_x: Vec<EncodedState> = order
        .iter()
        .map(|&i| reg.encode(&m[i].x_aug, m[i].u))
        .collect::<Result<_>>()?;
    let mut enc_next: Vec<EncodedState> = substituted
        .iter()
        .map(|x| reg.encode(x, Action::Off))
        .collect::<Result<_>>()?;

    for n in 1..=cfg.iterations {
        let targets: Vec<f64> = if n == 1 {
            // Q_0 is zero everywhere: the lookahead term vanishes.
            costs.clone()
        } else {
            let reg_ref = &*reg;
            enc_next
                .par_iter_mut()
                .zip(costs.par_iter())
                .map_init(
                    || reg_ref.new_cache(),
                    |cache, (enc, &c)| -> Result<f64> {
                        enc.set_action(Action::Off);
                        let q_off = reg_ref.predict_encoded(enc, cache)?;
                        enc.set_action(Action::On);
                        let q_on = reg_ref.predict_encoded(enc, cache)?;
                        Ok(c + q_off.min(q_on))
                    },
                )
                .collect::<Result<Vec<f64>>>()?
        };
        reg.fit_encoded(&enc_x, &targets)?;
        on_iteration(n, reg);
    }
    Ok(())
}
