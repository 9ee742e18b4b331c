//! Feature encoding of augmented states for the regressors.
//!
//! Every regressor sees the same information in one of two arrangements:
//! a flat vector (MLP, trees) or a `h x n_series` time-series matrix plus a
//! small auxiliary vector (CNN, LSTM). The time slot is encoded as
//! `(sin, cos)` of the quarter angle plus the quarter scaled to `[0, 1)`;
//! continuous features are min-max scaled with statistics frozen over the
//! batch of the current fitted-Q run.

use crate::mdp::{Action, AugmentedState, QUARTERS_PER_DAY};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dimensions of the scenario's augmented state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    /// History depth.
    pub h: usize,
    /// Entries per partial-observation row.
    pub obs_dim: usize,
    /// Entries in the exogenous vector.
    pub exo_dim: usize,
}

/// Width of the time encoding: sin, cos, scaled quarter.
pub const TIME_FEATURES: usize = 3;

impl InputLayout {
    /// Series stacked in each time-series row:
    /// `[u_phys, u, obs..., exo...]`.
    pub fn n_series(&self) -> usize {
        2 + self.obs_dim + self.exo_dim
    }

    /// Auxiliary (non-sequence) input width: time encoding, current
    /// exogenous values, and the action.
    pub fn aux_dim(&self) -> usize {
        TIME_FEATURES + self.exo_dim + 1
    }

    /// Flat input width for MLP and tree regressors.
    pub fn flat_dim(&self) -> usize {
        TIME_FEATURES + self.h * self.n_series() + self.exo_dim + 1
    }

    pub fn validate_state(&self, x: &AugmentedState) -> Result<()> {
        if x.hist.depth() != self.h
            || x.hist.obs_dim() != self.obs_dim
            || x.hist.exo_dim() != self.exo_dim
            || x.x_exo.len() != self.exo_dim
        {
            return Err(Error::invalid_argument(format!(
                "state dims (h={}, obs={}, exo={}/{}) do not match layout {:?}",
                x.hist.depth(),
                x.hist.obs_dim(),
                x.hist.exo_dim(),
                x.x_exo.len(),
                self
            )));
        }
        Ok(())
    }
}

/// Frozen min-max statistics: one `(min, max)` per series and one per
/// exogenous component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    series: Vec<(f64, f64)>,
    exo: Vec<(f64, f64)>,
}

impl Scaler {
    /// Identity scaler (leaves features untouched).
    pub fn identity(layout: &InputLayout) -> Self {
        Scaler {
            series: vec![(0.0, 1.0); layout.n_series()],
            exo: vec![(0.0, 1.0); layout.exo_dim],
        }
    }

    /// Min-max statistics over every history entry and every current
    /// exogenous value of the given states.
    pub fn from_states<'a>(
        layout: &InputLayout,
        states: impl Iterator<Item = &'a AugmentedState>,
    ) -> Self {
        let n_series = layout.n_series();
        let mut series = vec![(f64::INFINITY, f64::NEG_INFINITY); n_series];
        let mut exo = vec![(f64::INFINITY, f64::NEG_INFINITY); layout.exo_dim];

        let update = |stat: &mut (f64, f64), v: f64| {
            stat.0 = stat.0.min(v);
            stat.1 = stat.1.max(v);
        };

        for x in states {
            for t in 0..layout.h {
                update(&mut series[0], x.hist.u_phys_hist[t]);
                update(&mut series[1], x.hist.u_hist[t].as_f64());
                for (j, v) in x.hist.obs[t].iter().enumerate() {
                    update(&mut series[2 + j], *v);
                }
                for (j, v) in x.hist.exo_hist[t].iter().enumerate() {
                    update(&mut series[2 + layout.obs_dim + j], *v);
                }
            }
            for (j, v) in x.x_exo.iter().enumerate() {
                update(&mut exo[j], *v);
            }
        }

        // Collapse untouched stats to the identity.
        for stat in series.iter_mut().chain(exo.iter_mut()) {
            if stat.0 > stat.1 {
                *stat = (0.0, 1.0);
            }
        }
        Scaler { series, exo }
    }

    fn apply(stat: (f64, f64), v: f64) -> f64 {
        let range = stat.1 - stat.0;
        if range > 0.0 {
            (v - stat.0) / range
        } else {
            0.0
        }
    }

    fn series_value(&self, idx: usize, v: f64) -> f64 {
        Self::apply(self.series[idx], v)
    }

    fn exo_value(&self, idx: usize, v: f64) -> f64 {
        Self::apply(self.exo[idx], v)
    }
}

/// A state encoded in both arrangements, with the action slot (last entry
/// of `flat` and `aux`) left to be filled by [`EncodedState::set_action`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedState {
    /// Row-major `h x n_series` matrix, newest row first.
    pub seq: Vec<f64>,
    /// Time encoding, current exogenous values, action.
    pub aux: Vec<f64>,
    /// Everything flattened: time encoding, sequence, exogenous, action.
    pub flat: Vec<f64>,
}

impl EncodedState {
    pub fn set_action(&mut self, u: Action) {
        let v = u.as_f64();
        *self.aux.last_mut().expect("aux is never empty") = v;
        *self.flat.last_mut().expect("flat is never empty") = v;
    }
}

/// Encodes a state with frozen scaling; the action slot is initialised to
/// OFF and set separately.
pub fn encode_state(layout: &InputLayout, scaler: &Scaler, x: &AugmentedState) -> EncodedState {
    let n_series = layout.n_series();
    let angle = 2.0 * std::f64::consts::PI * f64::from(x.time.quarter()) / f64::from(QUARTERS_PER_DAY);
    let time_enc = [
        angle.sin(),
        angle.cos(),
        f64::from(x.time.quarter() - 1) / f64::from(QUARTERS_PER_DAY),
    ];

    let mut seq = Vec::with_capacity(layout.h * n_series);
    for t in 0..layout.h {
        seq.push(scaler.series_value(0, x.hist.u_phys_hist[t]));
        seq.push(scaler.series_value(1, x.hist.u_hist[t].as_f64()));
        for (j, v) in x.hist.obs[t].iter().enumerate() {
            seq.push(scaler.series_value(2 + j, *v));
        }
        for (j, v) in x.hist.exo_hist[t].iter().enumerate() {
            seq.push(scaler.series_value(2 + layout.obs_dim + j, *v));
        }
    }

    let mut aux = Vec::with_capacity(layout.aux_dim());
    aux.extend_from_slice(&time_enc);
    for (j, v) in x.x_exo.iter().enumerate() {
        aux.push(scaler.exo_value(j, *v));
    }
    aux.push(0.0);

    let mut flat = Vec::with_capacity(layout.flat_dim());
    flat.extend_from_slice(&time_enc);
    flat.extend_from_slice(&seq);
    for (j, v) in x.x_exo.iter().enumerate() {
        flat.push(scaler.exo_value(j, *v));
    }
    flat.push(0.0);

    EncodedState { seq, aux, flat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{HistoryWindow, TimeSlot};

    fn state(h: usize) -> AugmentedState {
        let mut hist = HistoryWindow::zeroed(h, 1, 1);
        hist.obs[0][0] = 4.0;
        hist.u_phys_hist[0] = 1.0;
        hist.u_hist[0] = Action::On;
        hist.exo_hist[0][0] = 10.0;
        AugmentedState {
            time: TimeSlot::new(0, 25).unwrap(),
            hist,
            x_exo: vec![10.0],
        }
    }

    #[test]
    fn layout_dimensions() {
        let l = InputLayout {
            h: 20,
            obs_dim: 0,
            exo_dim: 1,
        };
        assert_eq!(l.n_series(), 3);
        assert_eq!(l.aux_dim(), 5);
        assert_eq!(l.flat_dim(), 3 + 60 + 1 + 1);

        let boiler = InputLayout {
            h: 40,
            obs_dim: 2,
            exo_dim: 0,
        };
        assert_eq!(boiler.n_series(), 4);
        assert_eq!(boiler.aux_dim(), 4);
        assert_eq!(boiler.flat_dim(), 3 + 160 + 1);
    }

    #[test]
    fn encoding_shapes_and_action_slot() {
        let layout = InputLayout {
            h: 2,
            obs_dim: 1,
            exo_dim: 1,
        };
        let x = state(2);
        let mut enc = encode_state(&layout, &Scaler::identity(&layout), &x);
        assert_eq!(enc.seq.len(), layout.h * layout.n_series());
        assert_eq!(enc.aux.len(), layout.aux_dim());
        assert_eq!(enc.flat.len(), layout.flat_dim());

        assert_eq!(enc.flat.last(), Some(&0.0));
        enc.set_action(Action::On);
        assert_eq!(enc.flat.last(), Some(&1.0));
        assert_eq!(enc.aux.last(), Some(&1.0));
    }

    #[test]
    fn scaler_maps_batch_range_to_unit_interval() {
        let layout = InputLayout {
            h: 2,
            obs_dim: 1,
            exo_dim: 1,
        };
        let x = state(2);
        let scaler = Scaler::from_states(&layout, std::iter::once(&x));
        let enc = encode_state(&layout, &scaler, &x);
        // obs series spans [0, 4] -> newest entry scales to 1, padded to 0
        let n = layout.n_series();
        assert_eq!(enc.seq[2], 1.0);
        assert_eq!(enc.seq[n + 2], 0.0);
        // constant exogenous collapses to 0
        assert_eq!(*enc.aux.get(3).unwrap(), 0.0);
    }

    #[test]
    fn validate_rejects_mismatched_states() {
        let layout = InputLayout {
            h: 3,
            obs_dim: 1,
            exo_dim: 1,
        };
        assert!(layout.validate_state(&state(2)).is_err());
        let ok_layout = InputLayout {
            h: 2,
            obs_dim: 1,
            exo_dim: 1,
        };
        assert!(ok_layout.validate_state(&state(2)).is_ok());
    }
}
