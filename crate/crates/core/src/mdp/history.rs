//! History windows and the state-augmentation operation.
//!
//! Each control slot the harness logs one [`HistoryRecord`] carrying the
//! observation that became available at the *end* of that slot together with
//! the actions taken *during* it. Windowing the newest `h` records therefore
//! reproduces the index alignment the approximators expect: observations at
//! `k, …, k-h+1` next to actions at `k-1, …, k-h`.

use super::{Action, AugmentedState, PhysicalAction, TimeSlot};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// What gets logged at the end of one control slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// Partial physical observation available at the end of the slot.
    pub o_phys: Vec<f64>,
    /// Physical action applied during the slot.
    pub u_phys: PhysicalAction,
    /// Action requested for the slot.
    pub u: Action,
    /// Exogenous variables realised during the slot.
    pub x_exo: Vec<f64>,
}

/// Fixed-length window over the most recent records, newest first.
/// Entries before the start of an episode are zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryWindow {
    /// `h` rows of partial observations (row 0 is the newest).
    pub obs: Vec<Vec<f64>>,
    /// `h` physical-action fractions, newest first.
    pub u_phys_hist: Vec<f64>,
    /// `h` requested actions, newest first.
    pub u_hist: Vec<Action>,
    /// `h` rows of exogenous values, newest first (empty rows when the
    /// scenario carries no exogenous series).
    pub exo_hist: Vec<Vec<f64>>,
}

impl HistoryWindow {
    /// All-zero window with the given depth and per-record dimensions.
    pub fn zeroed(h: usize, obs_dim: usize, exo_dim: usize) -> Self {
        HistoryWindow {
            obs: vec![vec![0.0; obs_dim]; h],
            u_phys_hist: vec![0.0; h],
            u_hist: vec![Action::Off; h],
            exo_hist: vec![vec![0.0; exo_dim]; h],
        }
    }

    /// History depth `h`.
    pub fn depth(&self) -> usize {
        self.u_hist.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.first().map_or(0, Vec::len)
    }

    pub fn exo_dim(&self) -> usize {
        self.exo_hist.first().map_or(0, Vec::len)
    }
}

/// Bounded ring buffer of slot records with fixed per-record dimensions.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    records: VecDeque<HistoryRecord>,
    capacity: usize,
    obs_dim: usize,
    exo_dim: usize,
}

impl HistoryBuffer {
    /// Creates a buffer able to serve windows up to depth `capacity`.
    pub fn new(capacity: usize, obs_dim: usize, exo_dim: usize) -> Self {
        HistoryBuffer {
            records: VecDeque::with_capacity(capacity + 1),
            capacity,
            obs_dim,
            exo_dim,
        }
    }

    /// Appends the record for the slot that just finished, evicting the
    /// oldest entry once the capacity is exceeded.
    pub fn push(&mut self, record: HistoryRecord) -> Result<()> {
        if record.o_phys.len() != self.obs_dim || record.x_exo.len() != self.exo_dim {
            return Err(Error::invalid_argument(format!(
                "record dims ({}, {}) do not match buffer dims ({}, {})",
                record.o_phys.len(),
                record.x_exo.len(),
                self.obs_dim,
                self.exo_dim
            )));
        }
        self.records.push_back(record);
        if self.records.len() > self.capacity {
            self.records.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn exo_dim(&self) -> usize {
        self.exo_dim
    }

    /// Records from newest to oldest.
    fn iter_newest_first(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.records.iter().rev()
    }
}

/// Builds the augmented state for a decision slot from the ring buffer of
/// past records: the newest `h` records newest-first, zero-padded when fewer
/// than `h` exist.
pub fn augment(
    buffer: &HistoryBuffer,
    h: usize,
    time: TimeSlot,
    x_exo: Vec<f64>,
) -> Result<AugmentedState> {
    if h == 0 {
        return Err(Error::invalid_argument("history depth h must be >= 1"));
    }
    if buffer.capacity() < h {
        return Err(Error::invalid_argument(format!(
            "buffer capacity {} cannot serve history depth {h}",
            buffer.capacity()
        )));
    }

    let mut hist = HistoryWindow::zeroed(h, buffer.obs_dim(), buffer.exo_dim());
    for (slot, record) in buffer.iter_newest_first().take(h).enumerate() {
        hist.obs[slot].copy_from_slice(&record.o_phys);
        hist.u_phys_hist[slot] = record.u_phys.fraction();
        hist.u_hist[slot] = record.u;
        hist.exo_hist[slot].copy_from_slice(&record.x_exo);
    }

    Ok(AugmentedState { time, hist, x_exo })
}
