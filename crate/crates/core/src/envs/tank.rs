//! Stratified electric water heater: 50 stacked layers, plug-flow draws,
//! a resistive element spanning the bottom layers, standing losses, and a
//! buoyancy correction that keeps the profile thermally stable.

use crate::mdp::{Action, PhysicalAction};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of tank layers; index 0 is the bottom, 49 the top.
pub const TANK_LAYERS: usize = 50;
/// Water density, kg per litre.
pub const WATER_KG_PER_L: f64 = 1.0;
/// Specific heat of water, J/(kg degC).
pub const SPECIFIC_HEAT_J_PER_KG_C: f64 = 4186.0;

/// Layer temperatures from bottom to top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TankState {
    temps_c: Vec<f64>,
}

impl TankState {
    /// Wraps a 50-layer profile.
    pub fn new(temps_c: Vec<f64>) -> Result<Self> {
        if temps_c.len() != TANK_LAYERS {
            return Err(Error::invalid_argument(format!(
                "tank state needs {TANK_LAYERS} layers, got {}",
                temps_c.len()
            )));
        }
        Ok(TankState { temps_c })
    }

    pub fn uniform(t_c: f64) -> Self {
        TankState {
            temps_c: vec![t_c; TANK_LAYERS],
        }
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps_c
    }

    pub fn top_temp(&self) -> f64 {
        self.temps_c[TANK_LAYERS - 1]
    }

    /// Total enthalpy relative to 0 degC, joules.
    pub fn enthalpy_j(&self, p: &TankParams) -> f64 {
        let layer_mass = p.layer_volume_l() * WATER_KG_PER_L;
        self.temps_c
            .iter()
            .map(|t| layer_mass * SPECIFIC_HEAT_J_PER_KG_C * t)
            .sum()
    }

    /// True when the profile is monotone non-decreasing bottom to top.
    pub fn is_stratified(&self) -> bool {
        self.temps_c.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Physical and control parameters of the water-heater scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TankParams {
    /// Tank volume, litres.
    pub volume_l: f64,
    /// Rated electric power, kW.
    pub p_rated_kw: f64,
    /// Thermostat band, degrees C.
    pub t_min_c: f64,
    pub t_max_c: f64,
    /// Mains inlet temperature, degrees C.
    pub t_inlet_c: f64,
    /// Ambient temperature around the tank, degrees C.
    pub t_ambient_c: f64,
    /// Total standing-loss coefficient, W/degC, split evenly per layer.
    pub ua_loss_w_per_c: f64,
    /// Heating element span, 1-based inclusive layer indices from the bottom.
    pub heater_span: (usize, usize),
    /// Thermostatic mixing valve setpoint, degrees C.
    pub mix_setpoint_c: f64,
    /// Internal integration step, seconds.
    pub dt_sim_s: f64,
    /// Control slot length, seconds.
    pub dt_ctrl_s: f64,
    /// Expected daily tap consumption, litres (used by the tap generator).
    pub mean_daily_draw_l: f64,
}

impl Default for TankParams {
    fn default() -> Self {
        TankParams {
            volume_l: 200.0,
            p_rated_kw: 2.3,
            t_min_c: 45.0,
            t_max_c: 65.0,
            t_inlet_c: 10.0,
            t_ambient_c: 20.0,
            ua_loss_w_per_c: 1.5,
            heater_span: (1, 10),
            mix_setpoint_c: 45.0,
            dt_sim_s: 5.0,
            dt_ctrl_s: 900.0,
            mean_daily_draw_l: 100.0,
        }
    }
}

impl TankParams {
    pub fn layer_volume_l(&self) -> f64 {
        self.volume_l / TANK_LAYERS as f64
    }

    pub fn substeps_per_slot(&self) -> usize {
        (self.dt_ctrl_s / self.dt_sim_s).round() as usize
    }

    pub fn dt_ctrl_hours(&self) -> f64 {
        self.dt_ctrl_s / 3600.0
    }

    fn heater_range(&self) -> std::ops::Range<usize> {
        (self.heater_span.0 - 1)..self.heater_span.1
    }
}

/// Per-slot aggregates for comfort and energy accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankStepStats {
    pub min_sensor_c: f64,
    pub max_sensor_c: f64,
    pub min_top_c: f64,
    /// Seconds during which water was drawn while the top layer sat below
    /// the mixing-valve setpoint (delivered-comfort shortfall).
    pub cold_draw_s: f64,
    /// Enthalpy carried out by draws net of the inlet refill, joules.
    pub outflow_enthalpy_j: f64,
}

/// Pools adjacent inverted layers to their volume-weighted mean until the
/// profile is monotone non-decreasing from bottom to top. Layers have equal
/// volume, so pool means are arithmetic.
fn settle_buoyancy(temps: &mut [f64]) {
    // (sum, count) pools, bottom to top.
    let mut pools: Vec<(f64, usize)> = Vec::with_capacity(temps.len());
    for &t in temps.iter() {
        let mut sum = t;
        let mut count = 1usize;
        while let Some(&(prev_sum, prev_count)) = pools.last() {
            if prev_sum * count as f64 > sum * prev_count as f64 {
                // lower pool warmer than this one: merge
                pools.pop();
                sum += prev_sum;
                count += prev_count;
            } else {
                break;
            }
        }
        pools.push((sum, count));
    }
    let mut idx = 0;
    for (sum, count) in pools {
        let mean = sum / count as f64;
        for t in temps[idx..idx + count].iter_mut() {
            *t = mean;
        }
        idx += count;
    }
}

/// Advances the tank over one control slot with detailed accounting.
///
/// Per substep: plug-flow advection of the draw (cold inlet at the bottom,
/// outflow at the top), heater power spread uniformly over the element span
/// scaled by `u_phys`, per-layer standing losses, then the buoyancy
/// correction.
pub fn tank_step_stats(
    state: &TankState,
    u_phys: PhysicalAction,
    draw_l: f64,
    p: &TankParams,
) -> Result<(TankState, TankStepStats)> {
    if !(0.0..=p.volume_l).contains(&draw_l) {
        return Err(Error::invalid_argument(format!(
            "draw of {draw_l} L per slot outside [0, {}]",
            p.volume_l
        )));
    }

    let n_sub = p.substeps_per_slot();
    let layer_vol = p.layer_volume_l();
    let layer_mass = layer_vol * WATER_KG_PER_L;
    let layer_heat_cap = layer_mass * SPECIFIC_HEAT_J_PER_KG_C;

    let vol_sub = draw_l / n_sub as f64;
    let shift = vol_sub / layer_vol; // fraction of a layer advected per substep

    let heater = p.heater_range();
    let span_layers = heater.len() as f64;
    let heat_per_layer_w = u_phys.fraction() * p.p_rated_kw * 1000.0 / span_layers;
    let ua_per_layer = p.ua_loss_w_per_c / TANK_LAYERS as f64;

    let mut temps = state.temps_c.clone();
    let mut prev = vec![0.0; TANK_LAYERS];
    let mut stats = TankStepStats {
        min_sensor_c: f64::INFINITY,
        max_sensor_c: f64::NEG_INFINITY,
        min_top_c: temps[TANK_LAYERS - 1],
        cold_draw_s: 0.0,
        outflow_enthalpy_j: 0.0,
    };

    for _ in 0..n_sub {
        if shift > 0.0 {
            let t_top_before = temps[TANK_LAYERS - 1];
            stats.outflow_enthalpy_j +=
                vol_sub * WATER_KG_PER_L * SPECIFIC_HEAT_J_PER_KG_C * (t_top_before - p.t_inlet_c);
            if t_top_before < p.mix_setpoint_c {
                stats.cold_draw_s += p.dt_sim_s;
            }
            prev.copy_from_slice(&temps);
            temps[0] = (1.0 - shift) * prev[0] + shift * p.t_inlet_c;
            for i in 1..TANK_LAYERS {
                temps[i] = (1.0 - shift) * prev[i] + shift * prev[i - 1];
            }
        }

        if heat_per_layer_w > 0.0 {
            let dt_heat = heat_per_layer_w * p.dt_sim_s / layer_heat_cap;
            for t in temps[heater.clone()].iter_mut() {
                *t += dt_heat;
            }
        }

        if p.ua_loss_w_per_c > 0.0 {
            for t in temps.iter_mut() {
                *t -= ua_per_layer * (*t - p.t_ambient_c) * p.dt_sim_s / layer_heat_cap;
            }
        }

        settle_buoyancy(&mut temps);

        let sensor = span_mean(&temps, &heater);
        stats.min_sensor_c = stats.min_sensor_c.min(sensor);
        stats.max_sensor_c = stats.max_sensor_c.max(sensor);
        stats.min_top_c = stats.min_top_c.min(temps[TANK_LAYERS - 1]);
    }

    Ok((TankState { temps_c: temps }, stats))
}

/// Advances the tank over one control slot.
pub fn tank_step(
    state: &TankState,
    u_phys: PhysicalAction,
    draw_l: f64,
    p: &TankParams,
) -> Result<TankState> {
    tank_step_stats(state, u_phys, draw_l, p).map(|(s, _)| s)
}

fn span_mean(temps: &[f64], span: &std::ops::Range<usize>) -> f64 {
    let slice = &temps[span.clone()];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Backup thermostat on the heating-element sensor (mean temperature over
/// the element span): forces ON below `t_min`, OFF above `t_max`, and passes
/// the request through in between.
pub fn thermostat_tank(state: &TankState, u: Action, p: &TankParams) -> PhysicalAction {
    let sensor = span_mean(state.temps(), &p.heater_range());
    if sensor < p.t_min_c {
        PhysicalAction::FULL
    } else if sensor > p.t_max_c {
        PhysicalAction::OFF
    } else {
        u.into()
    }
}

/// Observation exposed to the agent at the end of a slot: mass drawn during
/// the slot (kg) and the pre-valve top-layer temperature. Electricity
/// consumption reaches the agent through the physical-action history.
pub fn tank_observe(state_after: &TankState, draw_l: f64) -> Vec<f64> {
    vec![draw_l * WATER_KG_PER_L, state_after.top_temp()]
}

/// Temperature delivered at the tap after the thermostatic mixing valve.
pub fn delivered_temp(top_temp_c: f64, p: &TankParams) -> f64 {
    top_temp_c.min(p.mix_setpoint_c)
}

/// Normalised stored energy relative to the thermostat band, clamped below
/// at zero; values above one indicate charge beyond `t_max`.
pub fn tank_soc(state: &TankState, p: &TankParams) -> f64 {
    let mean: f64 = state.temps().iter().sum::<f64>() / TANK_LAYERS as f64;
    let soc = (mean - p.t_min_c) / (p.t_max_c - p.t_min_c);
    soc.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lossless(p: TankParams) -> TankParams {
        TankParams {
            ua_loss_w_per_c: 0.0,
            ..p
        }
    }

    #[test]
    fn no_flux_is_a_fixed_point() {
        let p = lossless(TankParams::default());
        let s = TankState::uniform(50.0);
        let next = tank_step(&s, PhysicalAction::OFF, 0.0, &p).unwrap();
        assert_eq!(next.temps(), s.temps());
    }

    #[test]
    fn heater_enthalpy_is_exact_without_losses() {
        let p = lossless(TankParams::default());
        let s = TankState::uniform(50.0);
        let next = tank_step(&s, PhysicalAction::FULL, 0.0, &p).unwrap();
        let gained = next.enthalpy_j(&p) - s.enthalpy_j(&p);
        let expected = p.p_rated_kw * 1000.0 * p.dt_ctrl_s;
        assert_abs_diff_eq!(gained, expected, epsilon = expected * 1e-9);
    }

    #[test]
    fn draw_enthalpy_matches_independent_balance() {
        // Independent oracle: with no losses and no heating, the tank loses
        // exactly the enthalpy of the outflow net of the inlet refill. On a
        // uniform 60 C tank the cold front never reaches the top within one
        // slot, so the outflow leaves at 60 C exactly.
        let p = lossless(TankParams::default());
        let s = TankState::uniform(60.0);
        let draw = 10.0;
        let next = tank_step(&s, PhysicalAction::OFF, draw, &p).unwrap();

        let removed = s.enthalpy_j(&p) - next.enthalpy_j(&p);
        let expected = draw * WATER_KG_PER_L * SPECIFIC_HEAT_J_PER_KG_C * (60.0 - p.t_inlet_c);
        assert!(
            (removed - expected).abs() / expected < 1e-6,
            "removed {removed} J, expected {expected} J"
        );
        // Cold water shows up at the bottom.
        assert!(next.temps()[0] < 60.0);
        assert!(next.top_temp() > 59.999);
    }

    #[test]
    fn oversized_draw_is_rejected() {
        let p = TankParams::default();
        let s = TankState::uniform(50.0);
        assert!(tank_step(&s, PhysicalAction::OFF, 200.1, &p).is_err());
        assert!(tank_step(&s, PhysicalAction::OFF, -1.0, &p).is_err());
    }

    #[test]
    fn stratification_holds_after_heating_and_draws() {
        let p = TankParams::default();
        let mut s = TankState::uniform(45.0);
        for i in 0..8 {
            let draw = if i % 3 == 0 { 12.0 } else { 0.0 };
            s = tank_step(&s, PhysicalAction::FULL, draw, &p).unwrap();
            assert!(s.is_stratified(), "inverted profile after slot {i}");
        }
    }

    #[test]
    fn buoyancy_settles_inversions_and_conserves_mean() {
        let mut temps = vec![55.0, 50.0, 45.0, 60.0, 40.0];
        let before: f64 = temps.iter().sum();
        settle_buoyancy(&mut temps);
        let after: f64 = temps.iter().sum();
        assert_abs_diff_eq!(before, after, epsilon = 1e-9);
        assert!(temps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn thermostat_band() {
        let p = TankParams::default();
        assert_eq!(
            thermostat_tank(&TankState::uniform(44.0), Action::Off, &p),
            PhysicalAction::FULL
        );
        assert_eq!(
            thermostat_tank(&TankState::uniform(66.0), Action::On, &p),
            PhysicalAction::OFF
        );
        assert_eq!(
            thermostat_tank(&TankState::uniform(55.0), Action::Off, &p),
            PhysicalAction::OFF
        );
        assert_eq!(
            thermostat_tank(&TankState::uniform(55.0), Action::On, &p),
            PhysicalAction::FULL
        );
    }

    #[test]
    fn observation_reports_draw_mass_and_top_temp() {
        let p = TankParams::default();
        let s = TankState::uniform(60.0);
        assert_eq!(tank_observe(&s, 0.0), vec![0.0, 60.0]);
        assert_eq!(tank_observe(&s, 10.0), vec![10.0, 60.0]);
        assert_eq!(delivered_temp(60.0, &p), 45.0);
        assert_eq!(delivered_temp(40.0, &p), 40.0);
    }

    #[test]
    fn soc_anchors() {
        let p = TankParams::default();
        assert_eq!(tank_soc(&TankState::uniform(45.0), &p), 0.0);
        assert_abs_diff_eq!(tank_soc(&TankState::uniform(65.0), &p), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tank_soc(&TankState::uniform(55.0), &p), 0.5, epsilon = 1e-12);
        assert_eq!(tank_soc(&TankState::uniform(10.0), &p), 0.0);
    }
}
