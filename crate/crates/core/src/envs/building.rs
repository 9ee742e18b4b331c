//! Second-order (2R2C) building model with an electric heat pump.
//!
//! Two lumped capacitances: the indoor air and a virtual building mass.
//! Heat enters the air node from the heat pump and leaks to the outside;
//! the mass node exchanges heat with the air only. Integration is explicit
//! Euler at `dt_sim` over one control slot.

use crate::mdp::{Action, PhysicalAction};
use serde::{Deserialize, Serialize};

/// Air and virtual-mass temperatures. Comfort is enforced by the backup
/// thermostat, not by clamping the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingState {
    pub t_air_c: f64,
    pub t_mass_c: f64,
}

impl BuildingState {
    pub fn uniform(t_c: f64) -> Self {
        BuildingState {
            t_air_c: t_c,
            t_mass_c: t_c,
        }
    }
}

/// Thermal and control parameters of the heat-pump scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildingParams {
    /// Air heat capacity, MJ/degC.
    pub c_air_mj_per_c: f64,
    /// Air-to-outside heat transfer, W/degC.
    pub u_loss_w_per_c: f64,
    /// Mass heat capacity, MJ/degC.
    pub c_mass_mj_per_c: f64,
    /// Air-to-mass heat transfer, kW/degC.
    pub h_mass_kw_per_c: f64,
    /// Rated electric power of the heat pump, kW.
    pub p_rated_kw: f64,
    /// Coefficient of performance (heat delivered per electric unit).
    pub cop: f64,
    /// Comfort band, degrees C.
    pub t_min_c: f64,
    pub t_max_c: f64,
    /// Std of the additive air-temperature disturbance applied once per
    /// control slot, degrees C.
    pub sigma_w_c: f64,
    /// Internal integration step, seconds.
    pub dt_sim_s: f64,
    /// Control slot length, seconds; must be an integer multiple of
    /// `dt_sim_s`.
    pub dt_ctrl_s: f64,
}

impl Default for BuildingParams {
    fn default() -> Self {
        BuildingParams {
            c_air_mj_per_c: 2.441,
            u_loss_w_per_c: 125.0,
            c_mass_mj_per_c: 9.0,
            h_mass_kw_per_c: 6.863,
            p_rated_kw: 2.3,
            cop: 3.0,
            t_min_c: 20.0,
            t_max_c: 23.0,
            sigma_w_c: 0.025,
            dt_sim_s: 60.0,
            dt_ctrl_s: 900.0,
        }
    }
}

impl BuildingParams {
    pub fn substeps_per_slot(&self) -> usize {
        (self.dt_ctrl_s / self.dt_sim_s).round() as usize
    }

    pub fn dt_ctrl_hours(&self) -> f64 {
        self.dt_ctrl_s / 3600.0
    }
}

/// Per-slot extremes, used for comfort accounting at simulation resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingStepStats {
    pub min_t_air_c: f64,
    pub max_t_air_c: f64,
    /// Seconds spent outside the comfort band during the slot.
    pub violation_s: f64,
}

/// Advances the building over one control slot and reports the air-node
/// extremes seen along the way. The disturbance `w_c` is added to the air
/// temperature once, at the end of the slot.
pub fn building_step_stats(
    state: BuildingState,
    u_phys: PhysicalAction,
    t_out_c: f64,
    w_c: f64,
    p: &BuildingParams,
) -> (BuildingState, BuildingStepStats) {
    debug_assert!(
        (p.dt_ctrl_s / p.dt_sim_s).fract().abs() < 1e-9,
        "dt_ctrl must be an integer multiple of dt_sim"
    );

    let c_air = p.c_air_mj_per_c * 1e6; // J/degC
    let c_mass = p.c_mass_mj_per_c * 1e6;
    let h_mass = p.h_mass_kw_per_c * 1000.0; // W/degC
    let heat_w = u_phys.fraction() * p.p_rated_kw * p.cop * 1000.0;

    let mut t_air = state.t_air_c;
    let mut t_mass = state.t_mass_c;
    let mut stats = BuildingStepStats {
        min_t_air_c: t_air,
        max_t_air_c: t_air,
        violation_s: 0.0,
    };

    for _ in 0..p.substeps_per_slot() {
        let flux_air =
            p.u_loss_w_per_c * (t_out_c - t_air) + h_mass * (t_mass - t_air) + heat_w;
        let flux_mass = h_mass * (t_air - t_mass);
        t_air += flux_air * p.dt_sim_s / c_air;
        t_mass += flux_mass * p.dt_sim_s / c_mass;

        stats.min_t_air_c = stats.min_t_air_c.min(t_air);
        stats.max_t_air_c = stats.max_t_air_c.max(t_air);
        if t_air < p.t_min_c || t_air > p.t_max_c {
            stats.violation_s += p.dt_sim_s;
        }
    }
    t_air += w_c;
    stats.min_t_air_c = stats.min_t_air_c.min(t_air);
    stats.max_t_air_c = stats.max_t_air_c.max(t_air);

    (
        BuildingState {
            t_air_c: t_air,
            t_mass_c: t_mass,
        },
        stats,
    )
}

/// Advances the building over one control slot.
pub fn building_step(
    state: BuildingState,
    u_phys: PhysicalAction,
    t_out_c: f64,
    w_c: f64,
    p: &BuildingParams,
) -> BuildingState {
    building_step_stats(state, u_phys, t_out_c, w_c, p).0
}

/// Backup thermostat: forces ON below the comfort band, OFF above it, and
/// passes the requested action through inside the band.
pub fn thermostat_building(state: &BuildingState, u: Action, p: &BuildingParams) -> PhysicalAction {
    if state.t_air_c < p.t_min_c {
        PhysicalAction::FULL
    } else if state.t_air_c > p.t_max_c {
        PhysicalAction::OFF
    } else {
        u.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = BuildingParams::default();
        let s = BuildingState::uniform(15.0);
        let next = building_step(s, PhysicalAction::OFF, 15.0, 0.0, &p);
        assert_eq!(next.t_air_c, 15.0);
        assert_eq!(next.t_mass_c, 15.0);
    }

    /// Reference integrator written independently of `building_step`:
    /// same scheme, same step, no shared code path.
    fn reference_euler_slot(
        mut t_air: f64,
        mut t_mass: f64,
        u: f64,
        t_out: f64,
        p: &BuildingParams,
    ) -> (f64, f64) {
        let steps = (p.dt_ctrl_s / p.dt_sim_s).round() as usize;
        for _ in 0..steps {
            let q_hp = u * p.p_rated_kw * 1000.0 * p.cop;
            let d_air = (p.u_loss_w_per_c * (t_out - t_air)
                + p.h_mass_kw_per_c * 1000.0 * (t_mass - t_air)
                + q_hp)
                / (p.c_air_mj_per_c * 1e6);
            let d_mass = p.h_mass_kw_per_c * 1000.0 * (t_air - t_mass) / (p.c_mass_mj_per_c * 1e6);
            t_air += d_air * p.dt_sim_s;
            t_mass += d_mass * p.dt_sim_s;
        }
        (t_air, t_mass)
    }

    #[test]
    fn matches_independent_euler_integrator() {
        let p = BuildingParams::default();
        let s = BuildingState {
            t_air_c: 20.0,
            t_mass_c: 20.0,
        };
        let next = building_step(s, PhysicalAction::FULL, 0.0, 0.0, &p);
        let (t_air_ref, t_mass_ref) = reference_euler_slot(20.0, 20.0, 1.0, 0.0, &p);
        assert_abs_diff_eq!(next.t_air_c, t_air_ref, epsilon = 1e-9);
        assert_abs_diff_eq!(next.t_mass_c, t_mass_ref, epsilon = 1e-9);
    }

    #[test]
    fn cools_monotonically_when_off_and_colder_outside() {
        let p = BuildingParams::default();
        let mut s = BuildingState::uniform(22.0);
        for _ in 0..8 {
            let next = building_step(s, PhysicalAction::OFF, 5.0, 0.0, &p);
            assert!(next.t_air_c < s.t_air_c);
            s = next;
        }
    }

    #[test]
    fn energy_sanity_without_losses() {
        // With no loss paths, one full-power slot raises the air node by
        // exactly P_rated * COP * dt_ctrl / C_air.
        let p = BuildingParams {
            u_loss_w_per_c: 0.0,
            h_mass_kw_per_c: 0.0,
            ..BuildingParams::default()
        };
        let s = BuildingState::uniform(20.0);
        let next = building_step(s, PhysicalAction::FULL, 0.0, 0.0, &p);
        let expected = 20.0 + p.p_rated_kw * 1000.0 * p.cop * p.dt_ctrl_s / (p.c_air_mj_per_c * 1e6);
        assert_abs_diff_eq!(next.t_air_c, expected, epsilon = 1e-12);
    }

    #[test]
    fn thermostat_overrules_outside_band() {
        let p = BuildingParams::default();
        let cold = BuildingState::uniform(19.5);
        let hot = BuildingState::uniform(23.5);
        let mid = BuildingState::uniform(21.5);
        assert_eq!(
            thermostat_building(&cold, Action::Off, &p),
            PhysicalAction::FULL
        );
        assert_eq!(
            thermostat_building(&hot, Action::On, &p),
            PhysicalAction::OFF
        );
        assert_eq!(
            thermostat_building(&mid, Action::On, &p),
            PhysicalAction::FULL
        );
        assert_eq!(
            thermostat_building(&mid, Action::Off, &p),
            PhysicalAction::OFF
        );
    }

    #[test]
    fn disturbance_is_applied_once_at_slot_end() {
        let p = BuildingParams::default();
        let s = BuildingState::uniform(15.0);
        let next = building_step(s, PhysicalAction::OFF, 15.0, 0.25, &p);
        assert_eq!(next.t_air_c, 15.25);
        assert_eq!(next.t_mass_c, 15.0);
    }
}
