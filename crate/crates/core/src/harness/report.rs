//! CSV emission for experiment results.
//!
//! Three files per run set: `daily.csv` (one row per run-day), `slots.csv`
//! (one row per control slot), and `summary.csv` (per-approximator means
//! and bands). Every row carries the configuration hash so files from
//! different configurations cannot be mixed up silently.

use super::{band_curve, ExperimentRun};
use crate::Result;
use std::collections::BTreeMap;
use std::fmt::Write;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders `daily.csv`. Runs are ordered by label then seed, days ascending,
/// so equal inputs produce byte-identical output.
pub fn daily_csv(runs: &[&ExperimentRun], config_hash: &str) -> String {
    let mut ordered: Vec<&&ExperimentRun> = runs.iter().collect();
    ordered.sort_by_key(|r| (r.run_label(), r.seed));

    let mut out = String::new();
    out.push_str(
        "run_id,seed,day,cost_eur,scaled_cost,policy_distance,comfort_violation_min,phase,config_hash\n",
    );
    for run in ordered {
        let id = run.run_id();
        for day in &run.days {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                id,
                run.seed,
                day.day,
                day.cost_eur,
                opt(day.scaled_cost),
                opt(day.policy_distance),
                day.comfort_violation_min,
                day.phase,
                config_hash
            );
        }
    }
    out
}

/// Renders `slots.csv`.
pub fn slots_csv(runs: &[&ExperimentRun], config_hash: &str) -> String {
    let mut ordered: Vec<&&ExperimentRun> = runs.iter().collect();
    ordered.sort_by_key(|r| (r.run_label(), r.seed));

    let mut out = String::new();
    out.push_str("run_id,day,quarter,u,u_phys,price,t_air_or_soc,config_hash\n");
    for run in ordered {
        let id = run.run_id();
        for slot in &run.slots {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                id,
                slot.day,
                slot.quarter,
                slot.u.as_f64() as u8,
                slot.u_phys,
                slot.price,
                slot.metric,
                config_hash
            );
        }
    }
    out
}

/// Renders `summary.csv`: per run label, the across-seed mean cumulative
/// cost with its 2-sigma band plus the mean scaled cost where defined.
/// Single-seed groups report a zero-width band.
pub fn summary_csv(runs: &[&ExperimentRun], config_hash: &str) -> Result<String> {
    let mut groups: BTreeMap<String, Vec<&ExperimentRun>> = BTreeMap::new();
    for run in runs {
        groups.entry(run.run_label()).or_default().push(run);
    }

    let mut out = String::new();
    out.push_str(
        "approx,day,mean_cumulative_cost_eur,cum_lo,cum_hi,mean_scaled_cost,config_hash\n",
    );
    for (label, group) in groups {
        let cumulative: Vec<Vec<f64>> = group.iter().map(|r| r.cumulative_costs()).collect();
        let curve = if cumulative.len() >= 2 {
            band_curve(&cumulative)?
        } else {
            super::BandCurve {
                mean: cumulative[0].clone(),
                lo: cumulative[0].clone(),
                hi: cumulative[0].clone(),
            }
        };
        let n_days = curve.mean.len();
        for day in 0..n_days {
            let scaled: Vec<f64> = group
                .iter()
                .filter_map(|r| r.days.get(day).and_then(|d| d.scaled_cost))
                .collect();
            let mean_scaled = if scaled.is_empty() {
                None
            } else {
                Some(scaled.iter().sum::<f64>() / scaled.len() as f64)
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                label,
                day,
                curve.mean[day],
                curve.lo[day],
                curve.hi[day],
                opt(mean_scaled),
                config_hash
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::ApproxKind;
    use crate::harness::{DayRecord, Phase, RunVariant, Scenario, SlotRow};
    use crate::mdp::Action;

    fn stub_run(seed: u64, costs: &[f64]) -> ExperimentRun {
        ExperimentRun {
            scenario: Scenario::HeatPump,
            variant: RunVariant::Agent,
            approx: Some(ApproxKind::Lstm),
            seed,
            days: costs
                .iter()
                .enumerate()
                .map(|(d, c)| DayRecord {
                    day: d as u32,
                    phase: Phase::Learn,
                    epsilon: 1.0,
                    cost_eur: *c,
                    actions: vec![Action::Off; 96],
                    comfort_violation_min: 0.0,
                    scaled_cost: Some(0.5),
                    policy_distance: None,
                    tank_min_top_c: None,
                })
                .collect(),
            slots: vec![SlotRow {
                day: 0,
                quarter: 1,
                u: Action::On,
                u_phys: 1.0,
                price: 0.05,
                metric: 21.0,
            }],
        }
    }

    #[test]
    fn csv_rendering_is_deterministic_and_ordered() {
        let a = stub_run(2, &[1.0, 2.0]);
        let b = stub_run(1, &[1.5, 2.5]);
        let one = daily_csv(&[&a, &b], "abc");
        let two = daily_csv(&[&b, &a], "abc");
        assert_eq!(one, two);
        assert!(one.lines().count() == 5);
        assert!(one.lines().nth(1).unwrap().contains("-s1,"));
    }

    #[test]
    fn summary_bands_enclose_the_mean() {
        let runs = [stub_run(1, &[1.0, 1.0]), stub_run(2, &[3.0, 3.0])];
        let refs: Vec<&ExperimentRun> = runs.iter().collect();
        let csv = summary_csv(&refs, "h").unwrap();
        let row = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        let (mean, lo, hi): (f64, f64, f64) = (
            fields[2].parse().unwrap(),
            fields[3].parse().unwrap(),
            fields[4].parse().unwrap(),
        );
        assert!(lo <= mean && mean <= hi);
        assert_eq!(mean, 2.0);
    }

    #[test]
    fn slot_rows_render_run_ids() {
        let run = stub_run(4, &[1.0]);
        let csv = slots_csv(&[&run], "xyz");
        assert!(csv.lines().nth(1).unwrap().starts_with("heatpump-lstm-s4,0,1,1,1,0.05,21,xyz"));
    }
}
