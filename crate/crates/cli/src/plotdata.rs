//! The `plotdata` subcommand: reduces `daily.csv` to tidy long-format
//! series (mean and 2-sigma band per day) consumable by any plotting tool.

use anyhow::{bail, Context};
use loadshift_core::harness::{band_curve, BandCurve};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
struct DailyRow {
    label: String,
    seed: u64,
    day: u32,
    cost_eur: f64,
    scaled_cost: Option<f64>,
    config_hash: String,
}

fn parse_daily(path: &Path) -> anyhow::Result<Vec<DailyRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 9 {
            bail!("daily.csv line {}: expected 9 fields", idx + 1);
        }
        let run_id = fields[0];
        let label = run_id
            .rsplitn(2, "-s")
            .nth(1)
            .unwrap_or(run_id)
            .to_string();
        rows.push(DailyRow {
            label,
            seed: fields[1].parse().context("seed")?,
            day: fields[2].parse().context("day")?,
            cost_eur: fields[3].parse().context("cost_eur")?,
            scaled_cost: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().context("scaled_cost")?)
            },
            config_hash: fields[8].to_string(),
        });
    }
    if rows.is_empty() {
        bail!("daily.csv holds no data rows");
    }
    Ok(rows)
}

fn curve_or_flat(series: &[Vec<f64>]) -> anyhow::Result<BandCurve> {
    if series.len() >= 2 {
        Ok(band_curve(series)?)
    } else {
        Ok(BandCurve {
            mean: series[0].clone(),
            lo: series[0].clone(),
            hi: series[0].clone(),
        })
    }
}

/// Builds `plotdata.csv` from a results directory containing `daily.csv`.
pub fn render(results_dir: &Path) -> anyhow::Result<String> {
    let rows = parse_daily(&results_dir.join("daily.csv"))?;

    let mut hashes: Vec<&str> = rows.iter().map(|r| r.config_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    if hashes.len() > 1 {
        bail!(
            "refusing to aggregate results with mixed config hashes: {}",
            hashes.join(", ")
        );
    }
    let hash = hashes[0].to_string();

    // (label, seed) -> day-ordered costs
    let mut by_run: BTreeMap<(String, u64), Vec<(u32, f64, Option<f64>)>> = BTreeMap::new();
    for row in &rows {
        by_run
            .entry((row.label.clone(), row.seed))
            .or_default()
            .push((row.day, row.cost_eur, row.scaled_cost));
    }
    let mut by_label: BTreeMap<String, Vec<Vec<(u32, f64, Option<f64>)>>> = BTreeMap::new();
    for ((label, _seed), mut days) in by_run {
        days.sort_by_key(|(d, _, _)| *d);
        by_label.entry(label).or_default().push(days);
    }

    let mut out = String::from("series,day,value,lo,hi,config_hash\n");
    for (label, seed_days) in by_label {
        let cumulative: Vec<Vec<f64>> = seed_days
            .iter()
            .map(|days| {
                let mut acc = 0.0;
                days.iter()
                    .map(|(_, c, _)| {
                        acc += c;
                        acc
                    })
                    .collect()
            })
            .collect();
        let curve = curve_or_flat(&cumulative)?;
        for day in 0..curve.mean.len() {
            let _ = writeln!(
                out,
                "cumulative_cost:{label},{day},{},{},{},{hash}",
                curve.mean[day], curve.lo[day], curve.hi[day]
            );
        }

        // scaled cost, only over days where every seed carries a value
        let n_days = seed_days.iter().map(Vec::len).min().unwrap_or(0);
        let mut scaled: Vec<Vec<f64>> = vec![Vec::new(); seed_days.len()];
        let mut scaled_days = Vec::new();
        for d in 0..n_days {
            if seed_days.iter().all(|s| s[d].2.is_some()) {
                scaled_days.push(seed_days[0][d].0);
                for (i, s) in seed_days.iter().enumerate() {
                    scaled[i].push(s[d].2.unwrap());
                }
            }
        }
        if !scaled_days.is_empty() {
            let curve = curve_or_flat(&scaled)?;
            for (i, day) in scaled_days.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "scaled_cost:{label},{day},{},{},{},{hash}",
                    curve.mean[i], curve.lo[i], curve.hi[i]
                );
            }
        }
    }
    Ok(out)
}
