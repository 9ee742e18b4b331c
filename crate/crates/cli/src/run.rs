//! The `run` and `baselines` subcommands: execute the experiment matrix and
//! write result CSVs plus the replay manifest.

use crate::config::{AppConfig, Manifest};
use anyhow::{bail, Context};
use loadshift_core::approx::ApproxKind;
use loadshift_core::harness::report::{daily_csv, slots_csv, summary_csv};
use loadshift_core::harness::{
    attach_baseline_metrics, baseline_full_state, baseline_no_control, run_experiment,
    ExperimentRun,
};
use rayon::prelude::*;
use std::path::Path;

/// Writes a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "out".to_string())
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

enum Job {
    Agent(ApproxKind, u64),
    NoControl(u64),
    FullState(u64),
}

/// Executes the run matrix described by `config` and writes `daily.csv`,
/// `slots.csv`, `summary.csv`, and `manifest.json` into `out_dir`.
/// With `agents = false` only the baselines are produced.
pub fn execute(config: &AppConfig, out_dir: &Path, agents: bool) -> anyhow::Result<()> {
    config.validate()?;
    let hash = config.result_hash();

    let mut jobs: Vec<Job> = Vec::new();
    for &seed in &config.run.seeds {
        if agents {
            for &approx in &config.run.approximators {
                jobs.push(Job::Agent(approx, seed));
            }
        }
        if config.baselines.no_control || !agents {
            jobs.push(Job::NoControl(seed));
        }
        if config.baselines.full_state || !agents {
            jobs.push(Job::FullState(seed));
        }
    }

    let base_cfg = config.scenario_config(config.run.approximators[0]);
    let runs: Vec<ExperimentRun> = jobs
        .par_iter()
        .map(|job| -> anyhow::Result<ExperimentRun> {
            let run = match job {
                Job::Agent(approx, seed) => {
                    run_experiment(&config.scenario_config(*approx), *seed)?
                }
                Job::NoControl(seed) => baseline_no_control(&base_cfg, *seed)?,
                Job::FullState(seed) => baseline_full_state(&base_cfg, *seed)?,
            };
            Ok(run)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut agent_runs: Vec<ExperimentRun> = Vec::new();
    let mut nc_runs: Vec<ExperimentRun> = Vec::new();
    let mut fs_runs: Vec<ExperimentRun> = Vec::new();
    for run in runs {
        match run.variant {
            loadshift_core::harness::RunVariant::Agent => agent_runs.push(run),
            loadshift_core::harness::RunVariant::NoControl => nc_runs.push(run),
            loadshift_core::harness::RunVariant::FullState => fs_runs.push(run),
        }
    }

    let find = |set: &[ExperimentRun], seed: u64| -> Option<ExperimentRun> {
        set.iter().find(|r| r.seed == seed).cloned()
    };
    let fs_snapshot = fs_runs.clone();
    for run in agent_runs.iter_mut().chain(fs_runs.iter_mut()) {
        let nc = find(&nc_runs, run.seed);
        let fs = find(&fs_snapshot, run.seed);
        attach_baseline_metrics(run, nc.as_ref(), fs.as_ref());
    }

    let all: Vec<&ExperimentRun> = agent_runs
        .iter()
        .chain(nc_runs.iter())
        .chain(fs_runs.iter())
        .collect();
    if all.is_empty() {
        bail!("nothing to run: all baselines disabled and no agents requested");
    }

    write_atomic(&out_dir.join("daily.csv"), &daily_csv(&all, &hash))?;
    write_atomic(&out_dir.join("slots.csv"), &slots_csv(&all, &hash))?;
    write_atomic(&out_dir.join("summary.csv"), &summary_csv(&all, &hash)?)?;
    let manifest = Manifest::new(config);
    write_atomic(
        &out_dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).context("manifest serialisation")?,
    )?;
    write_atomic(&out_dir.join("config.toml"), &config.to_toml())?;

    for run in &all {
        let total: f64 = run.days.iter().map(|d| d.cost_eur).sum();
        println!(
            "{}: {} days, total cost {:.4} EUR",
            run.run_id(),
            run.days.len(),
            total
        );
    }
    println!(
        "wrote daily.csv, slots.csv, summary.csv, manifest.json to {} (config {})",
        out_dir.display(),
        &hash[..12]
    );
    Ok(())
}
