//! Declarative experiment configuration: a TOML file in which every model
//! constant appears as a defaulted key, so a config file (or the manifest
//! echoing it) fully determines a run.

use anyhow::{bail, Context};
use loadshift_core::approx::{ApproxConfig, ApproxKind, TrainConfig};
use loadshift_core::envs::{BuildingParams, TankParams};
use loadshift_core::harness::{BaselineToggles, DataConfig, Scenario, ScenarioConfig};
use loadshift_core::util::config_hash;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable providing the default output root.
pub const OUTPUT_ENV: &str = "LOADSHIFT_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub scenario: Scenario,
    pub days: usize,
    pub eval_days: usize,
    /// History depth; 0 picks the scenario default (20 or 40).
    pub h: usize,
    /// Agents to run, one experiment per entry.
    pub approximators: Vec<ApproxKind>,
    pub baseline_approx: ApproxKind,
    pub seeds: Vec<u64>,
    pub fqi_iterations: usize,
    pub forecast_noise_std: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let base = ScenarioConfig::default();
        RunSection {
            scenario: base.scenario,
            days: base.days,
            eval_days: base.eval_days,
            h: base.h,
            approximators: vec![base.approx],
            baseline_approx: base.baseline_approx,
            seeds: base.seeds,
            fqi_iterations: base.fqi_iterations,
            forecast_noise_std: base.forecast_noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory that receives result CSVs and the manifest.
    pub root: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            root: PathBuf::from("results"),
        }
    }
}

/// The whole config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub run: RunSection,
    pub training: TrainConfig,
    pub shapes: ApproxConfig,
    pub data: DataConfig,
    pub baselines: BaselineToggles,
    pub building: BuildingParams,
    pub tank: TankParams,
    pub output: OutputSection,
}

impl AppConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: AppConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.run.days < 1 {
            bail!("run.days must be >= 1");
        }
        if self.run.seeds.is_empty() {
            bail!("run.seeds must not be empty");
        }
        if self.run.approximators.is_empty() {
            bail!("run.approximators must not be empty");
        }
        if self.run.fqi_iterations < 1 {
            bail!("run.fqi_iterations must be >= 1");
        }
        Ok(())
    }

    /// Hash over every key that affects results (the output section does
    /// not take part).
    pub fn result_hash(&self) -> String {
        config_hash(&(
            &self.run,
            &self.training,
            &self.shapes,
            &self.data,
            &self.baselines,
            &self.building,
            &self.tank,
        ))
    }

    /// Scenario configuration for one approximator of the matrix.
    pub fn scenario_config(&self, approx: ApproxKind) -> ScenarioConfig {
        ScenarioConfig {
            scenario: self.run.scenario,
            days: self.run.days,
            eval_days: self.run.eval_days,
            h: self.run.h,
            approx,
            baseline_approx: self.run.baseline_approx,
            seeds: self.run.seeds.clone(),
            train: self.training,
            shapes: self.shapes,
            fqi_iterations: self.run.fqi_iterations,
            forecast_noise_std: self.run.forecast_noise_std,
            data: self.data.clone(),
            baselines: self.baselines,
            building: self.building,
            tank: self.tank.clone(),
        }
    }
}

/// Replayable record of a run: the resolved configuration plus its hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub scenario: Scenario,
    pub approximators: Vec<ApproxKind>,
    pub seeds: Vec<u64>,
    pub config: AppConfig,
}

impl Manifest {
    pub fn new(config: &AppConfig) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.result_hash(),
            scenario: config.run.scenario,
            approximators: config.run.approximators.clone(),
            seeds: config.run.seeds.clone(),
            config: config.clone(),
        }
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| "cannot parse manifest")?;
        manifest.config.validate()?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_is_identity() {
        let cfg = AppConfig::default();
        let text = cfg.to_toml();
        let back: AppConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // and once more through the serialised form
        assert_eq!(text, back.to_toml());
    }

    #[test]
    fn hash_ignores_output_but_tracks_parameters() {
        let cfg = AppConfig::default();
        let mut other = cfg.clone();
        other.output.root = PathBuf::from("elsewhere");
        assert_eq!(cfg.result_hash(), other.result_hash());

        let mut changed = cfg.clone();
        changed.run.days += 1;
        assert_ne!(cfg.result_hash(), changed.result_hash());

        let mut changed = cfg;
        changed.building.cop = 2.5;
        assert_ne!(changed.result_hash(), AppConfig::default().result_hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<AppConfig>("[run]\nbogus_key = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }
}
