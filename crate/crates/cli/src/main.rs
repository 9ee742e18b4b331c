//! `loadshift` — batch reinforcement learning experiments for
//! thermostatically controlled loads under sparse observations.

mod config;
mod plotdata;
mod run;
mod selftest;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{AppConfig, Manifest, OUTPUT_ENV};
use loadshift_core::approx::ApproxKind;
use loadshift_core::harness::Scenario;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "loadshift",
    version,
    about = "Demand-response experiments: simulate flexible loads and learn \
             price-following control from sparse observations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment matrix (approximators x seeds) plus baselines
    Run(RunArgs),
    /// Run only the no-control and full-state baselines
    Baselines(RunArgs),
    /// Reduce a results directory to tidy plot series with bands
    Plotdata {
        /// Directory holding daily.csv from a previous run
        results: PathBuf,
        /// Output file (defaults to plotdata.csv inside the results dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exercise the numeric oracles and gradient checks
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Heatpump,
    Boiler,
}

impl From<ScenarioArg> for Scenario {
    fn from(v: ScenarioArg) -> Self {
        match v {
            ScenarioArg::Heatpump => Scenario::HeatPump,
            ScenarioArg::Boiler => Scenario::Boiler,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxArg {
    Mlp,
    Cnn,
    Lstm,
    Trees,
}

impl From<ApproxArg> for ApproxKind {
    fn from(v: ApproxArg) -> Self {
        match v {
            ApproxArg::Mlp => ApproxKind::Mlp,
            ApproxArg::Cnn => ApproxKind::Cnn,
            ApproxArg::Lstm => ApproxKind::Lstm,
            ApproxArg::Trees => ApproxKind::ExtraTrees,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-execute a previous run exactly from its manifest.json
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Scenario override
    #[arg(long)]
    scenario: Option<ScenarioArg>,
    /// Approximator override (runs only this one)
    #[arg(long)]
    approx: Option<ApproxArg>,
    /// Learning-day override
    #[arg(long)]
    days: Option<usize>,
    /// Seed-list override, comma separated
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory (default: config, then $LOADSHIFT_OUT, then ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the no-control and full-state baseline runs
    #[arg(long)]
    no_baselines: bool,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<(AppConfig, PathBuf)> {
        let mut cfg = if let Some(manifest) = &self.manifest {
            Manifest::from_path(manifest)?.config
        } else if let Some(path) = &self.config {
            AppConfig::from_path(path)?
        } else {
            AppConfig::default()
        };

        if let Some(s) = self.scenario {
            cfg.run.scenario = s.into();
        }
        if let Some(a) = self.approx {
            cfg.run.approximators = vec![a.into()];
        }
        if let Some(d) = self.days {
            cfg.run.days = d;
        }
        if let Some(seeds) = &self.seeds {
            cfg.run.seeds = seeds.clone();
        }
        if self.no_baselines {
            cfg.baselines.no_control = false;
            cfg.baselines.full_state = false;
        }
        cfg.validate()?;

        let out = self
            .out
            .clone()
            .or_else(|| {
                std::env::var_os(OUTPUT_ENV).map(|root| {
                    let mut p = PathBuf::from(root);
                    p.push(cfg.run.scenario.name());
                    p
                })
            })
            .unwrap_or_else(|| cfg.output.root.clone());
        Ok((cfg, out))
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Run(args) => {
            let (cfg, out) = args.resolve()?;
            run::execute(&cfg, &out, true)
        }
        Cmd::Baselines(args) => {
            let (cfg, out) = args.resolve()?;
            run::execute(&cfg, &out, false)
        }
        Cmd::Plotdata { results, out } => {
            if !results.join("daily.csv").exists() {
                bail!(
                    "{} holds no daily.csv; run an experiment first",
                    results.display()
                );
            }
            let csv = plotdata::render(&results)?;
            let target = out.unwrap_or_else(|| results.join("plotdata.csv"));
            run::write_atomic(&target, &csv)?;
            println!("wrote {}", target.display());
            Ok(())
        }
        Cmd::Selftest => {
            let failures = selftest::run();
            if failures > 0 {
                bail!("{failures} selftest check(s) failed");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // clap handles usage errors itself with exit code 2
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
