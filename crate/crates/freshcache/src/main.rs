//! Command-line front end for scenario configs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use freshcache::scenario::{allocation_rows, Policy, ScenarioResult};
use freshcache::{
    alternating_maximize, baseline_allocation, default_horizon, preset, preset_names, run_scenario,
    simulate_system, BaselinePolicy, Error, RateAllocation, ScenarioConfig, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "freshcache",
    version,
    about = "Freshness-optimal refresh rates for cache hierarchies",
    after_help = "CONFIG accepts a JSON file path or a built-in preset name; \
                  see `freshcache presets`."
)]
struct Cli {
    /// Scenario config: a JSON file path or a preset name.
    #[arg(long, global = true, value_name = "CONFIG")]
    config: Option<String>,
    /// Override the simulation seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result table here instead of stdout; a `.manifest.json`
    /// sidecar lands next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Result table format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the freshness-optimal allocation of the config's point.
    Optimize {
        /// Also store the solved allocation as JSON.
        #[arg(long, value_name = "PATH")]
        save_alloc: Option<PathBuf>,
    },
    /// Evaluate a non-adaptive budget split on the config's point.
    Baseline {
        #[arg(long, value_enum)]
        policy: BaselineArg,
        /// Also store the allocation as JSON.
        #[arg(long, value_name = "PATH")]
        save_alloc: Option<PathBuf>,
    },
    /// Score a stored allocation in closed form.
    Eval {
        /// Allocation JSON produced by `optimize --save-alloc` or by hand.
        #[arg(long, value_name = "PATH")]
        alloc: PathBuf,
    },
    /// Monte Carlo check of a stored allocation.
    Simulate {
        /// Allocation JSON produced by `optimize --save-alloc` or by hand.
        #[arg(long, value_name = "PATH")]
        alloc: PathBuf,
    },
    /// Expand the config's sweeps and evaluate every point and policy.
    Run,
    /// List the built-in scenarios, or print one config as JSON.
    Presets { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    LambdaProportional,
    LambdaInverse,
}

impl BaselineArg {
    fn policy(self) -> BaselinePolicy {
        match self {
            BaselineArg::LambdaProportional => BaselinePolicy::LambdaProportional,
            BaselineArg::LambdaInverse => BaselinePolicy::LambdaInverse,
        }
    }

    fn label(self) -> &'static str {
        match self {
            BaselineArg::LambdaProportional => Policy::LambdaProportional.name(),
            BaselineArg::LambdaInverse => Policy::LambdaInverse.name(),
        }
    }
}

fn main() {
    if let Err(err) = dispatch(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let spec = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = match preset(spec) {
        Some(cfg) => cfg,
        None => ScenarioConfig::load(spec)?,
    };
    if let Some(seed) = cli.seed {
        if let Some(sim) = cfg.simulation.as_mut() {
            sim.seed = seed;
        }
    }
    Ok(cfg)
}

fn single_point(cfg: &ScenarioConfig, command: &str) -> Result<(), Error> {
    if cfg.sweeps.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "`{command}` evaluates one point; drop the sweeps or use `run`"
        )))
    }
}

fn emit(result: &ScenarioResult, out: Option<&Path>, format: Format) -> Result<(), Error> {
    let table = match format {
        Format::Csv => result.to_csv_string(),
    };
    match out {
        Some(path) => {
            fs::write(path, &table)?;
            let mut manifest_path = path.as_os_str().to_os_string();
            manifest_path.push(".manifest.json");
            let manifest = serde_json::to_string_pretty(&result.manifest())?;
            fs::write(manifest_path, manifest + "\n")?;
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn save_allocation(path: &Path, alloc: &RateAllocation) -> Result<(), Error> {
    let body = serde_json::to_string_pretty(alloc)?;
    fs::write(path, body + "\n")?;
    Ok(())
}

fn load_allocation(path: &Path) -> Result<RateAllocation, Error> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Monte Carlo settings for explicit-allocation commands; simulation is
/// implied by the subcommand, so a missing config block means defaults.
fn sim_config(cfg: &ScenarioConfig, seed: Option<u64>) -> Result<SimConfig, Error> {
    let mut spec = cfg.simulation.unwrap_or_default();
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let profile = cfg.source.build()?;
    let min_rate = profile
        .lambdas
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(SimConfig {
        horizon: spec.horizon.unwrap_or_else(|| default_horizon(min_rate)),
        replications: spec.replications,
        seed: spec.seed,
        warmup: spec.warmup,
    })
}

fn result_from_rows(
    cfg: &ScenarioConfig,
    rows: Vec<freshcache::ScenarioRow>,
) -> ScenarioResult {
    ScenarioResult {
        rows,
        config: cfg.clone(),
        points: 1,
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Presets { name } => match name {
            None => {
                for name in preset_names() {
                    println!("{name}");
                }
                Ok(())
            }
            Some(name) => {
                let cfg = preset(name)
                    .ok_or_else(|| Error::Config(format!("no preset named `{name}`")))?;
                println!("{}", serde_json::to_string_pretty(&cfg)?);
                Ok(())
            }
        },
        Command::Run => {
            let cfg = load_config(&cli)?;
            let result = run_scenario(&cfg)?;
            emit(&result, cli.out.as_deref(), cli.format)
        }
        Command::Optimize { save_alloc } => {
            let cfg = load_config(&cli)?;
            single_point(&cfg, "optimize")?;
            let profile = cfg.source.build()?;
            let topo = cfg.topology.build(profile.n());
            let (alloc, trace) =
                alternating_maximize(&profile, &topo, cfg.optimizer.settings(), None)?;
            if let Some(path) = save_alloc {
                save_allocation(path, &alloc)?;
            }
            let estimate = match cfg.simulation {
                Some(_) => Some(simulate_system(
                    &profile,
                    &topo,
                    &alloc,
                    &sim_config(&cfg, cli.seed)?,
                )?),
                None => None,
            };
            let rows = allocation_rows(
                &cfg,
                Policy::Optimized.name(),
                &alloc,
                Some(&trace),
                estimate.as_ref(),
            )?;
            emit(&result_from_rows(&cfg, rows), cli.out.as_deref(), cli.format)
        }
        Command::Baseline { policy, save_alloc } => {
            let cfg = load_config(&cli)?;
            single_point(&cfg, "baseline")?;
            let profile = cfg.source.build()?;
            let topo = cfg.topology.build(profile.n());
            let alloc = baseline_allocation(policy.policy(), &profile, &topo)?;
            if let Some(path) = save_alloc {
                save_allocation(path, &alloc)?;
            }
            let estimate = match cfg.simulation {
                Some(_) => Some(simulate_system(
                    &profile,
                    &topo,
                    &alloc,
                    &sim_config(&cfg, cli.seed)?,
                )?),
                None => None,
            };
            let rows = allocation_rows(&cfg, policy.label(), &alloc, None, estimate.as_ref())?;
            emit(&result_from_rows(&cfg, rows), cli.out.as_deref(), cli.format)
        }
        Command::Eval { alloc } => {
            let cfg = load_config(&cli)?;
            single_point(&cfg, "eval")?;
            let alloc = load_allocation(alloc)?;
            let rows = allocation_rows(&cfg, "given", &alloc, None, None)?;
            emit(&result_from_rows(&cfg, rows), cli.out.as_deref(), cli.format)
        }
        Command::Simulate { alloc } => {
            let cfg = load_config(&cli)?;
            single_point(&cfg, "simulate")?;
            let alloc = load_allocation(alloc)?;
            let profile = cfg.source.build()?;
            let topo = cfg.topology.build(profile.n());
            let estimate = simulate_system(&profile, &topo, &alloc, &sim_config(&cfg, cli.seed)?)?;
            let rows = allocation_rows(&cfg, "given", &alloc, None, Some(&estimate))?;
            emit(&result_from_rows(&cfg, rows), cli.out.as_deref(), cli.format)
        }
    }
}
