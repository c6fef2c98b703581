use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpumix::{Error, GpuRegistry, ModelParams, Result};
use gpumix_cli::{
    cmd_compare, cmd_plan, cmd_profile_gen, cmd_profile_import, cmd_simulate, cmd_sweep,
    exit_code, render_profiles, ScenarioSpec, SimulateOptions, WorkloadSpec, DEFAULT_MODEL,
};
use serde::Serialize;

/// Plan cost-minimal mixes of GPU types for an LLM serving workload.
#[derive(Parser)]
#[command(name = "gpumix", version)]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate throughput profiles.
    #[command(subcommand)]
    Profile(ProfileCommand),
    /// Solve for the cheapest allocation.
    Plan(Scenario),
    /// Compare the mixed allocation with single-GPU-type baselines.
    Compare(Scenario),
    /// Run the comparison for several request rates.
    Sweep {
        #[command(flatten)]
        scenario: Scenario,
        /// Comma-separated ascending rates, req/s.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
    },
    /// Provision an allocation and simulate serving requests.
    Simulate {
        #[command(flatten)]
        scenario: Scenario,
        /// Plan JSON (from `plan --json` or `plan --out`); planned on the fly when absent.
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        requests: usize,
        /// Replay the trace's recorded arrival times.
        #[arg(long)]
        replay: bool,
        /// Per-request CSV output.
        #[arg(long)]
        requests_out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ProfileCommand {
    /// Synthesize a profile for every GPU in the registry.
    Gen {
        #[arg(long)]
        gpus: Option<PathBuf>,
        #[arg(long, default_value_t = 120.0)]
        slo_ms: f64,
        #[arg(long, default_value = DEFAULT_MODEL)]
        model: String,
        /// Directory for the profile files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate measured profile files.
    Import { files: Vec<PathBuf> },
    /// Print (or write) the built-in GPU registry.
    Fleet {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Scenario {
    /// Scenario JSON; other flags override its fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Preset name (short, long, mixed-80-20), histogram .json or trace .csv.
    #[arg(long)]
    workload: Option<String>,
    /// Expected request rate, req/s.
    #[arg(long)]
    rate: Option<f64>,
    /// TPOT SLO in milliseconds.
    #[arg(long)]
    slo_ms: Option<f64>,
    /// GPU registry JSON (default: the built-in fleet).
    #[arg(long)]
    gpus: Option<PathBuf>,
    /// Measured profile JSON; repeat once per GPU type.
    #[arg(long = "profile")]
    profiles: Vec<PathBuf>,
    #[arg(long)]
    slice_factor: Option<u32>,
    #[arg(long)]
    over_provision: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    time_budget_s: Option<f64>,
    /// Simulation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file: the JSON report, or the TPOT CDF for `simulate`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Scenario {
    fn resolve(&self) -> Result<ScenarioSpec> {
        let mut spec = match &self.scenario {
            Some(path) => ScenarioSpec::load(path)?,
            None => {
                let workload = self.workload.as_deref().ok_or_else(|| {
                    Error::InvalidInput("--workload is required without --scenario".into())
                })?;
                let rate = self.rate.ok_or_else(|| {
                    Error::InvalidInput("--rate is required without --scenario".into())
                })?;
                ScenarioSpec::new(WorkloadSpec::parse(workload)?, rate, 120.0)
            }
        };
        if let Some(w) = &self.workload {
            spec.workload = WorkloadSpec::parse(w)?;
        }
        if let Some(v) = self.rate {
            spec.total_rate = v;
        }
        if let Some(v) = self.slo_ms {
            spec.slo_tpot_ms = v;
        }
        if self.gpus.is_some() {
            spec.gpus = self.gpus.clone();
        }
        if !self.profiles.is_empty() {
            spec.profiles = self.profiles.clone();
        }
        if let Some(v) = self.slice_factor {
            spec.slice_factor = v;
        }
        if let Some(v) = self.over_provision {
            spec.over_provision = v;
        }
        if let Some(v) = &self.model {
            spec.model = v.clone();
        }
        if let Some(v) = self.time_budget_s {
            spec.time_budget_s = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Prints the report and writes its JSON to `out` when given.
fn emit(json: bool, out: Option<&PathBuf>, value: &impl Serialize, text: String) -> Result<()> {
    let encoded = to_json(value)?;
    if let Some(path) = out {
        std::fs::write(path, &encoded)?;
    }
    print!("{}", if json { encoded } else { text });
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Profile(ProfileCommand::Gen {
            gpus,
            slo_ms,
            model,
            out,
        }) => {
            let registry = match gpus {
                Some(path) => GpuRegistry::load(path)?,
                None => GpuRegistry::default(),
            };
            let model = ModelParams::preset(&model)?;
            let summaries = cmd_profile_gen(&registry, &model, slo_ms, out.as_deref())?;
            emit(json, None, &summaries, render_profiles(&summaries))
        }
        Command::Profile(ProfileCommand::Import { files }) => {
            if files.is_empty() {
                return Err(Error::InvalidInput("no profile files given".into()));
            }
            let summaries = cmd_profile_import(&files)?;
            emit(json, None, &summaries, render_profiles(&summaries))
        }
        Command::Profile(ProfileCommand::Fleet { out }) => {
            let text = GpuRegistry::default().to_json()? + "\n";
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Plan(scenario) => {
            let report = cmd_plan(&scenario.resolve()?)?;
            emit(json, scenario.out.as_ref(), &report, report.render())
        }
        Command::Compare(scenario) => {
            let report = cmd_compare(&scenario.resolve()?)?;
            emit(json, scenario.out.as_ref(), &report, report.render())
        }
        Command::Sweep { scenario, rates } => {
            let report = cmd_sweep(&scenario.resolve()?, &rates)?;
            emit(json, scenario.out.as_ref(), &report, report.render())
        }
        Command::Simulate {
            scenario,
            allocation,
            requests,
            replay,
            requests_out,
        } => {
            let spec = scenario.resolve()?;
            let options = SimulateOptions {
                allocation,
                seed: scenario.seed,
                n_requests: requests,
                replay,
                cdf_out: scenario.out.clone(),
                requests_out,
            };
            let report = cmd_simulate(&spec, &options)?;
            emit(json, None, &report, report.render())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
