//! Command-line front end: `dephasing run <scenario>` and `dephasing list`.

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::dynamics::builtin_propagators;
use crate::error::{Error, Result};
use crate::generator::builtin_generators;
use crate::rates::builtin_chi_rules;

use config::{BathChoice, ConfigOverrides, ExperimentConfig, ScanState, Scenario, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "dephasing", version, about = "Coupled qubits under collective dephasing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write CSV results.
    Run(Box<RunArgs>),
    /// List the registered generators, propagators and chi rules.
    List,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario to run; same as --scenario.
    #[arg(value_enum)]
    pub which: Option<Scenario>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    /// TOML file whose keys match the config field names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_qubits: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Comma-separated dissipation coefficients, one per qubit.
    #[arg(long, value_delimiter = ',')]
    pub chi: Option<Vec<f64>>,
    #[arg(long)]
    pub chi_rule: Option<String>,
    #[arg(long)]
    pub chi_amplitude: Option<f64>,
    #[arg(long, value_enum)]
    pub bath: Option<BathChoice>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Snapshot stride in integration steps.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub fit_window: Option<Vec<f64>>,
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub propagator: Option<String>,
    /// Comma-separated 1-based eigenstates to start chain runs from.
    #[arg(long, value_delimiter = ',')]
    pub initial_states: Option<Vec<usize>>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, value_enum)]
    pub scan_state: Option<ScanState>,
    /// Output directory; wins over the environment variable and the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Result<ConfigOverrides> {
        let scenario = match (self.which, self.scenario) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "scenario given twice: {} and {}",
                    a.label(),
                    b.label()
                )))
            }
            (a, b) => a.or(b),
        };
        let fit_window = match &self.fit_window {
            Some(w) if w.len() == 2 => Some([w[0], w[1]]),
            Some(w) => return Err(Error::Config(format!("fit window needs two values, got {}", w.len()))),
            None => None,
        };
        Ok(ConfigOverrides {
            scenario,
            n_qubits: self.n_qubits,
            omega: self.omega,
            lambda: self.lambda,
            chi: self.chi.clone(),
            chi_rule: self.chi_rule.clone(),
            chi_amplitude: self.chi_amplitude,
            bath: self.bath,
            dt: self.dt,
            t_end: self.t_end,
            snapshot_stride: self.stride,
            fit_window,
            coherence_window: None,
            generator: self.generator.clone(),
            propagator: self.propagator.clone(),
            initial_states: self.initial_states.clone(),
            n_min: self.n_min,
            n_max: self.n_max,
            scan_state: self.scan_state,
            output: None,
        })
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::from_file(p)?,
            None => ConfigOverrides::default(),
        };
        let env = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        ExperimentConfig::resolve(file.overlay(self.overrides()?), self.out.clone(), env)
    }
}

fn list() {
    let gens = builtin_generators();
    let props = builtin_propagators();
    let rules = builtin_chi_rules();
    let sections = [
        (gens.kind(), gens.describe().collect::<Vec<_>>()),
        (props.kind(), props.describe().collect()),
        (rules.kind(), rules.describe().collect()),
    ];
    for (kind, entries) in sections {
        println!("{kind}s:");
        for (name, summary) in entries {
            println!("  {name:<10} {summary}");
        }
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let out = experiments::run(&cfg)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for f in &out.files {
        println!("{}", f.display());
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::List => {
            list();
            Ok(())
        }
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}
