//! `openaqc`: batch front end for spectra, crossover times, evolution and
//! constant-spectrum checks of open adiabatic models.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, CliResult, CommandOutput};
use config::{Format, ModelKind, RunConfig};
use output::{scalar_table, ResultBundle};

#[derive(Parser)]
#[command(name = "openaqc", version, about = "Adiabaticity analysis of open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Jordan block structure of the generator at chosen s values.
    Spectrum,
    /// Crossover times over a run-time grid.
    Crossover,
    /// Exact and adiabatic evolution to s = 1.
    Evolve,
    /// Longest run time that still reaches the target success probability.
    Optimal,
    /// Sufficient-condition, commutator and constant-spectrum checks.
    #[command(name = "check-theorem1")]
    CheckTheorem1,
    /// Crossover times over every λ in the list and the run-time grid.
    Sweep,
    /// Print the effective configuration in canonical form.
    Config,
}

impl Command {
    fn id(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Crossover => "crossover",
            Command::Evolve => "evolve",
            Command::Optimal => "optimal",
            Command::CheckTheorem1 => "check-theorem1",
            Command::Sweep => "sweep",
            Command::Config => "config",
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    n_qubits: Option<usize>,
    /// constant0, constant1 or balanced:<hex>.
    #[arg(long, global = true)]
    f: Option<String>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Comma-separated dephasing strengths.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    /// start:stop:points[:log]
    #[arg(long = "T-grid", global = true)]
    t_grid: Option<String>,
    /// Number of s-grid points.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Comma-separated s values for `spectrum`.
    #[arg(long, global = true, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    #[arg(long, global = true)]
    target: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Midpoint steps of the exact integrator.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Double the integrator steps.
    #[arg(long, global = true)]
    step_doubling: bool,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// σ₋ emission rate on every qubit.
    #[arg(long, global = true)]
    emission: Option<f64>,
    /// σx dephasing strength on the first qubit.
    #[arg(long, global = true)]
    perturbation: Option<f64>,
    /// Pauli sum for H(0) of a custom model.
    #[arg(long, global = true, allow_hyphen_values = true)]
    h0: Option<String>,
    /// Pauli sum G with u(s) = exp(iπsG/2).
    #[arg(long, global = true, allow_hyphen_values = true)]
    generator: Option<String>,
    /// Pauli sum for a Lindblad operator (repeatable).
    #[arg(long, global = true, allow_hyphen_values = true)]
    lindblad: Vec<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Record wall-clock time in the bundle.
    #[arg(long, global = true)]
    timing: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        set(&mut m.kind, self.model);
        set(&mut m.n_qubits, self.n_qubits);
        set_opt(&mut m.f, &self.f);
        set(&mut m.omega, self.omega);
        set(&mut m.lambda, self.lambda.clone());
        set(&mut m.emission, self.emission);
        set(&mut m.perturbation, self.perturbation);
        set_opt(&mut m.h0, &self.h0);
        set_opt(&mut m.generator, &self.generator);
        if !self.lindblad.is_empty() {
            m.lindblad = self.lindblad.clone();
        }
        let r = &mut cfg.run;
        if self.t.is_some() {
            r.t = self.t;
            if self.t_grid.is_none() {
                r.t_grid = None;
            }
        }
        set_opt(&mut r.t_grid, &self.t_grid);
        if self.grid.is_some() {
            r.grid = self.grid;
        }
        set(&mut r.s, self.s.clone());
        set(&mut r.target, self.target);
        set(&mut r.margin, self.margin);
        set(&mut r.steps, self.steps);
        set(&mut r.samples, self.samples);
        r.step_doubling |= self.step_doubling;
        let o = &mut cfg.output;
        if let Some(p) = &self.out {
            o.path = Some(p.display().to_string());
        }
        set(&mut o.format, self.format);
        o.timing |= self.timing;
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt(slot: &mut Option<String>, v: &Option<String>) {
    if v.is_some() {
        slot.clone_from(v);
    }
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.0)))?
        }
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command, cfg: &RunConfig) -> CliResult<CommandOutput> {
    match command {
        Command::Spectrum => commands::spectrum_cmd(cfg),
        Command::Crossover => commands::crossover_cmd(cfg),
        Command::Evolve => commands::evolve_cmd(cfg),
        Command::Optimal => commands::optimal_cmd(cfg),
        Command::CheckTheorem1 => commands::check_theorem_cmd(cfg),
        Command::Sweep => commands::sweep_cmd(cfg),
        Command::Config => unreachable!("handled before execution"),
    }
}

fn render(command: Command, cfg: &RunConfig) -> CliResult<String> {
    if command == Command::Config {
        return Ok(cfg.canonical());
    }
    let start = Instant::now();
    let out = execute(command, cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(match cfg.output.format {
        Format::Json => ResultBundle {
            command: command.id(),
            version: env!("CARGO_PKG_VERSION"),
            inputs: cfg,
            provenance: out.provenance,
            outputs: out.outputs,
            wall_clock_s: cfg.output.timing.then_some(elapsed),
        }
        .to_json(),
        Format::Csv => out.table.unwrap_or_else(|| scalar_table(&out.outputs)).to_csv(),
    })
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load(cli)?;
    let text = render(cli.command, &cfg)?;
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {p}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
