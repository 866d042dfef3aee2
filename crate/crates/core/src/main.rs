use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use bandit_sim::cli::config::resolve_table;
use bandit_sim::cli::{read_logged_feedback_file, run_experiment, ExperimentConfig, RunError};
use bandit_sim::offpolicy::{fit_ipw, training_propensities, IpwConfig};
use bandit_sim::SimError;

#[derive(Parser)]
#[command(name = "bandit-sim", version, about = "Seeded contextual-bandit experiments with drift and delay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV files.
    Run(RunArgs),
    /// Print the fully merged config without running it.
    ShowConfig(RunArgs),
    /// Train an IPW policy on a logged-feedback CSV and print its weights.
    FitIpw(FitIpwArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    config: Option<PathBuf>,
    /// Preset to start from (overrides `preset` in the file).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Concurrent replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct FitIpwArgs {
    /// Logged-feedback CSV.
    log: PathBuf,
    #[arg(long)]
    n_actions: usize,
    /// Use the logged propensities instead of a learned propensity model.
    #[arg(long)]
    true_propensities: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config_error(msg: impl Into<String>) -> RunError {
    RunError::Config(SimError::Config(msg.into()))
}

fn integer(key: &str, v: u64) -> Result<Value, RunError> {
    i64::try_from(v).map(Value::Integer).map_err(|_| config_error(format!("--{key}: value too large")))
}

impl RunArgs {
    fn merged_table(&self) -> Result<Table, RunError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_error(format!("{}: cannot read config: {e}", path.display())))?;
                text.parse::<Table>().map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
            None if self.preset.is_none() => return Err(config_error("give a config file or --preset")),
            None => Table::new(),
        };
        let mut overrides = Table::new();
        if let Some(p) = &self.preset {
            overrides.insert("preset".into(), Value::String(p.clone()));
        }
        if let Some(out) = &self.out {
            overrides.insert("output_dir".into(), Value::String(out.display().to_string()));
        }
        if let Some(r) = self.replications {
            overrides.insert("replications".into(), integer("replications", r)?);
        }
        if let Some(s) = self.master_seed {
            overrides.insert("master_seed".into(), integer("master-seed", s)?);
        }
        if let Some(j) = self.jobs {
            overrides.insert("jobs".into(), integer("jobs", j as u64)?);
        }
        resolve_table(file, overrides).map_err(RunError::Config)
    }

    fn config(&self) -> Result<ExperimentConfig, RunError> {
        ExperimentConfig::from_table(self.merged_table()?).map_err(RunError::Config)
    }
}

fn fit(args: &FitIpwArgs) -> Result<(), RunError> {
    let log = read_logged_feedback_file(&args.log).map_err(RunError::Config)?;
    let config = IpwConfig { use_true_propensities: args.true_propensities, seed: args.seed, ..IpwConfig::default() };
    let runtime = |e: SimError| RunError::Runtime(e.to_string());
    let propensities = training_propensities(&log, args.n_actions, &config).map_err(runtime)?;
    let policy = fit_ipw(&log, &propensities, args.n_actions, &config).map_err(runtime)?;
    let model = policy.model();
    let mut out = std::io::stdout().lock();
    let header: Vec<String> = (0..model.dim_context()).map(|j| format!("w_{j}")).collect();
    let write = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| RunError::Runtime(e.to_string()));
    write(&mut out, format!("action,bias,{}", header.join(",")))?;
    for a in 0..model.n_actions() {
        let row: Vec<String> = model.weight_row(a).iter().map(f64::to_string).collect();
        write(&mut out, format!("{a},{},{}", model.biases()[a], row.join(",")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => args.config().and_then(|config| {
            let files = run_experiment(&config, args.quiet)?;
            if !args.quiet {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
            }
            Ok(())
        }),
        Command::ShowConfig(args) => args.merged_table().and_then(|table| {
            ExperimentConfig::from_table(table.clone()).map_err(RunError::Config)?;
            print!("{}", toml::to_string(&table).map_err(|e| RunError::Runtime(e.to_string()))?);
            Ok(())
        }),
        Command::FitIpw(args) => fit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bandit-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
