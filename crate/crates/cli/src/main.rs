use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tscf_cli::pipeline::AblationParam;
use tscf_cli::{commands, CliError, ExperimentConfig, Method};

#[derive(Parser)]
#[command(
    name = "tscf",
    version,
    about = "Counterfactual explanations for time series forecasters"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used for anything missing.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restricts the methods to run (repeatable or comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<String>,
    /// Reads series from a long-format CSV instead of generating them.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic series to synthetic.csv.
    Synth,
    /// Split, scale and window the series into dataset.json.
    Prepare,
    /// Train the forecaster; writes model.json and loss_history.csv.
    Train,
    /// Generate counterfactuals for every test window.
    Generate,
    /// Score counterfactuals; writes reports and comparison.csv.
    Evaluate,
    /// Retrain and score ForecastCF for each horizon.
    SweepHorizon {
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
    },
    /// Vary cp or fr against one trained model.
    Ablate {
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// synth (synthetic data only), prepare, train, generate and evaluate.
    Run {
        /// Repeat the comparison with training seeds seed..seed+k and report means.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Print the resolved config as TOML.
    ShowConfig,
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::fixture(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(csv) = &common.csv {
        cfg.data.csv = Some(csv.clone());
    }
    if !common.method.is_empty() {
        cfg.methods = common
            .method
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(path) = &cfg.data.csv {
        if !path.exists() {
            return Err(CliError::Data(format!("input CSV {} does not exist", path.display())));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Prepare => commands::prepare(&cfg).map(drop),
        Command::Train => commands::train(&cfg).map(drop),
        Command::Generate => commands::generate(&cfg, &cfg.methods),
        Command::Evaluate => commands::evaluate(&cfg, &cfg.methods).map(drop),
        Command::SweepHorizon { horizons } => commands::sweep_horizon(&cfg, &horizons).map(drop),
        Command::Ablate { param, values } => commands::ablate(&cfg, param.parse::<AblationParam>()?, &values).map(drop),
        Command::Run { repeats } => commands::run(&cfg, repeats),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
