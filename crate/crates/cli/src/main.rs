use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drsel::{
    emit, resolve_output, run_estimate, run_select, run_simulate, to_json, with_workers, CliError, CliResult, Profile,
    RunConfig, SimulateConfig,
};
use drsel_core::aipw::{VarianceMethod, DEFAULT_BOOT_REPS};
use drsel_core::dgp::{Scenario, ScenarioSpec, Setting, DEFAULT_N, DEFAULT_P};
use drsel_core::refit::ClipBounds;
use drsel_core::selection::{Strategy, LAMBDA_MIN_LINEAR_OM, LAMBDA_MIN_PS};
use drsel_core::sim::SimStrategy;

/// Doubly robust effect estimation with SCAD-selected adjustment sets.
#[derive(Debug, Parser)]
#[command(name = "drsel", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select, refit and estimate the average causal effect.
    Estimate(DataArgs),
    /// Run the selection step only.
    Select(DataArgs),
    /// Run the Monte Carlo study and write its CSV tables.
    Simulate(SimArgs),
    /// Synthetic data generation.
    Dgp {
        #[command(subcommand)]
        command: DgpCommand,
    },
}

#[derive(Debug, Subcommand)]
enum DgpCommand {
    /// Write one simulated dataset as CSV.
    Emit(EmitArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    #[value(alias = "uni")]
    Union,
    #[value(alias = "int")]
    Intersection,
    #[value(alias = "out")]
    Outcome,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VarianceArg {
    Analytic,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    treatment: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long, value_enum, ignore_case = true, default_value = "union")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = LAMBDA_MIN_LINEAR_OM)]
    lambda_min_om: f64,
    #[arg(long, default_value_t = LAMBDA_MIN_PS)]
    lambda_min_ps: f64,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Propensity clipping bounds `lo,hi`.
    #[arg(long, value_parser = parse_clip, default_value = "0.01,0.99")]
    clip: ClipBounds,
    #[arg(long, value_enum, ignore_case = true, default_value = "analytic")]
    variance: VarianceArg,
    /// Bootstrap draws; with analytic variance, the fallback draws (0 disables it).
    #[arg(long, default_value_t = DEFAULT_BOOT_REPS)]
    boot_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: `$DRSEL_OUT_DIR/<command>.json`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Scenarios 1-4 (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
    scenario: Vec<Scenario>,
    /// Settings a-d (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_setting)]
    setting: Vec<Setting>,
    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Design width including the intercept.
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated strategies, e.g. `UNI,INT,O-UNI` (default: all six).
    #[arg(long, value_delimiter = ',', value_parser = parse_sim_strategy)]
    strategies: Option<Vec<SimStrategy>>,
    #[arg(long)]
    lambda_min_om: Option<f64>,
    #[arg(long)]
    lambda_min_ps: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, value_parser = parse_clip)]
    clip: Option<ClipBounds>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: `$DRSEL_OUT_DIR/simulate`, else `./simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long, value_parser = parse_setting)]
    setting: Setting,
    #[arg(long, default_value_t = DEFAULT_N)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_P)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: `$DRSEL_OUT_DIR/dgp.csv`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_clip(s: &str) -> Result<ClipBounds, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    ClipBounds::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: drsel_core::Error| e.to_string())
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    s.parse().map_err(|e: drsel_core::Error| e.to_string())
}

fn parse_sim_strategy(s: &str) -> Result<SimStrategy, String> {
    s.parse().map_err(|e: drsel_core::Error| e.to_string())
}

impl DataArgs {
    fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(self.input, &self.outcome, &self.treatment);
        c.roles.covariates = self.covariates;
        c.strategy = match self.strategy {
            StrategyArg::Union => Strategy::Union,
            StrategyArg::Intersection => Strategy::Intersection,
            StrategyArg::Outcome => Strategy::Outcome,
        };
        c.lambda_min_om = self.lambda_min_om;
        c.lambda_min_ps = self.lambda_min_ps;
        c.grid_size = self.grid_size;
        c.folds = self.folds;
        c.clip = self.clip;
        c.variance = match self.variance {
            VarianceArg::Analytic => VarianceMethod::Analytic,
            VarianceArg::Bootstrap => VarianceMethod::Bootstrap,
        };
        c.boot_reps = self.boot_reps;
        c.seed = self.seed;
        c.out = self.out;
        c
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Estimate(args) => {
            let config = args.into_config();
            let report = with_workers(workers, || run_estimate(&config))??;
            emit(
                resolve_output(config.out.as_deref(), "estimate.json").as_deref(),
                &to_json(&report),
            )
        }
        Command::Select(args) => {
            let config = args.into_config();
            let report = with_workers(workers, || run_select(&config))??;
            emit(
                resolve_output(config.out.as_deref(), "select.json").as_deref(),
                &to_json(&report),
            )
        }
        Command::Simulate(args) => {
            let all_scenarios = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];
            let all_settings = [Setting::A, Setting::B, Setting::C, Setting::D];
            let config = SimulateConfig {
                scenarios: if args.scenario.is_empty() {
                    all_scenarios.to_vec()
                } else {
                    args.scenario
                },
                settings: if args.setting.is_empty() {
                    all_settings.to_vec()
                } else {
                    args.setting
                },
                profile: match args.profile {
                    ProfileArg::Desk => Profile::Desk,
                    ProfileArg::Paper => Profile::Paper,
                },
                reps: args.reps,
                n: args.n,
                p: args.p,
                strategies: args.strategies,
                lambda_min_om: args.lambda_min_om,
                lambda_min_ps: args.lambda_min_ps,
                grid_size: args.grid_size,
                clip: args.clip,
                seed: args.seed,
            };
            let dir = resolve_output(args.out.as_deref(), "simulate").unwrap_or_else(|| PathBuf::from("simulate"));
            let report = with_workers(workers, || run_simulate(&config, &dir))??;
            eprintln!(
                "wrote {} coverage rows and {} selection rows to {}",
                report.coverage.len(),
                report.selection.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Dgp {
            command: DgpCommand::Emit(args),
        } => {
            if args.p < 7 {
                return Err(CliError::Usage(format!("--p must be at least 7, got {}", args.p)));
            }
            let spec = ScenarioSpec::with_p(args.scenario, args.setting, args.n, args.p, args.seed);
            let text = drsel::emit_dgp(&spec)?;
            emit(resolve_output(args.out.as_deref(), "dgp.csv").as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
