use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seedrl::cli::{
    emit_config, format_summary, load_config, resolve_output_dir, run_experiment, summarize, Algorithm, EnvName, ExperimentConfig,
    OUTPUT_ROOT_VAR,
};

#[derive(Parser)]
#[command(name = "seedrl", version, about = "Concurrent RL experiments with seeded coordinated exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Print per-K mean and standard error of a curves file.
    Summarize { curves: PathBuf },
    /// Print a config with every default filled in.
    PrintDefaults {
        #[arg(long, default_value = "bipolar")]
        env: String,
        #[arg(long, default_value = "seed_lsvi")]
        algorithm: String,
    },
}

fn parse_name<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown name `{s}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), String> = match cli.command {
        Command::Run { config } => (|| {
            let cfg = load_config(&config).map_err(|e| e.to_string())?;
            let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from);
            let out = resolve_output_dir(&cfg, root.as_deref());
            let report = run_experiment(&cfg, &out).map_err(|e| e.to_string())?;
            for line in &report.lines {
                println!("{line}");
            }
            println!("wrote {}", report.curves_path.display());
            Ok(())
        })(),
        Command::Summarize { curves } => summarize(&curves).map(|rows| print!("{}", format_summary(&rows))).map_err(|e| e.to_string()),
        Command::PrintDefaults { env, algorithm } => (|| {
            let env: EnvName = parse_name(&env)?;
            let algorithm: Algorithm = parse_name(&algorithm)?;
            print!("{}", describe_defaults(&ExperimentConfig::minimal(env, algorithm)).map_err(|e| e.to_string())?);
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// The config with every environment-dependent default made explicit.
fn describe_defaults(cfg: &ExperimentConfig) -> seedrl::Result<String> {
    let mut full = cfg.clone();
    full.n_instances = Some(cfg.instances());
    full.schedule = Some(match cfg.schedule_kind() {
        seedrl::harness::ScheduleKind::Synchronous => seedrl::cli::ScheduleName::Synchronous,
        seedrl::harness::ScheduleKind::Poisson { .. } => seedrl::cli::ScheduleName::Poisson,
    });
    match cfg.horizon() {
        seedrl::harness::ScheduleHorizon::Actions(h) => full.actions = Some(h),
        seedrl::harness::ScheduleHorizon::Time(t) => full.time_limit = Some(t),
    }
    full.noise_var = Some(cfg.noise_var());
    full.prior_var = Some(cfg.prior_var());
    if let Some(t) = cfg.tabular() {
        full.plan_horizon = t.plan_horizon;
    }
    if cfg.env == EnvName::Cartpole2 {
        full.eval_horizon = Some(cfg.eval_steps());
    }
    match cfg.value_kind() {
        Some(seedrl::harness::ValueKind::Lsvi(l)) => full.lsvi_horizon = Some(l.planning_horizon),
        Some(seedrl::harness::ValueKind::Td(t)) => {
            full.learning_rate = Some(t.learning_rate);
            full.sgd_iters = Some(t.sgd_iters);
        }
        None => {}
    }
    if let Some((e, eps)) = cfg.ensemble(*cfg.k_values.iter().max().unwrap_or(&1)) {
        full.n_models = Some(e.n_models);
        full.prior_scale = Some(e.prior_scale);
        full.noise_var = Some(e.noise_var);
        full.learning_rate = Some(e.learning_rate);
        full.minibatch = Some(e.minibatch_size);
        full.epsilon = Some(eps);
    }
    emit_config(&full)
}
