mod commands;
mod output;

use clap::{Parser, Subcommand};

/// Pointer-basis analysis and feedback stabilization for linear Gaussian
/// open quantum systems.
#[derive(Parser)]
#[command(name = "pointerlab", version, about)]
struct Cli {
    /// JSON config file supplying defaults for any flag; explicit flags win.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a model file: drift, diffusion, spectrum, stability.
    ModelInfo(commands::model_info::Args),
    /// Scan the PR region, report mixing/survival times and the pointer basis.
    PointerScan(commands::pointer_scan::Args),
    /// Fit the pointer mixing time to a temperature power law.
    FitPowerlaw(commands::fit_powerlaw::Args),
    /// Sweep feedback performance along the PR boundary.
    FeedbackSweep(commands::feedback_sweep::Args),
    /// Monte Carlo check of the closed-loop ensemble statistics.
    Simulate(commands::simulate::Args),
    /// Compare the proportional gain with the cheap-control LQG gain.
    LqgCheck(commands::lqg_check::Args),
    /// Write every figure-reproduction CSV into a directory.
    Figures(commands::figures::Args),
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("POINTERLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_thread_pool();
    let cli = Cli::parse();
    let config = match cli.config.as_deref().map(output::load_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let result = match cli.command {
        Command::ModelInfo(args) => commands::model_info::run(args, &config),
        Command::PointerScan(args) => commands::pointer_scan::run(args, &config),
        Command::FitPowerlaw(args) => commands::fit_powerlaw::run(args, &config),
        Command::FeedbackSweep(args) => commands::feedback_sweep::run(args, &config),
        Command::Simulate(args) => commands::simulate::run(args, &config),
        Command::LqgCheck(args) => commands::lqg_check::run(args, &config),
        Command::Figures(args) => commands::figures::run(args, &config),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
