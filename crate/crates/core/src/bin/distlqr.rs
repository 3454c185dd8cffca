//! Command-line front end; see `distlqr --help`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distlqr::app::{self, AppError, Overrides};

#[derive(Parser)]
#[command(name = "distlqr", version, about = "Distributed LQR and distributed minimum-energy observer synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Override tolerances.riccati_residual
    #[arg(long, global = true)]
    tol_riccati_residual: Option<f64>,
    /// Override tolerances.lyapunov_residual
    #[arg(long, global = true)]
    tol_lyapunov_residual: Option<f64>,
    /// Override tolerances.rank
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Override tolerances.hurwitz_margin
    #[arg(long, global = true)]
    tol_hurwitz_margin: Option<f64>,
    /// Override tolerances.lmi_margin
    #[arg(long, global = true)]
    tol_lmi_margin: Option<f64>,
    /// Override tolerances.cost_chain
    #[arg(long, global = true)]
    tol_cost_chain: Option<f64>,
    /// Override tolerances.sdp_gap
    #[arg(long, global = true)]
    tol_sdp_gap: Option<f64>,
    /// Override tolerances.zero_eigenvalue
    #[arg(long, global = true)]
    tol_zero_eigenvalue: Option<f64>,
    /// Seed for seeded-noise signals (the j-th such signal gets seed + j)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a design and write the JSON report
    Synthesize {
        /// Run configuration (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Report path; defaults to outputs.report of the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize an observer, simulate it and write trace.csv, metrics.json and design.json
    Simulate {
        /// Run configuration (JSON) with a simulation block
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to outputs.out_dir of the config
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the five-vehicle example and compare with the reference values
    Demo,
}

fn run(cli: Cli) -> Result<(), AppError> {
    let g = cli.global;
    let overrides = Overrides {
        riccati_residual: g.tol_riccati_residual,
        lyapunov_residual: g.tol_lyapunov_residual,
        rank: g.tol_rank,
        hurwitz_margin: g.tol_hurwitz_margin,
        lmi_margin: g.tol_lmi_margin,
        cost_chain: g.tol_cost_chain,
        sdp_gap: g.tol_sdp_gap,
        zero_eigenvalue: g.tol_zero_eigenvalue,
        seed: g.seed,
    };
    match cli.command {
        Command::Synthesize { config, out } => {
            let r = app::cmd_synthesize(&config, out.as_deref(), &overrides)?;
            eprintln!("design verified ({:?}, {} agents, {:.1} ms)", r.mode, r.n_agents, r.timings.total_ms);
        }
        Command::Simulate { config, out_dir } => {
            let o = app::cmd_simulate(&config, out_dir.as_deref(), &overrides)?;
            let settle = o.metrics.metrics.aggregate.settling_time.map_or("not reached".into(), |t| format!("{t:.3} s"));
            eprintln!("simulated {} steps; aggregate 5% settling time {settle}", o.trace.steps);
        }
        Command::Demo => {
            app::demo::cmd_demo(&mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
