use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rta_core::filters::FilterKind;
use rta_sim::{bench, load_config, run, write_bench, CliError, Overrides, OUT_ENV};

#[derive(Parser)]
#[command(
    name = "rta-sim",
    version,
    about = "Multi-deputy inspection simulation with run time assurance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write log.csv and summary.json.
    Run(CommonArgs),
    /// Time repeated simulations.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Reuse the configured seed for every repeat.
        #[arg(long)]
        same_seed: bool,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = OUT_ENV, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    filter: Option<FilterKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Control period, s.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    deputies: Option<usize>,
    /// Apply the primary controller directly (clipped to the thrust box).
    #[arg(long)]
    no_rta: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            filter: self.filter,
            seed: self.seed,
            duration: self.duration,
            dt: self.dt,
            deputies: self.deputies,
            no_rta: self.no_rta,
        }
    }
}

fn fmt_min(v: Option<f64>) -> String {
    v.map_or("inf".to_string(), |v| format!("{v:.6e}"))
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(args.config.as_deref(), &args.overrides())?;
            let art = run(&cfg, &args.out)?;
            let s = &art.summary;
            println!("log: {}", art.log_path.display());
            println!("summary: {}", art.summary_path.display());
            for (k, m) in s.min_phi.iter().enumerate() {
                println!("min phi_{} = {}", k + 1, fmt_min(*m));
            }
            println!(
                "interventions {}, relaxations {}, wall clock {:.3} s",
                s.interventions, s.qp_relaxations, s.wall_clock_s
            );
            println!("{}", if s.safe { "SAFE" } else { "UNSAFE" });
            Ok(if s.safe { 0 } else { 1 })
        }
        Command::Bench {
            common,
            repeats,
            same_seed,
        } => {
            let cfg = load_config(common.config.as_deref(), &common.overrides())?;
            let report = bench(&cfg, repeats, same_seed)?;
            println!("seed,wall_clock_s,min_phi");
            for r in &report.runs {
                println!("{},{:.6},{}", r.seed, r.wall_clock_s, fmt_min(r.min_phi_overall));
            }
            println!(
                "{} x{}: mean {:.4} s, min {:.4} s, max {:.4} s",
                report.filter,
                report.runs.len(),
                report.mean_s,
                report.min_s,
                report.max_s
            );
            let path = write_bench(&report, &common.out)?;
            println!("report: {}", path.display());
            Ok(if report.all_safe() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
