use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shiftband::config::ExperimentConfig;
use shiftband::env::EnvSpec;
use shiftband::ground_truth::{GroundTruthReport, DEFAULT_ROUND_CAP};
use shiftband::harness::{
    run_experiment_with_events, trial_grid, write_outputs, ExperimentResult, RunOptions,
};
use shiftband::{Error, Result};

#[derive(Parser)]
#[command(
    name = "shiftband",
    version,
    about = "Non-stationary bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand an environment spec into its T x K mean matrix (CSV).
    GenerateEnv {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Significant shifts, safe arms and regret yardsticks of an environment.
    GroundTruth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest horizon analysed.
        #[arg(long, default_value_t = DEFAULT_ROUND_CAP)]
        cap: usize,
        /// Include the per-phase first-trigger table.
        #[arg(long)]
        triggers: bool,
    },
    /// Run an experiment and write the outputs named in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for relative output paths (default: the config's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
        /// Print the (T, seed) grid and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(long, env = "SHIFTBAND_SEED_OFFSET", default_value_t = 0)]
        seed_offset: u64,
    },
    /// Summarise a JSON result written by `run`.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn report_text(r: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "policy: {}", r.policy);
    let _ = writeln!(
        s,
        "{:>8} {:>6} {:>14} {:>12} {:>9} {:>6} {:>5} {:>10} {:>12}",
        "T", "seeds", "mean_regret", "std_error", "restarts", "L", "S", "V", "bound_ratio"
    );
    for h in &r.horizons {
        let (l, sw, v) = match &h.ground_truth {
            Some(g) => (
                g.num_shifts.to_string(),
                g.best_arm_switches.to_string(),
                format!("{:.4}", g.total_variation),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let ratio = h.bound_ratio.map_or("-".into(), |x| format!("{x:.6}"));
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>14.4} {:>12.4} {:>9.3} {:>6} {:>5} {:>10} {:>12}",
            h.horizon, h.num_seeds, h.mean_regret, h.std_error, h.mean_restarts, l, sw, v, ratio
        );
    }
    match r.slope {
        Some(x) => {
            let _ = writeln!(s, "slope: {x:.4}");
        }
        None => {
            let _ = writeln!(s, "slope: n/a");
        }
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateEnv { config, out } => {
            let spec = EnvSpec::from_json(&read(&config)?)?;
            let model = spec.expand()?;
            let mut csv = Vec::new();
            model.write_csv(&mut csv)?;
            emit(out.as_deref(), &csv)?;
            if out.is_some() {
                println!("{}", spec.to_json());
            }
        }
        Command::GroundTruth {
            config,
            out,
            cap,
            triggers,
        } => {
            let spec = EnvSpec::from_json(&read(&config)?)?;
            if spec.horizon() > cap {
                return Err(Error::Resource {
                    cap,
                    requested: spec.horizon(),
                });
            }
            let model = spec.expand()?;
            let report = GroundTruthReport::compute(&model, cap, triggers)?;
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            emit(out.as_deref(), &json)?;
        }
        Command::Run {
            config,
            out,
            parallel,
            dry_run,
            seed_offset,
        } => {
            let cfg = ExperimentConfig::from_json(&read(&config)?)?;
            if parallel == Some(0) {
                return Err(Error::Config("--parallel must be positive".into()));
            }
            if dry_run {
                let mut s = String::from("T,seed\n");
                for (t, seed) in trial_grid(&cfg, seed_offset) {
                    let _ = writeln!(s, "{t},{seed}");
                }
                emit(None, s.as_bytes())?;
                return Ok(());
            }
            let base = match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    dir
                }
                None => config.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let opts = RunOptions {
                seed_offset,
                parallelism: parallel,
                keep_events: cfg.outputs.events.is_some(),
            };
            let (result, events) = run_experiment_with_events(&cfg, &opts)?;
            write_outputs(&cfg, &result, &events, &base)?;
            print!("{}", report_text(&result));
        }
        Command::Report { config, out } => {
            let result: ExperimentResult = shiftband::config::parse_json(&read(&config)?)?;
            emit(out.as_deref(), report_text(&result).as_bytes())?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Range { .. } | Error::Validation(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        Error::Resource { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
