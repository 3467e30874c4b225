mod config;
mod output;
mod report;
mod svg;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavekit::coeffs::validate_assumptions;

use crate::output::Writer;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "wavekit", version, about = "Minimal speeds and pulsating fronts of periodic KPP systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks listed in a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel work (all cores by default).
        #[arg(long)]
        threads: Option<usize>,
        /// Recorded in the report; overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the config schema and the standing assumptions of its system.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WAVEKIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => run(config, out, threads, seed),
        Command::Validate { config } => validate(config),
    }
}

fn run(path: PathBuf, out: Option<PathBuf>, threads: Option<usize>, seed: Option<u64>) -> ExitCode {
    let job = match config::load(&path) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("config error in {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &job.warnings {
        log::warn!("{w}");
    }
    if job.plan.is_empty() {
        log::info!("no tasks requested");
        return ExitCode::SUCCESS;
    }
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let seed = seed.or(job.config.seed).unwrap_or(0);
    let dir = out
        .or_else(|| job.config.output.clone())
        .unwrap_or_else(|| PathBuf::from("wavekit-out"));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_NUMERICAL);
    }
    let artifacts = tasks::run_plan(&job, &dir);
    let r = report::emit_report(&job, seed, &artifacts);
    let w = Writer::new(&dir);
    let written = w
        .json("report.json", &r.report)
        .and_then(|_| w.text("index.svg", &r.index_svg))
        .and_then(|_| w.json("timings.json", &r.timings));
    if let Err(e) = written {
        eprintln!("cannot write report: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    let mut failed = false;
    for a in &artifacts {
        if let Some(e) = a.summary.get("error").and_then(|e| e.as_str()) {
            eprintln!("{}: {e}", a.task);
            failed = true;
        }
    }
    if failed {
        ExitCode::from(EXIT_NUMERICAL)
    } else {
        println!("{}", dir.join("report.json").display());
        ExitCode::SUCCESS
    }
}

fn validate(path: PathBuf) -> ExitCode {
    let job = match config::load(&path) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("config error in {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let report = match validate_assumptions(&job.system, job.config.validate.sampling_factor) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    match serde_json::to_string_pretty(&report) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("{e}"),
    }
    if let Err(e) = report.require() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    ExitCode::SUCCESS
}
