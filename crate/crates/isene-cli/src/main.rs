//! `isene` command line: runs one task from a JSON config and writes
//! deterministic artifacts plus a run manifest.
//!
//! Exit codes: 0 ok, 2 config error, 3 numeric failure.

mod config;
mod tasks;

use clap::Parser;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "isene", about = "Workbench for inductively coupled Andreev spin chains")]
struct Cli {
    /// Task to run; must match the config's task kind.
    /// One of: solve, extract, scan, spectrum, dynamics, optimize, gates, qec, check.
    task: String,
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for embarrassingly parallel sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the tasks that draw random logical states.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn config_error(detail: serde_json::Value) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({"error": "config", "detail": detail})
    );
    ExitCode::from(2)
}

fn numeric_error(detail: String) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({"error": "numeric", "detail": detail})
    );
    ExitCode::from(3)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return config_error(serde_json::json!(format!("thread pool: {e}")));
        }
    }

    let raw = match std::fs::read_to_string(&cli.config) {
        Ok(r) => r,
        Err(e) => {
            return config_error(serde_json::json!(format!(
                "cannot read {}: {e}",
                cli.config.display()
            )))
        }
    };
    let document: serde_json::Value = match serde_json::from_str(&raw) {
        Ok(d) => d,
        Err(e) => return config_error(serde_json::json!(format!("invalid JSON: {e}"))),
    };
    let run_config = match config::parse_config(&document) {
        Ok(c) => c,
        Err(violations) => {
            return config_error(serde_json::json!({ "violations": violations }));
        }
    };
    if run_config.task.kind() != cli.task {
        return config_error(serde_json::json!(format!(
            "task argument \"{}\" does not match config task \"{}\"",
            cli.task,
            run_config.task.kind()
        )));
    }

    // Hash the canonicalized config for the manifest.
    let canonical = serde_json::to_string(&document).expect("re-serializes");
    let config_hash = format!("{:x}", Sha256::digest(canonical.as_bytes()));

    let ctx = tasks::RunContext {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        config_hash,
    };
    match tasks::run(&run_config, &ctx) {
        Ok(_) => ExitCode::SUCCESS,
        Err(tasks::TaskError::Io(e)) => numeric_error(format!("io: {e}")),
        Err(tasks::TaskError::Numeric(m)) => numeric_error(m),
    }
}
