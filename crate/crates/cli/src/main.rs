#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

mod commands;
mod expr;

use commands::Outcome;

/// Batch experiments on chart-based Riemannian manifolds.
#[derive(Debug, Parser)]
#[command(name = "cgeo", version)]
struct Cli {
    /// Seed for every randomized sample; recorded in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory receiving the JSON summary and CSV series.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for batch operations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: commands::Command,
}

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

fn write_outputs(dir: &PathBuf, name: &str, json: &str, files: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{name}.json")), json)?;
    for (file, bytes) in files {
        fs::write(dir.join(file), bytes)?;
    }
    Ok(())
}

fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let name = cli.command.name();
    let ctx = commands::Context {
        seed: cli.seed,
        threads: cli.threads,
    };
    let (value, files, code) = match cli.command.run(&ctx) {
        Ok(Outcome {
            result,
            files,
            inconclusive,
            failed,
        }) => {
            let code = if failed {
                EXIT_NUMERICAL
            } else if inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                0
            };
            (result, files, code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(message) = value.get("error").and_then(Value::as_str) {
        eprintln!("error: {message}");
    }
    let text = render(&value);
    print!("{text}");
    if let Some(dir) = &cli.out {
        if let Err(e) = write_outputs(dir, name, &text, &files) {
            eprintln!("error: cannot write to {}: {e}", dir.display());
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }
    ExitCode::from(code)
}
