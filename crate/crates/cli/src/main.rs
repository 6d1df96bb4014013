mod args;
mod commands;
mod output;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format};
use commands::CliError;

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads.filter(|&n| n > 1) {
        // fails only when a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    configure_threads(cli.global.threads);
    let outcome = match commands::run(&cli.command, &cli.global) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Capacity(_) => 3,
            });
        }
    };
    match cli.global.format {
        Format::Json => {
            let v = output::round_json(outcome.json);
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
        }
        Format::Csv => print!("{}", outcome.table.to_csv()),
    }
    for c in &outcome.capacity {
        eprintln!("partial output, {c}");
    }
    if outcome.failures > 0 {
        eprintln!("{} check(s) failed", outcome.failures);
        ExitCode::from(1)
    } else if !outcome.capacity.is_empty() {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
