use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use rectify_cli::{run, RunConfig};

fn main() -> ExitCode {
    let cfg = RunConfig::parse();
    match run(&cfg) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            // A closed pipe on stdout does not undo the written report.
            let _ = writeln!(out, "{}", outcome.summary);
            let _ = writeln!(out, "report: {}", outcome.report.display());
            for p in &outcome.extra {
                let _ = writeln!(out, "wrote: {}", p.display());
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
