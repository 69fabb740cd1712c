use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use hardcomplete::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let report = run(&cli);
    let json = report.to_json(start.elapsed().as_secs_f64());
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&json).expect("report serializes")
    );
    if let Some(err) = &report.error {
        eprintln!("error in stage `{}`: {}", err.stage, err.message);
        return ExitCode::from(2);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
