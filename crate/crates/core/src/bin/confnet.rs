use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use confnet::cli::{emit, run, Options};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let opts = Options::parse();
    match run(&opts) {
        Ok(report) => {
            let bytes = emit(&report, opts.format());
            if let Err(e) = std::io::stdout().write_all(&bytes) {
                eprintln!("confnet: cannot write report: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(report.outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("confnet: {e}");
            ExitCode::from(1)
        }
    }
}
