use std::process::ExitCode;

use clap::Parser;
use spinfiber::cli::{execute, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    ExitCode::from(execute(args).code() as u8)
}
