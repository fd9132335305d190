use std::process::ExitCode;

use clap::Parser;

use centerforge::cli::{main_exit, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CENTERFORGE_LOG", "warn")).init();
    let cli = Cli::parse();
    main_exit(&cli)
}
