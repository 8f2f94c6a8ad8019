use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use memaudit_cli::args::Cli;
use memaudit_cli::commands;
use memaudit_cli::config::ConfigFile;
use memaudit_cli::error::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(CliError::config("--threads must be at least 1"), None);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(CliError::config(format!("thread pool: {e}")), None);
        }
    }
    let name = cli.command.name();
    let result = ConfigFile::load(cli.config.as_deref(), name)
        .and_then(|cfg| commands::run(cli.command, &cfg, cli.manifest));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, Some(name)),
    }
}

fn fail(e: CliError, subcommand: Option<&str>) -> ExitCode {
    eprintln!("error: {e}");
    if matches!(e, CliError::Config(_)) {
        let mut cmd = Cli::command();
        cmd.build();
        let usage = match subcommand.and_then(|s| cmd.find_subcommand_mut(s)) {
            Some(sub) => sub.render_usage(),
            None => cmd.render_usage(),
        };
        eprintln!("\n{usage}");
    }
    e.exit_code()
}
