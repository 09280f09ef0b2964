use std::process::ExitCode;

use clap::Parser;

use streamsig_cli::{commands, exit_code, Cli, Command};

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| streamsig_cli::usage(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Logsig(a) => commands::logsig(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STREAMSIG_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
