use std::process::ExitCode;

use clap::Parser;
use flow_eval_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match flow_eval_cli::run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flow-eval: {}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
