use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use geoflow_cli::error::EXIT_INPUT;
use geoflow_cli::{emit, run_timed, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let (kind, options) = cli.command.split();
    let config = RunConfig::new(kind, options);
    let result = run_timed(&config).and_then(|output| {
        let text = emit(&output, config.format, config.out.as_deref())?;
        Ok((output.exit_code, text))
    });
    match result {
        Ok((code, text)) => {
            if let Some(text) = text {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
