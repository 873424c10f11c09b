use clap::error::ErrorKind;
use clap::Parser;
use growthlab::{init_threads, run, Cli, CliError};
use std::process::ExitCode;

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(&e),
    }
}
