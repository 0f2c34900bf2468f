use std::process::ExitCode;

use drpolicy_cli::config::workers_from_env;
use drpolicy_cli::{parse_config, run_with_workers, CliError};

fn fail(e: CliError) -> ExitCode {
    if let CliError::Usage(u) = &e {
        let _ = u.print();
    } else {
        eprintln!("error: {e}");
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cfg = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let workers = match workers_from_env() {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    match run_with_workers(&cfg, workers) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(e),
    }
}
