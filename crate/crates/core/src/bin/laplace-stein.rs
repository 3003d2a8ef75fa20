use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use laplace_stein::cli::{run, Cli, ExperimentConfig, OUT_DIR_ENV};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let result = ExperimentConfig::from_cli(&cli).and_then(|cfg| run(&cfg, out_dir.as_deref()));
    match result {
        Ok(outcome) => {
            if outcome.files.is_empty() {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                if stdout.write_all(&outcome.bytes).and_then(|()| stdout.flush()).is_err() {
                    return ExitCode::from(2);
                }
            } else {
                for f in &outcome.files {
                    eprintln!("wrote {}", f.display());
                }
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("laplace-stein: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
