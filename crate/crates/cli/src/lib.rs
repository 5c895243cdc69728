//! Command-line driver for the collar numerics.

pub mod args;
pub mod config;
pub mod emit;
pub mod error;
pub mod run;

pub use args::{parse_args, Command, Format, RunConfig, WeightKind};
pub use emit::{emit, render, Report};
pub use error::{CliError, EXIT_FAILED_CHECK, EXIT_INPUT, EXIT_NUMERIC};
pub use run::run;

/// Runs the command line `argv` end to end and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.code == 0 {
                print!("{}", e.message);
            } else {
                eprint!("{}", e.message);
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            return e.code;
        }
    };
    let report = match run(&cfg).and_then(|r| emit(&r, cfg.format, cfg.out.as_deref()).map(|_| r)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    if report.pass {
        0
    } else {
        eprintln!("one or more checks failed; results were written");
        EXIT_FAILED_CHECK
    }
}
