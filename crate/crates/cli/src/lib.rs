//! Command-line front end of `qgeom-core`.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error (nothing is
//! written), 3 gap closure, 4 tolerance violation in `identity-check`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use args::{Cli, Command, Flags};
pub use commands::Outcome;
pub use error::CliError;

/// Resolve settings, size the thread pool and run one command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let settings = config::resolve(cli.command, &cli.flags)?;
    // A second call in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build_global();
    let outcome = commands::execute(cli.command, &settings)?;
    if !outcome.violations.is_empty() {
        return Err(CliError::Tolerance(outcome.violations.join("; ")));
    }
    Ok(outcome)
}
