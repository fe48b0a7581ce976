//! `curvemeas`: fit measures on curves from the command line.
//!
//! Exit codes: 0 success, 1 failed validation or internal error, 2 bad
//! flags, 3 unreadable input, 4 infeasible problem.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Error with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Infeasible(String),
    Failed(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Infeasible(m) | CliError::Failed(m) => m,
        }
    }

    /// Classifies an error raised while reading an input file.
    pub fn input(path: &std::path::Path, e: curvemeas::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<curvemeas::Error> for CliError {
    fn from(e: curvemeas::Error) -> Self {
        use curvemeas::Error as E;
        match e {
            E::Infeasible(_) => CliError::Infeasible(e.to_string()),
            E::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

fn init_threads(flag: Option<u64>) -> Result<(), CliError> {
    let from_env = match std::env::var("CURVEMEAS_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::Usage(format!("CURVEMEAS_THREADS={v:?} is not a positive integer")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = from_env.or(flag.map(|n| n as usize)) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads(cli.threads).and_then(|_| commands::run(cli.command));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let e: CliError = curvemeas::Error::Infeasible("alpha too small".into()).into();
        assert_eq!(e.code(), 4);
        let e: CliError = curvemeas::Error::InvalidParameter("lambda".into()).into();
        assert_eq!(e.code(), 2);
        let e = CliError::input(std::path::Path::new("x.json"), curvemeas::Error::EmptyMeasure);
        assert_eq!(e.code(), 3);
    }
}
