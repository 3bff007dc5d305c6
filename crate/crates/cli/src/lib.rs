//! Library behind the `deconflict` binary: instance generation, solving,
//! verification, benchmark sweeps and SVG plots. Every command is a plain
//! function so tests can drive it without spawning a process.

pub mod bench;
pub mod commands;
pub mod plot;

use thiserror::Error;

pub use bench::{cmd_bench, mean_std, write_outputs, BenchOptions, BenchOutput, BenchRow, StepCells, Suite, ROW_HEADER, SUMMARY_HEADER};
pub use commands::{
    cmd_generate, cmd_generate_batch, cmd_solve, cmd_verify, parse_bounds, parse_sizes, SolveOptions,
};
pub use plot::{cmd_plot, render_svg};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// The instance is infeasible or no solution was found.
    pub const NO_SOLUTION: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Internal(String),

    #[error(transparent)]
    Core(#[from] deconflict::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use deconflict::Error as E;
        match self {
            CliError::Input(_) | CliError::File { .. } | CliError::Json(_) => exit::INPUT,
            CliError::Internal(_) => exit::INTERNAL,
            CliError::Csv(e) if e.is_io_error() => exit::INPUT,
            CliError::Csv(_) => exit::INTERNAL,
            CliError::Core(e) => match e {
                E::InitialLoss { .. }
                | E::InvalidBounds(_)
                | E::InvalidState(_)
                | E::InvalidInstance(_)
                | E::GenerationFailure { .. }
                | E::Io(_)
                | E::Json(_) => exit::INPUT,
                E::Infeasible => exit::NO_SOLUTION,
                E::ZeroRelativeVelocity | E::IterationLimit | E::Numerical(_) => exit::INTERNAL,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub(crate) fn file_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.display().to_string(),
        source,
    }
}
