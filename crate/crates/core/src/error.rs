use std::fmt;

/// Coordinates of a failing grid point, attached to errors bubbling out of scans.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub tau_fs: f64,
    pub waiting_fs: f64,
    pub t_fs: f64,
    pub phase_indices: Option<(usize, usize, usize)>,
}

impl fmt::Display for ScanPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau={} fs, T={} fs, t={} fs", self.tau_fs, self.waiting_fs, self.t_fs)?;
        if let Some((l, m, n)) = self.phase_indices {
            write!(f, ", phase cycle ({l},{m},{n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("integration failed at t = {time_fs} fs: {reason}")]
    Integration { time_fs: f64, reason: String },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("numerically singular matrix (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("at {point}: {source}")]
    AtPoint {
        point: ScanPoint,
        #[source]
        source: Box<Error>,
    },

    #[error("{count} sweep point(s) failed: {summary}")]
    Sweep { count: usize, summary: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed spectrum file: {0}")]
    Format(String),
}

impl Error {
    pub fn at(self, point: ScanPoint) -> Self {
        Error::AtPoint { point, source: Box::new(self) }
    }

    /// Short machine-readable tag used by the CLI and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Validation(_) => "validation",
            Error::Integration { .. } => "integration",
            Error::Unsupported(_) => "unsupported",
            Error::Calibration(_) => "calibration",
            Error::Singular { .. } => "singular",
            Error::AxisMismatch(_) => "axis_mismatch",
            Error::Parse { .. } => "parse",
            Error::AtPoint { source, .. } => source.kind(),
            Error::Sweep { .. } => "sweep",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
