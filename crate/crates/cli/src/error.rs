use std::fmt;

/// Failures mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input file (exit 2).
    Parse(String),
    /// Invalid flags, weights or policy (exit 3).
    Config(String),
    /// Policy samples cover fewer than two sizes (exit 4).
    DegenerateSamples(String),
    /// Anything else, e.g. every benchmark run failed (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::DegenerateSamples(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::DegenerateSamples(m) => write!(f, "cannot fit policy: {m}"),
            CliError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
