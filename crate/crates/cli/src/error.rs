use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config { origin: String, line: Option<usize>, msg: String },
    Math(String),
    Verify { failed: usize, total: usize },
}

impl CliError {
    pub fn config(origin: &str, line: Option<usize>, msg: &str) -> CliError {
        CliError::Config { origin: origin.to_string(), line, msg: msg.to_string() }
    }

    /// Math error with the state at which it happened.
    pub fn at_state(e: geomech::Error, q: &[f64], qdot: &[f64]) -> CliError {
        CliError::Math(format!("{e} (state q = {q:?}, qdot = {qdot:?})"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Math(_) => 2,
            CliError::Verify { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { origin, line: Some(l), msg } => write!(f, "config error in {origin}, line {l}: {msg}"),
            CliError::Config { origin, line: None, msg } => write!(f, "config error in {origin}: {msg}"),
            CliError::Math(m) => write!(f, "math error: {m}"),
            CliError::Verify { failed, total } => write!(f, "verification failed: {failed} of {total} checks"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<geomech::Error> for CliError {
    fn from(e: geomech::Error) -> Self {
        CliError::Math(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Math(format!("output: {e}"))
    }
}
