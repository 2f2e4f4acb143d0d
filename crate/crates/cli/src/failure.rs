use std::fmt;

/// Command outcome other than success, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad manifest, missing file, malformed input.
    Validation(anyhow::Error),
    /// Every artifact was written but some strategy did not converge.
    NotConverged(Vec<String>),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Validation(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) => write!(f, "invalid input: {e:#}"),
            Failure::NotConverged(names) => write!(f, "not converged: {}", names.join(", ")),
            Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Attaches a failure class to fallible results.
pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}
