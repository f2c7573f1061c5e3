use std::fmt;

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Internal,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error with the exit status it should produce.
pub trait ResultExt<T> {
    fn or_usage(self) -> CliResult<T>;
    fn or_data(self) -> CliResult<T>;
    fn or_internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn or_usage(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: ExitKind::Usage,
            error: e.into(),
        })
    }

    fn or_data(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: ExitKind::Data,
            error: e.into(),
        })
    }

    fn or_internal(self) -> CliResult<T> {
        self.map_err(|e| CliError {
            kind: ExitKind::Internal,
            error: e.into(),
        })
    }
}
