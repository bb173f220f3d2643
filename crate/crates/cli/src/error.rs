use std::fmt;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTATION: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    BadInput,
    Computation,
}

/// A failure with a stable machine-readable kind.
#[derive(Debug)]
pub struct CliError {
    pub severity: Severity,
    pub kind: &'static str,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn bad_input(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::BadInput,
            kind,
            message: message.into(),
        }
    }

    pub fn computation(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Computation,
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.severity {
            Severity::BadInput => EXIT_BAD_INPUT,
            Severity::Computation => EXIT_COMPUTATION,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_line(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "message": self.message,
            "exit": self.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<lineart::Error> for CliError {
    fn from(e: lineart::Error) -> Self {
        use lineart::Error as E;
        let msg = e.to_string();
        match e {
            E::MeshNotFound(_) => Self::bad_input("mesh_not_found", msg),
            E::MeshParse { .. } => Self::bad_input("mesh_parse", msg),
            E::NoFaces => Self::bad_input("no_faces", msg),
            E::ZeroExtent => Self::bad_input("zero_extent", msg),
            E::InvalidArgument(_) => Self::bad_input("invalid_argument", msg),
            E::InvalidCamera(_) => Self::bad_input("invalid_camera", msg),
            E::BadCheckpoint(_) => Self::bad_input("bad_checkpoint", msg),
            E::DimensionMismatch { .. } => Self::bad_input("dimension_mismatch", msg),
            E::Image(_) => Self::bad_input("bad_image", msg),
            E::Io(_) => Self::computation("io", msg),
            E::Json(_) => Self::computation("json", msg),
            E::TooFew { .. } => Self::computation("too_few", msg),
            E::EmptyGrid => Self::bad_input("empty_grid", msg),
            E::UndefinedChamfer(_) => Self::computation("undefined_chamfer", msg),
            E::Scorer(_) => Self::computation("scorer", msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::computation("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::computation("json", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::computation("csv", e.to_string())
    }
}
