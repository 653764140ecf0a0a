use ftsurf::{GeometryError, InverseError, SolveError};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The input does not describe a valid problem.
    #[error("{0}")]
    Validation(String),
    /// The input is valid but the computation failed.
    #[error("{message}")]
    Numerical { message: String, detail: Value },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical { .. } => "numerical",
            CliError::Io(_) => "io",
        };
        let mut doc = json!({ "error": { "kind": kind, "message": self.to_string() } });
        if let CliError::Numerical { detail, .. } = self {
            if !detail.is_null() {
                doc["error"]["detail"] = detail.clone();
            }
        }
        doc
    }

    fn numerical(message: String) -> Self {
        CliError::Numerical { message, detail: Value::Null }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        use GeometryError::*;
        match e {
            InvalidCurvature(_)
            | AngleOutOfRange(_)
            | CoincidentPoints
            | Antipodal
            | DegenerateTriangle
            | PoleSingularity { .. }
            | InvalidProfile(_)
            | OutsideChart(_) => CliError::Validation(e.to_string()),
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Geometry(g) => g.into(),
            SolveError::NonConvergence { iterations, residual, objective, best } => CliError::Numerical {
                message: e.to_string(),
                detail: json!({
                    "iterations": iterations,
                    "residual": residual,
                    "objective": objective,
                    "best": best,
                }),
            },
            SolveError::Escaped(at) => CliError::Numerical { message: e.to_string(), detail: json!({ "best": at }) },
            SolveError::MultipleVertexFailures(_) | SolveError::StepTooSmall(_) => CliError::numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<InverseError> for CliError {
    fn from(e: InverseError) -> Self {
        match e {
            InverseError::Geometry(g) => g.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
