use thiserror::Error;

/// Errors raised by the kinematic, compliance and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid {name}: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("leg {leg} cannot reach the pose (horizontal gap {gap:.6} mm exceeds link length {link_length:.6} mm)")]
    Unreachable {
        leg: usize,
        gap: f64,
        link_length: f64,
    },

    #[error("singular configuration: {what} (condition estimate {condition:.3e})")]
    Singular { what: String, condition: f64 },

    #[error("{name} = {value} outside allowed range [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("workspace sampling produced no poses: {0}")]
    EmptyWorkspace(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("bench analysis: {0}")]
    Bench(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl ModelError {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Domain {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that mean "this design/pose cannot be evaluated"
    /// rather than a caller mistake.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            ModelError::Unreachable { .. } | ModelError::Singular { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
