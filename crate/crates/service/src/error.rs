use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),

    #[error("no trained rule base for dataset '{dataset}' and config '{config}'")]
    RuleBaseMissing { dataset: String, config: String },

    /// Out-of-order or duplicate submission, or a finished stream.
    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    Validation(String),

    #[error("persistence failure: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] scefis_core::Error),

    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::NotFound(_) | Self::RuleBaseMissing { .. } => StatusCode::NOT_FOUND,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Core(scefis_core::Error::DimensionMismatch { .. })
            | Self::Core(scefis_core::Error::Image(_)) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::NotFound(_) => "not_found",
            Self::RuleBaseMissing { .. } => "rule_base_missing",
            Self::Conflict(_) => "conflict",
            Self::Validation(_) => "validation",
            Self::Core(scefis_core::Error::DimensionMismatch { .. })
            | Self::Core(scefis_core::Error::Image(_)) => "validation",
            _ => "internal",
        }
    }

    pub fn hint(&self) -> Option<String> {
        match self {
            Self::RuleBaseMissing { dataset, config } => Some(format!(
                "train one first: scefis train --dataset <dir of {dataset}> --config <{config}.toml>, \
                 with the same SCEFIS_DATA_DIR as the server"
            )),
            _ => None,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let Some(h) = self.hint() {
            body["hint"] = h.into();
        }
        (self.status(), Json(body)).into_response()
    }
}
