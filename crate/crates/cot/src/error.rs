use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CotError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("cache miss for request {0}")]
    CacheMiss(String),
    #[error("could not parse reply: {0}")]
    VerdictParse(String),
    #[error("action has no coordinate to cue")]
    CueNotApplicable,
    #[error("step {step}: {message}")]
    Emission { step: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("step {0} has no frame")]
    MissingFrame(usize),
}

impl CotError {
    pub fn code(&self) -> &'static str {
        match self {
            CotError::Backend(_) | CotError::CacheMiss(_) => "backend_error",
            CotError::VerdictParse(_) => "verdict_parse_error",
            CotError::CueNotApplicable => "cue_not_applicable",
            CotError::Emission { .. } => "emission_error",
            CotError::MissingFrame(_) => "missing_frame",
            CotError::Io { .. } => "io_error",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CotError::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }
}
