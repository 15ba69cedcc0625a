use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("color out of gamut: {0}")]
    Gamut(String),

    #[error("degenerate adaptation color: {0}")]
    DegenerateAdaptation(String),

    #[error("degenerate ellipse: semi-axes must be positive, got ({0}, {1})")]
    DegenerateEllipse(f64, f64),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("incomplete threshold data: {0}")]
    IncompleteData(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("power model fit failed: {0}")]
    Fit(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("segment [{start}, {end}) contains no power readings")]
    EmptySegment { start: f64, end: f64 },

    #[error("image has no pixels")]
    EmptyImage,

    #[error("target power {target} W is not achievable (reachable range [{min}, {max}] W)")]
    Unachievable { target: f64, min: f64, max: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
