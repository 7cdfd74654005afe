use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: non-finite {what} = {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("point {0:?} outside grid sampleable interior")]
    OutOfInterior([f64; 3]),
    #[error("no valid depth pixels to sample from")]
    EmptySample,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
