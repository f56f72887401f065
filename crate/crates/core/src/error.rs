use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },
    #[error("under-determined fit: {reports} reports, need at least {required}")]
    UnderDetermined { reports: usize, required: usize },
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("record has no report beyond the {0} already used")]
    NoNewReport(usize),
    #[error("missing ground-truth report at trial {0}")]
    MissingTruth(usize),
    #[error("need at least {required} items, got {got}")]
    TooFew { required: usize, got: usize },
}
