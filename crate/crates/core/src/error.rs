use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mask has no foreground component")]
    NoComponent,

    #[error("mask contains no line pixels")]
    NoLine,

    #[error("tooth does not touch the bone contour")]
    NoBoneContact,

    #[error("tooth does not touch the CEJ line")]
    NoCejContact,

    #[error("kappa is undefined when chance agreement equals 1")]
    UndefinedKappa,

    #[error("no class has both positive and negative samples")]
    NoAuc,

    #[error("pooled variance is zero but the sample means differ")]
    DegenerateVariance,

    #[error("shape error at layer {layer}: {message}")]
    Shape { layer: String, message: String },

    #[error("tape already consumed by a previous backward pass")]
    StaleTape,

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("{context}: {source}")]
    Training {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e.to_string())
    }
}

impl From<png::EncodingError> for Error {
    fn from(e: png::EncodingError) -> Self {
        Error::Image(e.to_string())
    }
}

impl From<png::DecodingError> for Error {
    fn from(e: png::DecodingError) -> Self {
        Error::Image(e.to_string())
    }
}
