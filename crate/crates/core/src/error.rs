use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scene syntax error at line {line}, column {column}: {message}")]
    SceneSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scene: {0}")]
    SceneSemantic(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch for `{name}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("unexpected tensor `{0}`")]
    UnexpectedTensor(String),

    #[error("{format} framing error at byte {offset}: {message}")]
    Framing {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn framing(format: &'static str, offset: usize, message: impl Into<String>) -> Self {
        Error::Framing {
            format,
            offset,
            message: message.into(),
        }
    }
}
