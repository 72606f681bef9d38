use thiserror::Error;

/// Every failure the toolkit can report.
///
/// The `Display` form of each variant starts with the variant name so that
/// command-line front ends can surface it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("UnknownLabel: `{0}` is not in the label catalog")]
    UnknownLabel(String),
    #[error("ParseError: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("DuplicateId: post id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("TooSmall: dataset has {size} posts, need at least {required}")]
    TooSmall { size: usize, required: usize },
    #[error("NoPositives: label `{0}` has no positive examples in the training split")]
    NoPositives(String),
    #[error("NoNegatives: label `{0}` has no negative examples in the training split")]
    NoNegatives(String),
    #[error("EmptyVocabulary: no token reaches min_count {0}")]
    EmptyVocabulary(usize),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("NonFiniteGradient: parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("NonFiniteLoss: {0}")]
    NonFiniteLoss(String),
    #[error("DimMismatch: line {line}: expected {expected} values, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("MissingSentenceVector: no vector stored for sentence `{0}`")]
    MissingSentenceVector(String),
    #[error("EmptyInput: both text fields are empty")]
    EmptyInput,
    #[error("EmptySequence: a post needs at least one sentence")]
    EmptySequence,
    #[error("MissingPrediction: no prediction for post `{0}`")]
    MissingPrediction(String),
    #[error("DegenerateTable: expected agreement is 1 but observed agreement is {0}")]
    DegenerateTable(f64),
    #[error("NoDoublyAnnotatedPosts: no post is annotated by both annotators")]
    NoDoublyAnnotatedPosts,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The bare variant name, e.g. `"NoPositives"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnknownLabel(_) => "UnknownLabel",
            Error::Parse { .. } => "ParseError",
            Error::DuplicateId(_) => "DuplicateId",
            Error::TooSmall { .. } => "TooSmall",
            Error::NoPositives(_) => "NoPositives",
            Error::NoNegatives(_) => "NoNegatives",
            Error::EmptyVocabulary(_) => "EmptyVocabulary",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteGradient(_) => "NonFiniteGradient",
            Error::NonFiniteLoss(_) => "NonFiniteLoss",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::MissingSentenceVector(_) => "MissingSentenceVector",
            Error::EmptyInput => "EmptyInput",
            Error::EmptySequence => "EmptySequence",
            Error::MissingPrediction(_) => "MissingPrediction",
            Error::DegenerateTable(_) => "DegenerateTable",
            Error::NoDoublyAnnotatedPosts => "NoDoublyAnnotatedPosts",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
