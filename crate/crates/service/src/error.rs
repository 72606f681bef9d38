use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("UnknownPost: no post with id `{0}`")]
    UnknownPost(String),
    #[error("UnknownLabel: `{0}` is not in the label catalog")]
    UnknownLabel(String),
    #[error("ConflictingRequest: labels both added and removed: {0:?}")]
    ConflictingRequest(Vec<String>),
    #[error("BadPage: {0}")]
    BadPage(String),
    #[error("BadRequest: {0}")]
    BadRequest(String),
    #[error("NoDoublyAnnotatedPosts: no post is annotated by both annotators")]
    NoDoublyAnnotatedPosts,
    #[error("CorruptJournal: line {line}: {message}")]
    CorruptJournal { line: usize, message: String },
    #[error(transparent)]
    Core(cbtnlu_core::Error),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<cbtnlu_core::Error> for ServiceError {
    fn from(e: cbtnlu_core::Error) -> Self {
        match e {
            cbtnlu_core::Error::UnknownLabel(l) => ServiceError::UnknownLabel(l),
            cbtnlu_core::Error::NoDoublyAnnotatedPosts => ServiceError::NoDoublyAnnotatedPosts,
            other => ServiceError::Core(other),
        }
    }
}

impl ServiceError {
    pub fn name(&self) -> &'static str {
        match self {
            ServiceError::UnknownPost(_) => "UnknownPost",
            ServiceError::UnknownLabel(_) => "UnknownLabel",
            ServiceError::ConflictingRequest(_) => "ConflictingRequest",
            ServiceError::BadPage(_) => "BadPage",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::NoDoublyAnnotatedPosts => "NoDoublyAnnotatedPosts",
            ServiceError::CorruptJournal { .. } => "CorruptJournal",
            ServiceError::Core(e) => e.name(),
            ServiceError::Io(_) => "Io",
            ServiceError::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
