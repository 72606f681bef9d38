//! Annotation backend: a journaled store of per-annotator label sets and the
//! HTTP API the annotation front end talks to.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, serve, Envelope, SharedStore};
pub use error::{Result, ServiceError};
pub use store::{AnnotationStore, LabelEvent, MergePolicy, Page, PageQuery, PostDetail, PostSummary, StatusFilter};
