//! Visual question answering: question templates, mechanical QA generation
//! from annotations, and answer oracles.
//!
//! The diagnosis pipeline only talks to an [`AnswerOracle`]. Two are
//! provided: [`AnnotationOracle`] answers from ground-truth annotations, and
//! [`RemoteOracle`] forwards each question to an HTTP endpoint serving a
//! trained model.

mod annotation;
mod oracle;
mod question;
mod remote;
mod vocab;

pub use annotation::{
    generate_qa, generate_qa_with, write_corpus, Annotation, MemberAnnotation, QaPair, QaRecord,
    DEFAULT_NEGATIVES,
};
pub use oracle::{AnnotationOracle, AnswerOracle, OracleError};
pub use question::{render_question, Question, Slots, TemplateId};
pub use remote::{OracleRequest, OracleResponse, RemoteOracle, RemoteOracleConfig};
pub use vocab::{normalize, Answer, Vocabulary, VocabularyError, NO, YES};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VqaError {
    #[error("unknown question template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template} needs a {slot} slot")]
    MissingSlot {
        template: &'static str,
        slot: &'static str,
    },
    #[error("image {image_id:?}: unknown member {name:?}")]
    UnknownMember { image_id: String, name: String },
    #[error("image {image_id:?}: unknown damage {name:?}")]
    UnknownDamage { image_id: String, name: String },
    #[error("image {image_id:?}: member {name:?} is listed twice")]
    DuplicateMember { image_id: String, name: String },
    #[error("annotation for image {0:?} appears twice")]
    DuplicateImage(String),
    #[error("annotation has an empty image_id")]
    EmptyImageId,
}
