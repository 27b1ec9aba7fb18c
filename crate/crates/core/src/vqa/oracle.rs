use std::collections::HashMap;

use thiserror::Error;

use super::{Annotation, Answer, Question, TemplateId, Vocabulary, VqaError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("no image {0:?} known to the oracle")]
    UnknownImage(String),
    /// The question has no answer for this image (e.g. "what damage" on an
    /// undamaged member). Never counts as evidence.
    #[error("question {question:?} is not applicable to image {image_id:?}")]
    NotApplicable { image_id: String, question: String },
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("answer {raw:?} is outside the vocabulary")]
    Normalization { raw: String },
    #[error("malformed oracle response: {0}")]
    Protocol(String),
}

impl OracleError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            OracleError::Transport {
                retryable: true,
                ..
            }
        )
    }
}

/// Something that answers questions about images.
pub trait AnswerOracle: Send + Sync {
    /// Short description echoed into reports, e.g. `annotation`.
    fn kind(&self) -> String;

    fn answer(&self, image_id: &str, question: &Question) -> Result<Answer, OracleError>;
}

impl<T: AnswerOracle + ?Sized> AnswerOracle for &T {
    fn kind(&self) -> String {
        (**self).kind()
    }
    fn answer(&self, image_id: &str, question: &Question) -> Result<Answer, OracleError> {
        (**self).answer(image_id, question)
    }
}

/// Answers from ground-truth annotations, deterministically.
///
/// Name questions with several correct answers take the first in
/// vocabulary order. Name questions without any correct answer fail with
/// [`OracleError::NotApplicable`].
#[derive(Debug, Clone)]
pub struct AnnotationOracle {
    vocab: Vocabulary,
    images: HashMap<String, Annotation>,
}

impl AnnotationOracle {
    pub fn new(vocab: Vocabulary, annotations: &[Annotation]) -> Result<Self, VqaError> {
        let mut images = HashMap::with_capacity(annotations.len());
        for a in annotations {
            let a = a.validated(&vocab)?;
            if images.contains_key(&a.image_id) {
                return Err(VqaError::DuplicateImage(a.image_id));
            }
            images.insert(a.image_id.clone(), a);
        }
        Ok(Self { vocab, images })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn annotation(&self, image_id: &str) -> Option<&Annotation> {
        self.images.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

impl AnswerOracle for AnnotationOracle {
    fn kind(&self) -> String {
        "annotation".into()
    }

    fn answer(&self, image_id: &str, question: &Question) -> Result<Answer, OracleError> {
        let ann = self
            .images
            .get(image_id)
            .ok_or_else(|| OracleError::UnknownImage(image_id.to_string()))?;
        let not_applicable = || OracleError::NotApplicable {
            image_id: image_id.to_string(),
            question: question.text.clone(),
        };
        let member = || {
            question
                .member
                .as_deref()
                .and_then(|m| self.vocab.member(m))
        };
        let damage = || {
            question
                .damage
                .as_deref()
                .and_then(|d| self.vocab.damage(d))
        };
        let on_member = || member().and_then(|m| ann.member(m));

        // Annotations are stored in vocabulary order, so "first" below is
        // first in vocabulary order.
        let answer = match question.template_id {
            TemplateId::MemberPresent => Answer::yes_no(on_member().is_some()),
            TemplateId::DamagePresent => {
                Answer::yes_no(damage().is_some_and(|d| ann.has_damage(d)))
            }
            TemplateId::DamageOnMember => Answer::yes_no(
                on_member()
                    .is_some_and(|m| damage().is_some_and(|d| m.damages.iter().any(|x| x == d))),
            ),
            TemplateId::AnyDamageOnMember => {
                Answer::yes_no(on_member().is_some_and(|m| !m.damages.is_empty()))
            }
            TemplateId::WhatDamageOnMember => on_member()
                .and_then(|m| m.damages.first())
                .map(Answer::new)
                .ok_or_else(not_applicable)?,
            TemplateId::WhatDamageInImage => self
                .vocab
                .damages()
                .iter()
                .find(|d| ann.has_damage(d))
                .map(Answer::new)
                .ok_or_else(not_applicable)?,
            TemplateId::WhichMemberHasDamage => damage()
                .and_then(|d| {
                    ann.members
                        .iter()
                        .find(|m| m.damages.iter().any(|x| x == d))
                })
                .map(|m| Answer::new(&m.name))
                .ok_or_else(not_applicable)?,
        };
        Ok(answer)
    }
}
