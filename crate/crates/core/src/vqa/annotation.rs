use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{render_question, Answer, Question, Slots, TemplateId, Vocabulary, VqaError};

/// Absent members and absent damages sampled per image as "no" questions.
pub const DEFAULT_NEGATIVES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberAnnotation {
    pub name: String,
    #[serde(default)]
    pub damages: Vec<String>,
}

/// Ground truth for one image: which members are visible and what damage
/// each shows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub image_id: String,
    #[serde(default)]
    pub members: Vec<MemberAnnotation>,
}

impl Annotation {
    pub fn new(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            members: Vec::new(),
        }
    }

    pub fn with_member<I, S>(mut self, name: &str, damages: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.members.push(MemberAnnotation {
            name: name.to_string(),
            damages: damages.into_iter().map(Into::into).collect(),
        });
        self
    }

    /// Canonicalizes names against `vocab` and sorts members and damages
    /// into vocabulary order. Repeated damages on a member collapse.
    pub fn validated(&self, vocab: &Vocabulary) -> Result<Annotation, VqaError> {
        if self.image_id.trim().is_empty() {
            return Err(VqaError::EmptyImageId);
        }
        let mut members: Vec<(usize, MemberAnnotation)> = Vec::new();
        for m in &self.members {
            let name = vocab
                .member(&m.name)
                .ok_or_else(|| VqaError::UnknownMember {
                    image_id: self.image_id.clone(),
                    name: m.name.clone(),
                })?;
            let rank = vocab
                .member_rank(name)
                .expect("canonical member has a rank");
            if members.iter().any(|(r, _)| *r == rank) {
                return Err(VqaError::DuplicateMember {
                    image_id: self.image_id.clone(),
                    name: name.to_string(),
                });
            }
            let mut damages = BTreeSet::new();
            for d in &m.damages {
                let damage = vocab.damage(d).ok_or_else(|| VqaError::UnknownDamage {
                    image_id: self.image_id.clone(),
                    name: d.clone(),
                })?;
                damages.insert(
                    vocab
                        .damage_rank(damage)
                        .expect("canonical damage has a rank"),
                );
            }
            members.push((
                rank,
                MemberAnnotation {
                    name: name.to_string(),
                    damages: damages
                        .into_iter()
                        .map(|r| vocab.damages()[r].clone())
                        .collect(),
                },
            ));
        }
        members.sort_by_key(|(r, _)| *r);
        Ok(Annotation {
            image_id: self.image_id.clone(),
            members: members.into_iter().map(|(_, m)| m).collect(),
        })
    }

    pub fn member(&self, name: &str) -> Option<&MemberAnnotation> {
        self.members.iter().find(|m| m.name == name)
    }

    pub fn has_damage(&self, damage: &str) -> bool {
        self.members
            .iter()
            .any(|m| m.damages.iter().any(|d| d == damage))
    }
}

/// A generated question with its expected answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: Question,
    pub answer: Answer,
}

/// One line of a QA corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub image_id: String,
    pub question_text: String,
    pub answer: String,
    pub template_id: TemplateId,
}

/// [`generate_qa_with`] using [`DEFAULT_NEGATIVES`].
pub fn generate_qa(annotation: &Annotation, vocab: &Vocabulary) -> Result<Vec<QaPair>, VqaError> {
    generate_qa_with(annotation, vocab, DEFAULT_NEGATIVES)
}

/// Mechanically derives question/answer pairs from an annotation.
///
/// For every visible member: presence (yes) and whether it is damaged. For
/// every damaged member/damage pair: the pair question (yes). For every
/// damaged member, the "what damage" question answered with its first damage
/// in vocabulary order, and for every visible damage, presence (yes) and the
/// "which member" question answered with the first member carrying it. The
/// image-level "what damage" question is answered with the first damage
/// present. Finally up to `negatives` absent members and absent damages are
/// asked about (no), drawn deterministically from the image id.
pub fn generate_qa_with(
    annotation: &Annotation,
    vocab: &Vocabulary,
    negatives: usize,
) -> Result<Vec<QaPair>, VqaError> {
    let ann = annotation.validated(vocab)?;
    let mut out = Vec::new();
    let mut push = |template: TemplateId, slots: Slots, answer: Answer| {
        let question = render_question(template, &slots).expect("generator fills every slot");
        out.push(QaPair { question, answer });
    };

    for m in &ann.members {
        push(
            TemplateId::MemberPresent,
            Slots::member(&m.name),
            Answer::yes_no(true),
        );
        push(
            TemplateId::AnyDamageOnMember,
            Slots::member(&m.name),
            Answer::yes_no(!m.damages.is_empty()),
        );
    }
    for m in &ann.members {
        for d in &m.damages {
            push(
                TemplateId::DamageOnMember,
                Slots::both(d, &m.name),
                Answer::yes_no(true),
            );
        }
    }
    for m in ann.members.iter().filter(|m| !m.damages.is_empty()) {
        push(
            TemplateId::WhatDamageOnMember,
            Slots::member(&m.name),
            Answer::new(&m.damages[0]),
        );
    }

    let present_damages: Vec<&String> = vocab
        .damages()
        .iter()
        .filter(|d| ann.has_damage(d))
        .collect();
    for d in &present_damages {
        push(
            TemplateId::DamagePresent,
            Slots::damage(*d),
            Answer::yes_no(true),
        );
        let carrier = ann
            .members
            .iter()
            .find(|m| m.damages.contains(d))
            .expect("present damage has a carrier");
        push(
            TemplateId::WhichMemberHasDamage,
            Slots::damage(*d),
            Answer::new(&carrier.name),
        );
    }
    if let Some(first) = present_damages.first() {
        push(
            TemplateId::WhatDamageInImage,
            Slots::none(),
            Answer::new(*first),
        );
    }

    let visible: HashSet<&str> = ann.members.iter().map(|m| m.name.as_str()).collect();
    let absent_members: Vec<&String> = vocab
        .members()
        .iter()
        .filter(|m| !visible.contains(m.as_str()))
        .collect();
    for m in draw(&ann.image_id, &absent_members, negatives) {
        push(
            TemplateId::MemberPresent,
            Slots::member(m),
            Answer::yes_no(false),
        );
    }
    let absent_damages: Vec<&String> = vocab
        .damages()
        .iter()
        .filter(|d| !ann.has_damage(d))
        .collect();
    for d in draw(&ann.image_id, &absent_damages, negatives) {
        push(
            TemplateId::DamagePresent,
            Slots::damage(d),
            Answer::yes_no(false),
        );
    }

    Ok(out)
}

/// Picks `k` names by ranking them on a hash keyed by the image id; the
/// picks are returned in their original (vocabulary) order.
fn draw<'a>(image_id: &str, names: &[&'a String], k: usize) -> Vec<&'a String> {
    let mut keyed: Vec<(u64, usize)> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (fnv1a(&[image_id.as_bytes(), &[0x1f], n.as_bytes()]), i))
        .collect();
    keyed.sort_unstable();
    let mut picked: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    picked.sort_unstable();
    picked.into_iter().map(|i| names[i]).collect()
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    parts
        .iter()
        .flat_map(|p| p.iter())
        .fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Renders a corpus as JSON lines, one record per question, in annotation
/// order. Returns the text and the number of records.
pub fn write_corpus(
    annotations: &[Annotation],
    vocab: &Vocabulary,
    negatives: usize,
) -> Result<(String, usize), VqaError> {
    let mut text = String::new();
    let mut count = 0;
    for ann in annotations {
        for pair in generate_qa_with(ann, vocab, negatives)? {
            let record = QaRecord {
                image_id: ann.image_id.clone(),
                question_text: pair.question.text,
                answer: pair.answer.value,
                template_id: pair.question.template_id,
            };
            text.push_str(&serde_json::to_string(&record).expect("record serializes"));
            text.push('\n');
            count += 1;
        }
    }
    Ok((text, count))
}
